#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mechkit/contact.hpp"
#include "mechkit/symplectic.hpp"
#include "gen.hpp"

using namespace mechkit;
using namespace mechkit::contact;

namespace {

const Expr kDampedL = parse("0.5*m*v^2 - 0.5*k*q^2 - gamma*s");
const Expr kDampedh = parse("p^2/(2*m) + 0.5*k*q^2 + gamma*s");
const Params kDamped{{"m", 1.0}, {"k", 1.0}, {"gamma", 0.1}};

const Expr kFrictionL = parse("0.5*m*(vr^2 + r^2*vphi^2) - K/r - gamma*s");
const Expr kFrictionh = parse("(pr^2 + pphi^2/r^2)/(2*m) + K/r + gamma*s");
const Expr kKeplerL = parse("0.5*m*(vr^2 + r^2*vphi^2) - K/r");
const Params kFriction{{"m", 1.0}, {"K", -1.0}, {"gamma", 0.1}};

Chart one() { return Chart::from_coordinates({"q"}); }
Chart polar() { return Chart::from_coordinates({"r", "phi"}); }

PhasePoint tangent(Vector q, Vector v, double s) {
  PhasePoint pt;
  pt.q = std::move(q);
  pt.v = std::move(v);
  pt.s = s;
  return pt;
}

PhasePoint cotangent(Vector q, Vector p, double s) {
  PhasePoint pt;
  pt.q = std::move(q);
  pt.p = std::move(p);
  pt.s = s;
  return pt;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

PhasePoint random_polar(std::mt19937_64& rng, bool cot) {
  const Vector q{uniform(rng, 0.5, 2), uniform(rng, -3, 3)};
  const Vector w{uniform(rng, -2, 2), uniform(rng, -2, 2)};
  const double s = uniform(rng, -1, 1);
  return cot ? cotangent(q, w, s) : tangent(q, w, s);
}

IntegratorConfig tight(double sample_dt) {
  IntegratorConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-12;
  cfg.sample_dt = sample_dt;
  return cfg;
}

}  // namespace

TEST(ContactHamiltonianField, DampedOscillator) {
  const FieldEval f = contact_hamiltonian_field(kDampedh, one(), cotangent({0.0}, {1.0}, 0.0), kDamped);
  EXPECT_DOUBLE_EQ(f["q"], 1.0);
  EXPECT_DOUBLE_EQ(f["p"], -0.1);
  EXPECT_DOUBLE_EQ(f["s"], 0.5);
}

TEST(ContactHamiltonianField, DampedOscillatorClosedFormAtRandomPoints) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const double q = uniform(rng, -2, 2), p = uniform(rng, -2, 2), s = uniform(rng, -1, 1);
    const FieldEval f = contact_hamiltonian_field(kDampedh, one(), cotangent({q}, {p}, s), kDamped);
    EXPECT_NEAR(f["q"], p, 1e-14);
    EXPECT_NEAR(f["p"], -(q + 0.1 * p), 1e-14);
    EXPECT_NEAR(f["s"], p * p - (0.5 * p * p + 0.5 * q * q + 0.1 * s), 1e-14);
  }
}

TEST(ContactHamiltonianField, ActionFreeHamiltonianReduces) {
  std::mt19937_64 rng(2);
  const Expr h = parse("p^2/2 + 0.5*q^2");
  for (int k = 0; k < 20; ++k) {
    const double q = uniform(rng, -2, 2), p = uniform(rng, -2, 2);
    const FieldEval c = contact_hamiltonian_field(h, one(), cotangent({q}, {p}, 0.3), {});
    PhasePoint sp;
    sp.q = {q};
    sp.p = {p};
    const FieldEval f = symplectic::hamiltonian_field(h, one(), sp, {});
    EXPECT_EQ(c["q"], f["q"]);
    EXPECT_EQ(c["p"], f["p"]);
    EXPECT_NEAR(c["s"], p * p - (0.5 * p * p + 0.5 * q * q), 1e-14);
  }
}

TEST(ContactHamiltonianField, FrictionKepler) {
  const FieldEval f = contact_hamiltonian_field(kFrictionh, polar(), cotangent({1.0, 0.0}, {0.0, 1.0}, 0.0), kFriction);
  EXPECT_NEAR(f["pphi"], -0.1, 1e-15);
  EXPECT_NEAR(f["pr"], 0.0, 1e-15);
}

TEST(ContactHamiltonianField, ModesChangeOnlyTheActionRate) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const PhasePoint pt = random_polar(rng, true);
    const FieldEval h = contact_hamiltonian_field(kFrictionh, polar(), pt, kFriction, FieldMode::hamiltonian);
    const FieldEval g = contact_hamiltonian_field(kFrictionh, polar(), pt, kFriction, FieldMode::gradient);
    const FieldEval e = contact_hamiltonian_field(kFrictionh, polar(), pt, kFriction, FieldMode::evolution);
    for (const char* n : {"r", "phi", "pr", "pphi"}) {
      EXPECT_EQ(h[n], g[n]);
      EXPECT_EQ(h[n], e[n]);
    }
    // p.dh/dp = 2 x kinetic energy for a quadratic kinetic term
    const double kinetic = (pt.p[0] * pt.p[0] + pt.p[1] * pt.p[1] / (pt.q[0] * pt.q[0])) / 2.0;
    EXPECT_NEAR(e["s"], 2.0 * kinetic, 1e-12);
    EXPECT_NEAR(g["s"], 2.0 * kinetic + 0.1, 1e-12);
  }
}

TEST(ContactHamiltonianFieldProperty, DefiningEquationsHoldInEveryMode) {
  std::mt19937_64 rng(4);
  testgen::SmoothGen gen(rng, {"q", "p", "s"});
  for (int k = 0; k < 300; ++k) {
    const Expr h = gen.tree(3);
    const PhasePoint pt = cotangent({uniform(rng, -1, 1)}, {uniform(rng, -1, 1)}, uniform(rng, -1, 1));
    for (FieldMode m : {FieldMode::hamiltonian, FieldMode::gradient, FieldMode::evolution}) {
      EXPECT_LE(defining_equations_residual(h, one(), pt, {}, m), 1e-10) << to_string(h) << " " << to_string(m);
    }
  }
}

TEST(ContactHamiltonianFieldProperty, EtaOfFieldIsMinusH) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint pt = random_polar(rng, true);
    const FieldEval X = contact_hamiltonian_field(kFrictionh, polar(), pt, kFriction);
    const double eta = X["s"] - pt.p[0] * X["r"] - pt.p[1] * X["phi"];
    EXPECT_NEAR(eta, -X.diagnostic("h"), 1e-12);
  }
}

TEST(ContactReeb, AdditiveActionTermGivesPureAction) {
  const FieldEval R = contact_reeb_lagrangian(kDampedL, one(), tangent({0.4}, {-0.3}, 0.2), kDamped);
  EXPECT_EQ(R.components, (Vector{0.0, 0.0, 1.0}));
  EXPECT_DOUBLE_EQ(R.diagnostic("R(E_L)"), 0.1);
}

TEST(ContactReeb, ActionFreeLagrangian) {
  const FieldEval R = contact_reeb_lagrangian(parse("0.5*v^2 - q^2"), one(), tangent({0.4}, {-0.3}, 0.2), {});
  EXPECT_EQ(R.diagnostic("R(E_L)"), 0.0);
}

TEST(ContactReeb, ExponentialWeight) {
  const FieldEval R = contact_reeb_lagrangian(parse("0.5*exp(-s)*v^2"), one(), tangent({0.0}, {1.0}, 0.0), {});
  EXPECT_DOUBLE_EQ(R["v"], 1.0);
  EXPECT_EQ(R["s"], 1.0);
  EXPECT_EQ(R["q"], 0.0);
}

TEST(ContactReebProperty, EnergyIdentityForRandomLagrangians) {
  std::mt19937_64 rng(6);
  testgen::SmoothGen gen(rng, {"q", "v", "s"});
  for (int k = 0; k < 200; ++k) {
    const Expr L = parse("0.5*(2 + sin(s))*v^2") + gen.tree(3);
    const PhasePoint pt = tangent({uniform(rng, -1, 1)}, {uniform(rng, -1, 1)}, uniform(rng, -1, 1));
    FieldEval R;
    try {
      R = contact_reeb_lagrangian(L, one(), pt, {});
    } catch (const SingularLagrangian&) {
      continue;
    }
    const double scale = std::max(1.0, std::fabs(R.diagnostic("-dL/ds")));
    EXPECT_NEAR(R.diagnostic("R(E_L)"), R.diagnostic("-dL/ds"), 1e-10 * scale) << to_string(L);
  }
}

TEST(Herglotz, DampedOscillator) {
  const FieldEval f = herglotz_el_field(kDampedL, one(), tangent({1.0}, {0.0}, 0.0), kDamped);
  EXPECT_EQ(f.components, (Vector{0.0, -1.0, -0.5}));
}

TEST(Herglotz, DampedOscillatorClosedFormAtRandomPoints) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const double q = uniform(rng, -2, 2), v = uniform(rng, -2, 2), s = uniform(rng, -1, 1);
    const FieldEval f = herglotz_el_field(kDampedL, one(), tangent({q}, {v}, s), kDamped);
    EXPECT_NEAR(f["v"], -q - 0.1 * v, 1e-14);
    EXPECT_NEAR(f["s"], 0.5 * v * v - 0.5 * q * q - 0.1 * s, 1e-14);
  }
}

TEST(Herglotz, NoActionReducesToEulerLagrange) {
  std::mt19937_64 rng(8);
  const Params P{{"m", 1.0}, {"K", -1.0}, {"gamma", 0.0}};
  for (int k = 0; k < 50; ++k) {
    const PhasePoint pt = random_polar(rng, false);
    const FieldEval h = herglotz_el_field(kFrictionL, polar(), pt, P);
    PhasePoint s = pt;
    s.s.reset();
    const FieldEval f = symplectic::euler_lagrange_field(kKeplerL, polar(), s, P);
    for (const char* n : {"r", "phi", "vr", "vphi"}) EXPECT_NEAR(h[n], f[n], 1e-12);
    EXPECT_NEAR(h["s"], h.diagnostic("L"), 0.0);
  }
}

TEST(Herglotz, FrictionKepler) {
  const FieldEval f = herglotz_el_field(kFrictionL, polar(), tangent({1.0, 0.0}, {0.0, 1.0}, 0.0), kFriction);
  EXPECT_NEAR(f["vr"], 0.0, 1e-15);
  EXPECT_NEAR(f["vphi"], -0.1, 1e-15);
}

TEST(Equivalence, ContactPairsAtRandomPoints) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint pt = random_polar(rng, false);
    EXPECT_LE(equivalence_residual(kFrictionL, kFrictionh, polar(), pt, kFriction), 1e-10);
    EXPECT_LE(equivalence_residual(kDampedL, kDampedh, one(), tangent({pt.q[1]}, {pt.v[0]}, *pt.s), kDamped), 1e-10);
  }
}

TEST(Dissipation, RateIdentityAtRandomPoints) {
  std::mt19937_64 rng(10);
  for (int k = 0; k < 100; ++k) {
    const PhasePoint c = random_polar(rng, true);
    const PhasePoint t = random_polar(rng, false);
    EXPECT_LE(dissipation_rate_check(kFrictionh, polar(), c, kFriction).residual, 1e-10);
    EXPECT_LE(lagrangian_dissipation_rate_check(kFrictionL, polar(), t, kFriction).residual, 1e-10);
    const PhasePoint d = cotangent({c.q[0]}, {c.p[0]}, *c.s);
    const DissipationCheck dc = dissipation_rate_check(kDampedh, one(), d, kDamped);
    EXPECT_LE(dc.residual, 1e-10);
    const double h = 0.5 * d.p[0] * d.p[0] + 0.5 * d.q[0] * d.q[0] + 0.1 * *d.s;
    EXPECT_NEAR(dc.predicted, -0.1 * h, 1e-14);
  }
}

TEST(Dissipation, ConservativeSystemHasNoRate) {
  const DissipationCheck c =
      dissipation_rate_check(parse("p^2/2 + q^2/2"), one(), cotangent({0.3}, {0.4}, 0.0), {});
  EXPECT_EQ(c.rate_of_change, 0.0);
  EXPECT_EQ(c.predicted, 0.0);
}

TEST(DissipatedQuantity, RotationGivesAngularMomentum) {
  const std::vector<Expr> Y{parse("0"), parse("1"), parse("0"), parse("0"), parse("0")};
  const PhasePoint pt = cotangent({1.3, 0.2}, {0.4, 0.7}, 0.1);
  EXPECT_EQ(dissipated_quantity(Y, polar(), pt, {}), 0.7);
  const PhasePoint tp = tangent({1.3, 0.2}, {0.4, 0.7}, 0.1);
  EXPECT_DOUBLE_EQ(lagrangian_dissipated_quantity(Y, kFrictionL, polar(), tp, kFriction), 1.3 * 1.3 * 0.7);
}

TEST(DissipatedQuantity, ActionDirection) {
  const std::vector<Expr> Y{parse("0"), parse("0"), parse("1")};
  EXPECT_EQ(dissipated_quantity(Y, one(), cotangent({0.3}, {2.0}, 0.5), {}), -1.0);
}

TEST(DissipatedQuantity, WrongComponentCount) {
  EXPECT_THROW(dissipated_quantity({parse("1")}, one(), cotangent({0.3}, {2.0}, 0.5), {}), DimensionError);
}

TEST(Trajectory, DampedOscillatorMatchesUnderdampedSolution) {
  const double g = 0.1, q0 = 1.0, v0 = 0.0, w = std::sqrt(1.0 - g * g / 4.0);
  const Trajectory traj = integrate(lagrangian_flow(kDampedL, one(), kDamped), {q0, v0, 0.0}, 0.0, 10.0, tight(0.1));
  double worst_q = 0.0, worst_e = 0.0;
  const double e0 = 0.5 * v0 * v0 + 0.5 * q0 * q0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    const double q = std::exp(-g * t / 2) * (q0 * std::cos(w * t) + (v0 + g * q0 / 2) / w * std::sin(w * t));
    worst_q = std::max(worst_q, std::fabs(traj.states[k][0] - q));
    // E_L = v dL/dv - L carries the action term
    const double e = 0.5 * traj.states[k][1] * traj.states[k][1] + 0.5 * traj.states[k][0] * traj.states[k][0] +
                     g * traj.states[k][2];
    const double expected = e0 * std::exp(-g * t);
    worst_e = std::max(worst_e, std::fabs(e - expected) / expected);
  }
  EXPECT_LE(worst_q, 1e-5);
  EXPECT_LE(worst_e, 1e-5);
}

TEST(Trajectory, FrictionKeplerAngularMomentumDecays) {
  const Trajectory traj =
      integrate(hamiltonian_flow(kFrictionh, polar(), kFriction), {1.0, 0.0, 0.0, 1.0, 0.0}, 0.0, 10.0, tight(0.1));
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double expected = std::exp(-0.1 * traj.times[k]);
    worst = std::max(worst, std::fabs(traj.states[k][3] - expected) / expected);
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Trajectory, QuotientOfDissipatedQuantitiesIsConserved) {
  const Trajectory traj =
      integrate(hamiltonian_flow(kFrictionh, polar(), kFriction), {1.0, 0.0, 0.0, 1.0, 0.0}, 0.0, 5.0, tight(0.05));
  const VarLayout layout = cotangent_space(polar()).layout();
  const QuotientReport q = conserved_quotient(parse("pphi"), kFrictionh, traj, layout, kFriction);
  EXPECT_LE(q.max_drift, 1e-5);
  EXPECT_DOUBLE_EQ(q.initial, 1.0 / -0.5);

  const QuotientReport same = conserved_quotient(parse("pphi"), parse("pphi"), traj, layout, kFriction);
  for (double v : same.values) EXPECT_EQ(v, 1.0);
}

TEST(Trajectory, QuotientWithConstantIsNotConserved) {
  // -1/h is conserved only when h is; h decays on the damped oscillator
  const Trajectory traj =
      integrate(hamiltonian_flow(kDampedh, one(), kDamped), {1.0, 0.0, 0.0}, 0.0, 5.0, tight(0.1));
  const QuotientReport q = conserved_quotient(parse("-1"), kDampedh, traj, cotangent_space(one()).layout(), kDamped);
  // h(t) = h(0) e^{-gamma t} along the flow
  const double expected = std::fabs(-1.0 / (0.5 * std::exp(-0.5)) + 1.0 / 0.5);
  EXPECT_NEAR(q.max_drift, expected, 1e-6);
}

TEST(Trajectory, QuotientGuardsAgainstZeroDenominator) {
  const Trajectory traj =
      integrate(hamiltonian_flow(kDampedh, one(), kDamped), {1.0, 0.0, 0.0}, 0.0, 1.0, tight(0.1));
  EXPECT_THROW(conserved_quotient(parse("q"), parse("p"), traj, cotangent_space(one()).layout(), kDamped), DomainError);
}

TEST(Trajectory, ZeroDampingReproducesConservativeMotion) {
  const Params P{{"m", 1.0}, {"K", -1.0}, {"gamma", 0.0}};
  const Trajectory c =
      integrate(lagrangian_flow(kFrictionL, polar(), P), {1.0, 0.0, 0.1, 1.1, 0.0}, 0.0, 10.0, tight(0.5));
  const Trajectory s = integrate(symplectic::lagrangian_flow(kKeplerL, polar(), P), {1.0, 0.0, 0.1, 1.1}, 0.0, 10.0,
                                 tight(0.5));
  ASSERT_EQ(c.size(), s.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(c.states[k][i], s.states[k][i], 1e-8);
  }
  const Params D{{"m", 1.0}, {"k", 1.0}, {"gamma", 0.0}};
  const Trajectory d = integrate(hamiltonian_flow(kDampedh, one(), D), {1.0, 0.0, 0.0}, 0.0, 10.0, tight(0.5));
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(d.states[k][0], std::cos(d.times[k]), 1e-8);
}
