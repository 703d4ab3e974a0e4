#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mechkit/io.hpp"
#include "mechkit/system.hpp"

using namespace mechkit;

namespace {

System get(const std::string& id) { return System(registry::get(id)); }

// Registry initial values, perturbed.
std::map<std::string, double> scattered(const System& sys, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::map<std::string, double> out = sys.spec().initial;
  for (auto& [k, v] : out) v += u(rng) * std::max(1.0, std::fabs(v));
  return out;
}

}  // namespace

TEST(System, RepresentationsFollowTheFormalism) {
  const System ho = get("harmonic-oscillator");
  EXPECT_EQ(ho.primary(), Representation::lagrangian);
  EXPECT_TRUE(ho.supports(Representation::hamiltonian));
  EXPECT_TRUE(ho.supports(Representation::unified));
  EXPECT_FALSE(ho.supports(Representation::newton));
  EXPECT_EQ(ho.space(Representation::lagrangian).layout().names(), (std::vector<std::string>{"q", "v"}));
  EXPECT_EQ(ho.space(Representation::unified).layout().names(), (std::vector<std::string>{"q", "v", "p"}));

  const System vm = get("variable-mass-kepler");
  EXPECT_EQ(vm.flavor(), unified::Flavor::extended);
  EXPECT_EQ(vm.space(Representation::hamiltonian).layout().names(),
            (std::vector<std::string>{"t", "r", "phi", "pr", "pphi"}));

  const System kf = get("kepler-friction");
  EXPECT_EQ(kf.flavor(), unified::Flavor::contact);
  EXPECT_EQ(kf.space(Representation::lagrangian).layout().names(),
            (std::vector<std::string>{"r", "phi", "vr", "vphi", "s"}));

  const System sg = get("sphere-geodesic");
  EXPECT_EQ(sg.primary(), Representation::newton);
  EXPECT_FALSE(sg.supports(Representation::lagrangian));
  EXPECT_THROW(sg.space(Representation::hamiltonian), ValidationError);
  EXPECT_THROW(ho.metric(), ValidationError);
}

TEST(System, ParameterOverrides) {
  const System sys(registry::get("harmonic-oscillator"), {{"k", 4.0}});
  PhasePoint pt;
  pt.q = {1.0};
  pt.v = {0.0};
  EXPECT_EQ(sys.field(Representation::lagrangian, pt)["v"], -4.0);
  EXPECT_THROW(System(registry::get("harmonic-oscillator"), {{"gamma", 1.0}}), ValidationError);
}

TEST(System, PointsFromNamedValues) {
  const System sys(registry::get("harmonic-oscillator"), {{"m", 2.0}});
  // velocities are carried to momenta by the Legendre map
  const PhasePoint h = sys.point(Representation::hamiltonian, {{"q", 0.5}, {"v", 1.5}});
  EXPECT_EQ(h.p, (Vector{3.0}));
  // momenta given directly are taken as they are
  EXPECT_EQ(sys.point(Representation::hamiltonian, {{"q", 0.5}, {"p", 1.0}}).p, (Vector{1.0}));
  // the unified point is lifted onto the constraint
  const PhasePoint u = sys.point(Representation::unified, {{"q", 0.5}, {"v", 1.5}});
  EXPECT_EQ(u.p, (Vector{3.0}));

  try {
    sys.point(Representation::lagrangian, {{"q", 0.5}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'v'"), std::string::npos);
  }
  EXPECT_THROW(sys.point(Representation::hamiltonian, {{"q", 0.5}}), ValidationError);
}

TEST(System, InitialPointsOfEveryRepresentation) {
  for (const SystemSpec& spec : registry::builtin()) {
    const System sys(spec);
    for (auto r : {Representation::lagrangian, Representation::hamiltonian, Representation::unified,
                   Representation::newton}) {
      if (!sys.supports(r)) continue;
      const PhasePoint pt = sys.initial(r);
      const PhaseSpace sp = sys.space(r);
      EXPECT_EQ(sp.pack(pt).size(), sp.dim()) << spec.id << ' ' << to_string(r);
      EXPECT_EQ(sys.field(r, pt).components.size(), sp.dim()) << spec.id << ' ' << to_string(r);
    }
  }
}

// The representations of one system describe the same motion: the base
// velocities agree wherever both are defined.
TEST(System, RepresentationsAgreeOnTheBaseVelocity) {
  std::mt19937_64 rng(21);
  for (const SystemSpec& spec : registry::builtin()) {
    const System sys(spec);
    if (sys.is_riemann() || !sys.has_hamiltonian()) continue;
    for (int k = 0; k < 20; ++k) {
      const auto values = scattered(sys, rng);
      const FieldEval l = sys.field(Representation::lagrangian, sys.point(Representation::lagrangian, values));
      const FieldEval h = sys.field(Representation::hamiltonian, sys.point(Representation::hamiltonian, values));
      const FieldEval u = sys.field(Representation::unified, sys.point(Representation::unified, values));
      for (const auto& q : sys.chart().coordinates) {
        EXPECT_NEAR(l[q], h[q], 1e-10) << spec.id;
        EXPECT_NEAR(l[q], u[q], 1e-10) << spec.id;
      }
    }
  }
}

TEST(System, PolarKeplerNewtonMatchesItsLagrangian) {
  const System sys = get("polar-kepler");
  std::mt19937_64 rng(22);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint pt = sys.point(Representation::newton, scattered(sys, rng));
    const FieldEval n = sys.field(Representation::newton, pt);
    const FieldEval l = symplectic::euler_lagrange_field(sys.lagrangian(), sys.chart(), pt, sys.params());
    EXPECT_NEAR(n["vr"], l["vr"], 1e-10);
    EXPECT_NEAR(n["vphi"], l["vphi"], 1e-10);
  }
}

// Each declared symmetry is an exact Noether symmetry whose quantity is the
// declared one.
TEST(System, DeclaredSymmetriesHold) {
  std::mt19937_64 rng(23);
  int checked = 0;
  for (const SystemSpec& spec : registry::builtin()) {
    const System sys(spec);
    for (const SymmetrySpec& y : spec.symmetries) {
      ++checked;
      const PhaseSpace ts = unified::tangent_space(sys.chart(), sys.flavor());
      std::vector<Vector> pts;
      for (int k = 0; k < 10; ++k) pts.push_back(ts.pack(sys.point(Representation::lagrangian, scattered(sys, rng))));
      const auto r = symmetry::noether_check(sys.generator(y), sys.lagrangian(), sys.chart(), sys.flavor(), pts,
                                             sys.params());
      EXPECT_LE(r.max_residual(), 1e-10) << spec.id << ' ' << y.name;
      const Expr f = parse(y.quantity);
      for (std::size_t k = 0; k < pts.size(); ++k) {
        EXPECT_NEAR(r.quantity[k], eval(f, ts.layout(), pts[k], sys.params()), 1e-12) << spec.id;
      }
    }
  }
  EXPECT_GE(checked, 4);
}

// Each declared quantity behaves as declared over t in [0, 10].
TEST(System, DeclaredQuantitiesBehave) {
  for (const SystemSpec& spec : registry::builtin()) {
    const System sys(spec);
    const Representation r = sys.primary();
    IntegratorConfig cfg;
    cfg.sample_dt = 0.1;
    const PhasePoint start = sys.initial(r);
    const double t0 = start.t.value_or(0.0);
    const Trajectory traj = sys.simulate(r, start, t0, t0 + 10.0, cfg);
    for (const QuantitySpec& q : spec.quantities) {
      symmetry::MonitorMode mode = symmetry::Conserve{};
      if (q.behavior == QuantitySpec::Behavior::decay) mode = symmetry::Decay{parse(q.rate)};
      const auto rep = symmetry::monitor(traj, parse(q.expression), sys.params(), mode);
      const double dev = q.behavior == QuantitySpec::Behavior::decay ? rep.relative_deviation : rep.max_deviation;
      EXPECT_LE(dev, q.tolerance) << spec.id << ' ' << q.name;
      // the attached monitor channel agrees with the report
      const Vector& channel = traj.monitor(q.name);
      for (std::size_t k = 0; k < traj.size(); ++k) EXPECT_NEAR(channel[k], rep.values[k], 1e-14);
    }
  }
}

TEST(System, SimulateRecordsNamesAndId) {
  const System sys = get("forced-oscillator");
  IntegratorConfig cfg;
  cfg.sample_dt = 0.5;
  const Trajectory traj = sys.simulate(Representation::lagrangian, sys.initial(Representation::lagrangian), 0.0, 2.0, cfg);
  EXPECT_EQ(traj.system_id, "forced-oscillator");
  EXPECT_EQ(traj.state_names, (std::vector<std::string>{"t", "q", "v"}));
  // the time coordinate rides along with the sample times
  for (std::size_t k = 0; k < traj.size(); ++k) EXPECT_NEAR(traj.states[k][0], traj.times[k], 1e-12);
}

TEST(Io, TrajectoryCsv) {
  const System sys = get("forced-oscillator");
  IntegratorConfig cfg;
  cfg.sample_dt = 0.5;
  const Trajectory traj = sys.simulate(Representation::lagrangian, sys.initial(Representation::lagrangian), 0.0, 1.0, cfg,
                                       {time_monitor("clock")});
  const std::string csv = io::trajectory_csv(traj);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,q,v,clock");
  std::getline(in, line);
  EXPECT_EQ(line, "0,1,0,0");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 4), "0.5,");
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
  // 17 significant digits survive a round trip exactly
  const double q = std::stod(line.substr(4, line.find(',', 4) - 4));
  EXPECT_EQ(q, traj.states[1][1]);
}

TEST(Io, TrajectoryJson) {
  const System sys = get("harmonic-oscillator");
  IntegratorConfig cfg;
  cfg.sample_dt = 0.5;
  const Trajectory traj = sys.simulate(Representation::lagrangian, sys.initial(Representation::lagrangian), 0.0, 1.0, cfg);
  const auto j = io::trajectory_json(traj);
  EXPECT_EQ(j["system"], "harmonic-oscillator");
  EXPECT_EQ(j["columns"], io::json::array({"t", "q", "v", "energy"}));
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["rows"][2][0], 1.0);
  EXPECT_EQ(j["config"]["method"], "dopri5");
}
