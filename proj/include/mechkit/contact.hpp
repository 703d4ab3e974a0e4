#pragma once

// Dissipative mechanics on T*Q x R and TQ x R with the contact form
// ds - p dq. The extra coordinate s is the action; the Reeb field in
// Darboux coordinates is d/ds, so R(f) = df/ds.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mechkit/cosymplectic.hpp"  // FieldMode
#include "mechkit/integrate.hpp"
#include "mechkit/jet.hpp"
#include "mechkit/phase.hpp"

namespace mechkit::contact {

inline PhaseSpace cotangent_space(const Chart& c) { return PhaseSpace(c, Side::cotangent, false, true); }
inline PhaseSpace tangent_space(const Chart& c) { return PhaseSpace(c, Side::tangent, false, true); }

//   dq/dt = dh/dp
//   dp/dt = -(dh/dq + p dh/ds)
//   ds/dt = p dh/dp - h        (hamiltonian)
//         = p dh/dp + dh/ds    (gradient)
//         = p dh/dp            (evolution)
inline FieldEval contact_hamiltonian_field(const Expr& h, const Chart& chart, const PhasePoint& pt,
                                           const Params& params, FieldMode mode = FieldMode::hamiltonian) {
  const PhaseSpace sp = cotangent_space(chart);
  const Jet jet(h, sp, pt, params);
  const double hs = jet.ds();
  Vector x(sp.dim());
  double pdh = 0.0;
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.dp(i);
    x[sp.p_index(i)] = -(jet.dq(i) + jet.p(i) * hs);
    pdh += jet.p(i) * jet.dp(i);
  }
  switch (mode) {
    case FieldMode::hamiltonian: x[sp.s_index()] = pdh - jet.value(); break;
    case FieldMode::gradient: x[sp.s_index()] = pdh + hs; break;
    case FieldMode::evolution: x[sp.s_index()] = pdh; break;
  }
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["h"] = jet.value();
  out.diagnostics["R(h)"] = hs;
  return out;
}

// Residuals of the defining equations of the three fields, in Darboux
// coordinates: eta(X) against -h, R(h) or 0, and i(X) d(eta) against
// dh - R(h) eta, component by component.
inline double defining_equations_residual(const Expr& h, const Chart& chart, const PhasePoint& pt,
                                          const Params& params, FieldMode mode) {
  const PhaseSpace sp = cotangent_space(chart);
  const FieldEval X = contact_hamiltonian_field(h, chart, pt, params, mode);
  const Jet jet(h, sp, pt, params);
  const double hs = jet.ds();
  double eta_x = X.components[sp.s_index()];
  for (std::size_t i = 0; i < sp.dof(); ++i) eta_x -= jet.p(i) * X.components[sp.q_index(i)];
  const double want = mode == FieldMode::hamiltonian ? -jet.value() : mode == FieldMode::gradient ? hs : 0.0;
  double r = std::fabs(eta_x - want);
  // d(eta) = dq ^ dp, so i(X) d(eta) = X^q dp - X^p dq
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    r = std::max(r, std::fabs(-X.components[sp.p_index(i)] - (jet.dq(i) + jet.p(i) * hs)));
    r = std::max(r, std::fabs(X.components[sp.q_index(i)] - jet.dp(i)));
  }
  return r;
}

// R_L = d/ds - W^-1 (d2L/ds dv) d/dv. Reports R_L(E_L), which should equal -dL/ds.
inline FieldEval contact_reeb_lagrangian(const Expr& L, const Chart& chart, const PhasePoint& pt,
                                         const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const std::size_t n = sp.dof();
  Vector rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = -jet.dv_dslot(i, sp.s_index());
  const Vector r = solve_velocity_hessian(jet.velocity_hessian(), rhs, pt);
  Vector x(sp.dim(), 0.0);
  x[sp.s_index()] = 1.0;
  for (std::size_t i = 0; i < n; ++i) x[sp.v_index(i)] = r[i];
  FieldEval out = make_field(sp, x);
  out.diagnostics["R(E_L)"] = dot(lagrangian_energy_gradient(jet), x);
  out.diagnostics["-dL/ds"] = -jet.ds();
  return out;
}

// dq/dt = v, ds/dt = L,
// W dv/dt = dL/dq - (d2L/dq dv) v - L d2L/ds dv + dL/ds dL/dv
inline FieldEval herglotz_el_field(const Expr& L, const Chart& chart, const PhasePoint& pt, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const Vector a = lagrangian_accelerations(jet, pt);
  Vector x(sp.dim());
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.v(i);
    x[sp.v_index(i)] = a[i];
  }
  x[sp.s_index()] = jet.value();
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["E_L"] = lagrangian_energy(jet);
  out.diagnostics["L"] = jet.value();
  return out;
}

// |D(FL) X_L - X_h o FL|_inf at a point of TQ x R.
inline double equivalence_residual(const Expr& L, const Expr& h, const Chart& chart, const PhasePoint& pt,
                                   const Params& params) {
  const Jet jet(L, tangent_space(chart), pt, params);
  const Vector pushed = legendre_pushforward(jet, herglotz_el_field(L, chart, pt, params).components);
  const FieldEval xh = contact_hamiltonian_field(h, chart, legendre_image(jet, pt), params);
  double r = 0.0;
  for (std::size_t i = 0; i < pushed.size(); ++i) r = std::max(r, std::fabs(pushed[i] - xh.components[i]));
  return r;
}

struct DissipationCheck {
  double rate_of_change = 0.0;  // <dh, X_h>
  double predicted = 0.0;       // -R(h) h
  double residual = 0.0;
};

// Energy dissipation on the Hamiltonian side: X_h(h) = -R(h) h.
inline DissipationCheck dissipation_rate_check(const Expr& h, const Chart& chart, const PhasePoint& pt,
                                               const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  const Jet jet(h, sp, pt, params);
  const FieldEval X = contact_hamiltonian_field(h, chart, pt, params);
  DissipationCheck c;
  c.rate_of_change = dot(jet.gradient(), X.components);
  c.predicted = -jet.ds() * jet.value();
  c.residual = std::fabs(c.rate_of_change - c.predicted);
  return c;
}

// Lagrangian side: X_L(E_L) = -R_L(E_L) E_L.
inline DissipationCheck lagrangian_dissipation_rate_check(const Expr& L, const Chart& chart, const PhasePoint& pt,
                                                          const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const FieldEval X = herglotz_el_field(L, chart, pt, params);
  const FieldEval R = contact_reeb_lagrangian(L, chart, pt, params);
  DissipationCheck c;
  c.rate_of_change = dot(lagrangian_energy_gradient(jet), X.components);
  c.predicted = -R.diagnostic("R(E_L)") * lagrangian_energy(jet);
  c.residual = std::fabs(c.rate_of_change - c.predicted);
  return c;
}

// F = -i(Y) eta = -(Y^s - p . Y^q) for a generator given componentwise over
// the layout of T*Q x R.
inline double dissipated_quantity(const std::vector<Expr>& Y, const Chart& chart, const PhasePoint& pt,
                                  const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  if (Y.size() != sp.dim()) throw DimensionError("generator needs one component per phase coordinate");
  const Vector x = sp.pack(pt);
  double eta = eval(Y[sp.s_index()], sp.layout(), x, params);
  for (std::size_t i = 0; i < sp.dof(); ++i) eta -= pt.p[i] * eval(Y[sp.q_index(i)], sp.layout(), x, params);
  return -eta;
}

// Lagrangian side, with eta_L = ds - (dL/dv) dq and Y over TQ x R.
inline double lagrangian_dissipated_quantity(const std::vector<Expr>& Y, const Expr& L, const Chart& chart,
                                             const PhasePoint& pt, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  if (Y.size() != sp.dim()) throw DimensionError("generator needs one component per phase coordinate");
  const Jet jet(L, sp, pt, params);
  const Vector& x = jet.state();
  double eta = eval(Y[sp.s_index()], sp.layout(), x, params);
  for (std::size_t i = 0; i < sp.dof(); ++i) eta -= jet.dv(i) * eval(Y[sp.q_index(i)], sp.layout(), x, params);
  return -eta;
}

struct QuotientReport {
  double initial = 0.0;
  double max_drift = 0.0;  // max |F1/F2 - initial|
  Vector values;
};

// Drift of F1/F2 along a trajectory. The quotient of two dissipated
// quantities is conserved.
inline QuotientReport conserved_quotient(const Expr& F1, const Expr& F2, const Trajectory& traj,
                                         const VarLayout& layout, const Params& params, double zero_guard = 1e-9) {
  QuotientReport r;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double den = eval(F2, layout, traj.states[k], params);
    if (std::fabs(den) < zero_guard) {
      throw DomainError("denominator of the quotient vanishes at t=" + std::to_string(traj.times[k]));
    }
    r.values.push_back(eval(F1, layout, traj.states[k], params) / den);
  }
  if (r.values.empty()) return r;
  r.initial = r.values.front();
  for (double v : r.values) r.max_drift = std::max(r.max_drift, std::fabs(v - r.initial));
  return r;
}

inline FieldFn lagrangian_flow(const Expr& L, const Chart& chart, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  return [L, chart, sp, params](double, std::span<const double> x) {
    return herglotz_el_field(L, chart, sp.unpack(x), params).components;
  };
}

inline FieldFn hamiltonian_flow(const Expr& h, const Chart& chart, const Params& params,
                                FieldMode mode = FieldMode::hamiltonian) {
  const PhaseSpace sp = cotangent_space(chart);
  return [h, chart, sp, params, mode](double, std::span<const double> x) {
    return contact_hamiltonian_field(h, chart, sp.unpack(x), params, mode).components;
  };
}

}  // namespace mechkit::contact
