#pragma once

// Time-dependent mechanics on R x T*Q and R x TQ. Time is an ordinary
// coordinate of the phase space; the field constructors fix its rate.

#include <algorithm>
#include <cmath>
#include <string>

#include "mechkit/integrate.hpp"
#include "mechkit/jet.hpp"
#include "mechkit/phase.hpp"

namespace mechkit {

// Which of the three dynamical fields of a Hamiltonian h is wanted. They
// share the q and p components and differ in the time (or action) rate.
enum class FieldMode { hamiltonian, gradient, evolution };

inline const char* to_string(FieldMode m) {
  switch (m) {
    case FieldMode::hamiltonian: return "hamiltonian";
    case FieldMode::gradient: return "gradient";
    case FieldMode::evolution: return "evolution";
  }
  return "?";
}

}  // namespace mechkit

namespace mechkit::cosymplectic {

inline PhaseSpace cotangent_space(const Chart& c) { return PhaseSpace(c, Side::cotangent, true, false); }
inline PhaseSpace tangent_space(const Chart& c) { return PhaseSpace(c, Side::tangent, true, false); }

// dq/dt = dh/dp, dp/dt = -dh/dq; the t-rate is 0, dh/dt or 1 by mode.
inline FieldEval evolution_field(const Expr& h, const Chart& chart, const PhasePoint& pt, const Params& params,
                                 FieldMode mode = FieldMode::evolution) {
  const PhaseSpace sp = cotangent_space(chart);
  const Jet jet(h, sp, pt, params);
  Vector x(sp.dim());
  switch (mode) {
    case FieldMode::hamiltonian: x[sp.t_index()] = 0.0; break;
    case FieldMode::gradient: x[sp.t_index()] = jet.dt(); break;
    case FieldMode::evolution: x[sp.t_index()] = 1.0; break;
  }
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.dp(i);
    x[sp.p_index(i)] = -jet.dq(i);
  }
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["h"] = jet.value();
  out.diagnostics["dh/dt"] = jet.dt();
  return out;
}

// R_L = d/dt + R^i d/dv^i with W R = -d2L/dt dv. Reports R_L(E_L), which
// should equal -dL/dt.
inline FieldEval lagrangian_reeb(const Expr& L, const Chart& chart, const PhasePoint& pt, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const std::size_t n = sp.dof();
  Vector rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = -jet.dv_dslot(i, sp.t_index());
  const Vector r = solve_velocity_hessian(jet.velocity_hessian(), rhs, pt);
  Vector x(sp.dim(), 0.0);
  x[sp.t_index()] = 1.0;
  for (std::size_t i = 0; i < n; ++i) x[sp.v_index(i)] = r[i];
  const Vector dE = lagrangian_energy_gradient(jet);
  FieldEval out = make_field(sp, x);
  out.diagnostics["R(E_L)"] = dot(dE, x);
  out.diagnostics["-dL/dt"] = -jet.dt();
  return out;
}

// dt/dt = 1, dq/dt = v, W dv/dt = dL/dq - (d2L/dq dv) v - d2L/dt dv
inline FieldEval nonautonomous_el_field(const Expr& L, const Chart& chart, const PhasePoint& pt,
                                        const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const Vector a = lagrangian_accelerations(jet, pt);
  Vector x(sp.dim());
  x[sp.t_index()] = 1.0;
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.v(i);
    x[sp.v_index(i)] = a[i];
  }
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["E_L"] = lagrangian_energy(jet);
  out.diagnostics["dL/dt"] = jet.dt();
  return out;
}

// |D(FL) Gamma_L - E_h o FL|_inf at a point of R x TQ.
inline double equivalence_residual(const Expr& L, const Expr& h, const Chart& chart, const PhasePoint& pt,
                                   const Params& params) {
  const Jet jet(L, tangent_space(chart), pt, params);
  const Vector pushed = legendre_pushforward(jet, nonautonomous_el_field(L, chart, pt, params).components);
  const FieldEval eh = evolution_field(h, chart, legendre_image(jet, pt), params);
  double r = 0.0;
  for (std::size_t i = 0; i < pushed.size(); ++i) r = std::max(r, std::fabs(pushed[i] - eh.components[i]));
  return r;
}

inline FieldFn lagrangian_flow(const Expr& L, const Chart& chart, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  return [L, chart, sp, params](double, std::span<const double> x) {
    return nonautonomous_el_field(L, chart, sp.unpack(x), params).components;
  };
}

inline FieldFn hamiltonian_flow(const Expr& h, const Chart& chart, const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  return [h, chart, sp, params](double, std::span<const double> x) {
    return evolution_field(h, chart, sp.unpack(x), params).components;
  };
}

struct EnergyBalance {
  double max_defect = 0.0;  // max |E_L(t) - E_L(0) + int_0^t dL/dt|
  Vector energy;
  Vector work;  // int_0^t -dL/dt
};

// Non-conservation of the Lagrangian energy along a trajectory on R x TQ:
// dE_L/dt = -dL/dt. The integral of the right side uses the stored rates for
// a fourth-order quadrature.
inline EnergyBalance energy_balance(const Trajectory& traj, const Expr& L, const Chart& chart, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  EnergyBalance out;
  Vector rate, slope;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Jet jet(L, sp, sp.unpack(traj.states[k]), params);
    out.energy.push_back(lagrangian_energy(jet));
    rate.push_back(-jet.dt());
    double s = 0.0;
    for (std::size_t b = 0; b < sp.dim(); ++b) s -= jet.dd(sp.t_index(), b) * traj.rates[k][b];
    slope.push_back(s);
  }
  out.work = cumulative_integral(traj.times, rate, slope);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out.max_defect = std::max(out.max_defect, std::fabs(out.energy[k] - out.energy[0] - out.work[k]));
  }
  return out;
}

}  // namespace mechkit::cosymplectic
