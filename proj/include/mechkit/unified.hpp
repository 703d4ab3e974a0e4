#pragma once

// Skinner-Rusk unified formalism on the Whitney sum TQ x T*Q, optionally
// extended by time (R x TQ x T*Q) or by the action (TQ x T*Q x R).
//
// Points carry q, v and p independently. The first constraint surface is the
// graph of the Legendre map, p = dL/dv; tangency of the dynamics to it fixes
// the accelerations.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "mechkit/contact.hpp"
#include "mechkit/cosymplectic.hpp"
#include "mechkit/integrate.hpp"
#include "mechkit/jet.hpp"
#include "mechkit/phase.hpp"
#include "mechkit/symplectic.hpp"

namespace mechkit::unified {

enum class Flavor { autonomous, extended, contact };

inline const char* to_string(Flavor f) {
  switch (f) {
    case Flavor::autonomous: return "autonomous";
    case Flavor::extended: return "extended";
    case Flavor::contact: return "contact";
  }
  return "?";
}

// Default distance from the constraint surface accepted as "on" it.
inline constexpr double kConstraintTolerance = 1e-9;

inline PhaseSpace unified_space(const Chart& c, Flavor f) {
  return PhaseSpace(c, Side::unified, f == Flavor::extended, f == Flavor::contact);
}
inline PhaseSpace tangent_space(const Chart& c, Flavor f) {
  return PhaseSpace(c, Side::tangent, f == Flavor::extended, f == Flavor::contact);
}
inline PhaseSpace cotangent_space(const Chart& c, Flavor f) {
  return PhaseSpace(c, Side::cotangent, f == Flavor::extended, f == Flavor::contact);
}

// C = <v | p> = v^i p_i
inline double coupling(const PhasePoint& pt) {
  if (pt.v.size() != pt.p.size()) throw DimensionError("velocity and momentum counts differ");
  return dot(pt.v, pt.p);
}

// The Lagrangian depends on the velocity-space part of the point only.
inline Jet lagrangian_jet(const Expr& L, const Chart& chart, const PhasePoint& pt, Flavor f, const Params& params) {
  PhasePoint tp = pt;
  tp.p.clear();
  return Jet(L, tangent_space(chart, f), tp, params);
}

// H = C - L
inline double unified_hamiltonian(const Expr& L, const Chart& chart, const PhasePoint& pt, Flavor f,
                                  const Params& params) {
  unified_space(chart, f).check(pt);
  PhasePoint tp = pt;
  tp.p.clear();
  const PhaseSpace ts = tangent_space(chart, f);
  return coupling(pt) - eval(L, ts.layout(), ts.pack(tp), params);
}

// p - dL/dv, zero exactly on the graph of the Legendre map.
inline Vector constraint_residuals(const Expr& L, const Chart& chart, const PhasePoint& pt, Flavor f,
                                   const Params& params) {
  unified_space(chart, f).check(pt);
  const Jet jet = lagrangian_jet(L, chart, pt, f, params);
  Vector r(chart.dof());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = pt.p[i] - jet.dv(i);
  return r;
}

struct Tangency {
  Vector accelerations;  // F^i, the v-components of the unified field
  FieldEval field;       // full field on the unified space
};

// Solve the tangency condition on the constraint surface:
//   W F = dL/dq - (d2L/dq dv) v [- d2L/dt dv] [- L d2L/ds dv + p dL/ds]
// and assemble dq = v, dv = F, dp = dL/dq [+ p dL/ds], dt = 1, ds = L.
inline Tangency tangency_solve(const Expr& L, const Chart& chart, const PhasePoint& pt, Flavor f,
                               const Params& params, double tolerance = kConstraintTolerance) {
  const PhaseSpace us = unified_space(chart, f);
  us.check(pt);
  const Jet jet = lagrangian_jet(L, chart, pt, f, params);
  const PhaseSpace& ts = jet.space();
  const std::size_t n = chart.dof();

  double off = 0.0;
  for (std::size_t i = 0; i < n; ++i) off = std::max(off, std::fabs(pt.p[i] - jet.dv(i)));
  if (off > tolerance) {
    throw OffConstraint("point " + describe(pt) + " is off the constraint surface p = dL/dv (residual " +
                        std::to_string(off) + ")");
  }

  Vector rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double b = jet.dq(i);
    for (std::size_t j = 0; j < n; ++j) b -= jet.dv_dslot(i, ts.q_index(j)) * jet.v(j);
    if (f == Flavor::extended) b -= jet.dv_dslot(i, ts.t_index());
    if (f == Flavor::contact) b += -jet.value() * jet.dv_dslot(i, ts.s_index()) + pt.p[i] * jet.ds();
    rhs[i] = b;
  }
  Tangency out;
  try {
    out.accelerations = LU(jet.velocity_hessian()).solve(rhs);
  } catch (const SingularMatrix& e) {
    // A singular Lagrangian would need secondary constraints; the algorithm
    // is not iterated past this first level.
    throw SingularLagrangian(describe(pt) + "; tangency leaves the accelerations undetermined and the constraint "
                                            "algorithm would continue with secondary constraints",
                             e.pivot());
  }

  Vector x(us.dim());
  if (f == Flavor::extended) x[us.t_index()] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[us.q_index(i)] = pt.v[i];
    x[us.v_index(i)] = out.accelerations[i];
    x[us.p_index(i)] = jet.dq(i) + (f == Flavor::contact ? pt.p[i] * jet.ds() : 0.0);
  }
  if (f == Flavor::contact) x[us.s_index()] = jet.value();
  out.field = make_field(us, std::move(x));
  out.field.diagnostics["H"] = coupling(pt) - jet.value();
  out.field.diagnostics["constraint_residual"] = off;
  return out;
}

// Lift a velocity-space point to the constraint surface.
inline PhasePoint lift_to_constraint(const Expr& L, const Chart& chart, const PhasePoint& tangent_pt, Flavor f,
                                     const Params& params) {
  const Jet jet(L, tangent_space(chart, f), tangent_pt, params);
  PhasePoint pt = tangent_pt;
  pt.p.resize(chart.dof());
  for (std::size_t i = 0; i < chart.dof(); ++i) pt.p[i] = jet.dv(i);
  return pt;
}

struct ProjectionReport {
  double lagrangian = 0.0;   // vs the Euler-Lagrange (or Herglotz) field at (t, q, v, s)
  double hamiltonian = 0.0;  // vs the Hamiltonian field of h at (t, q, p, s)
};

// Project the unified field onto each factor and compare with the fields
// computed independently there.
inline ProjectionReport projection_check(const Expr& L, const Expr& h, const Chart& chart, const PhasePoint& pt,
                                         Flavor f, const Params& params, double tolerance = kConstraintTolerance) {
  const Tangency tg = tangency_solve(L, chart, pt, f, params, tolerance);
  const PhaseSpace ts = tangent_space(chart, f);
  const PhaseSpace cs = cotangent_space(chart, f);

  PhasePoint tp = pt;
  tp.p.clear();
  PhasePoint cp = pt;
  cp.v.clear();

  FieldEval xl, xh;
  switch (f) {
    case Flavor::autonomous:
      xl = symplectic::euler_lagrange_field(L, chart, tp, params);
      xh = symplectic::hamiltonian_field(h, chart, cp, params);
      break;
    case Flavor::extended:
      xl = cosymplectic::nonautonomous_el_field(L, chart, tp, params);
      xh = cosymplectic::evolution_field(h, chart, cp, params);
      break;
    case Flavor::contact:
      xl = contact::herglotz_el_field(L, chart, tp, params);
      xh = contact::contact_hamiltonian_field(h, chart, cp, params);
      break;
  }

  ProjectionReport r;
  for (std::size_t k = 0; k < ts.dim(); ++k) {
    const double u = tg.field[ts.layout().name(k)];
    r.lagrangian = std::max(r.lagrangian, std::fabs(u - xl.components[k]));
  }
  for (std::size_t k = 0; k < cs.dim(); ++k) {
    const double u = tg.field[cs.layout().name(k)];
    r.hamiltonian = std::max(r.hamiltonian, std::fabs(u - xh.components[k]));
  }
  return r;
}

// The unified field as an integrable vector field. Integration drifts off the
// constraint surface at the level of the integrator error, so the on-surface
// check uses a loose tolerance here and the drift is reported by a monitor.
inline FieldFn unified_flow(const Expr& L, const Chart& chart, Flavor f, const Params& params,
                            double tolerance = 1e-3) {
  const PhaseSpace us = unified_space(chart, f);
  return [L, chart, us, f, params, tolerance](double, std::span<const double> x) {
    return tangency_solve(L, chart, us.unpack(x), f, params, tolerance).field.components;
  };
}

// max_i |p_i - dL/dv^i| as a trajectory monitor.
inline Monitor constraint_monitor(const Expr& L, const Chart& chart, Flavor f, const Params& params,
                                  std::string name = "constraint_residual") {
  const PhaseSpace us = unified_space(chart, f);
  return attach_monitor(std::move(name), [L, chart, us, f, params](double, std::span<const double> x) {
    return norm_inf(constraint_residuals(L, chart, us.unpack(x), f, params));
  });
}

}  // namespace mechkit::unified
