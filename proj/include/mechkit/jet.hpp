#pragma once

// Second-order jets of Lagrangians and Hamiltonians at a phase point: one
// hyper-dual pass over every phase variable, then indexed views of the
// partial derivatives the field formulas need.

#include <string>

#include "mechkit/autodiff.hpp"
#include "mechkit/phase.hpp"

namespace mechkit {

class Jet {
 public:
  Jet(const Expr& f, const PhaseSpace& space, const PhasePoint& pt, const Params& params)
      : space_(space), state_(space.pack(pt)) {
    HyperDual r = eval_hyperdual(f, space.layout(), state_, params);
    value_ = r.value();
    grad_ = r.gradient();
    hess_ = r.hessian();
  }

  const PhaseSpace& space() const noexcept { return space_; }
  const Vector& state() const noexcept { return state_; }
  std::size_t n() const noexcept { return space_.dof(); }

  double value() const noexcept { return value_; }
  const Vector& gradient() const noexcept { return grad_; }
  const Matrix& hessian() const noexcept { return hess_; }

  double d(std::size_t slot) const { return grad_[slot]; }
  double dd(std::size_t a, std::size_t b) const { return hess_(a, b); }

  double dq(std::size_t i) const { return grad_[space_.q_index(i)]; }
  double dv(std::size_t i) const { return grad_[space_.v_index(i)]; }
  double dp(std::size_t i) const { return grad_[space_.p_index(i)]; }
  double dt() const { return grad_[space_.t_index()]; }
  double ds() const { return grad_[space_.s_index()]; }

  double q(std::size_t i) const { return state_[space_.q_index(i)]; }
  double v(std::size_t i) const { return state_[space_.v_index(i)]; }
  double p(std::size_t i) const { return state_[space_.p_index(i)]; }

  // W_ij = d2f / dv^i dv^j
  Matrix velocity_hessian() const {
    Matrix w(n(), n());
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = 0; j < n(); ++j) w(i, j) = hess_(space_.v_index(i), space_.v_index(j));
    }
    return w;
  }

  // d2f / dx dv^i for an arbitrary slot x.
  double dv_dslot(std::size_t i, std::size_t slot) const { return hess_(space_.v_index(i), slot); }

 private:
  PhaseSpace space_;
  Vector state_;
  double value_ = 0.0;
  Vector grad_;
  Matrix hess_;
};

// Solve W x = b, reporting a singular velocity Hessian as a singular Lagrangian.
inline Vector solve_velocity_hessian(const Matrix& w, const Vector& b, const PhasePoint& pt) {
  try {
    return LU(w).solve(b);
  } catch (const SingularMatrix& e) {
    throw SingularLagrangian(describe(pt), e.pivot());
  }
}

// Accelerations of the second-order field of a regular Lagrangian on
// [R x] TQ [x R]:
//   W a = dL/dq - (d2L/dq dv) v - [d2L/dt dv] - [L d2L/ds dv - dL/ds dL/dv]
// covering the autonomous, time-dependent and Herglotz cases.
inline Vector lagrangian_accelerations(const Jet& jet, const PhasePoint& pt) {
  const PhaseSpace& sp = jet.space();
  const std::size_t n = jet.n();
  Vector rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double b = jet.dq(i);
    for (std::size_t j = 0; j < n; ++j) b -= jet.dv_dslot(i, sp.q_index(j)) * jet.v(j);
    if (sp.has_time()) b -= jet.dv_dslot(i, sp.t_index());
    if (sp.has_action()) b += -jet.value() * jet.dv_dslot(i, sp.s_index()) + jet.ds() * jet.dv(i);
    rhs[i] = b;
  }
  return solve_velocity_hessian(jet.velocity_hessian(), rhs, pt);
}

// E_L = v . dL/dv - L
inline double lagrangian_energy(const Jet& jet) {
  double e = -jet.value();
  for (std::size_t i = 0; i < jet.n(); ++i) e += jet.v(i) * jet.dv(i);
  return e;
}

// dE_L along every phase slot.
inline Vector lagrangian_energy_gradient(const Jet& jet) {
  const PhaseSpace& sp = jet.space();
  const std::size_t dim = sp.dim();
  Vector g(dim, 0.0);
  for (std::size_t b = 0; b < dim; ++b) {
    double acc = -jet.d(b);
    for (std::size_t i = 0; i < jet.n(); ++i) acc += jet.v(i) * jet.dv_dslot(i, b);
    g[b] = acc;
  }
  for (std::size_t i = 0; i < jet.n(); ++i) g[sp.v_index(i)] += jet.dv(i);
  return g;
}

// Fiber derivative: (t, q, v, s) -> (t, q, dL/dv, s).
inline PhasePoint legendre_image(const Jet& jet, const PhasePoint& pt) {
  PhasePoint out;
  out.t = pt.t;
  out.q = pt.q;
  out.s = pt.s;
  out.p.resize(jet.n());
  for (std::size_t i = 0; i < jet.n(); ++i) out.p[i] = jet.dv(i);
  return out;
}

// Jacobian of the Legendre map, rows ordered like the cotangent layout,
// columns like the tangent layout.
inline Matrix legendre_jacobian(const Jet& jet) {
  const PhaseSpace& tan = jet.space();
  const PhaseSpace cot(tan.chart(), Side::cotangent, tan.has_time(), tan.has_action());
  Matrix d(cot.dim(), tan.dim());
  if (tan.has_time()) d(cot.t_index(), tan.t_index()) = 1.0;
  if (tan.has_action()) d(cot.s_index(), tan.s_index()) = 1.0;
  for (std::size_t i = 0; i < jet.n(); ++i) {
    d(cot.q_index(i), tan.q_index(i)) = 1.0;
    for (std::size_t b = 0; b < tan.dim(); ++b) d(cot.p_index(i), b) = jet.dv_dslot(i, b);
  }
  return d;
}

// Push a tangent-side field forward to the cotangent side.
inline Vector legendre_pushforward(const Jet& jet, std::span<const double> field) {
  return legendre_jacobian(jet) * field;
}

}  // namespace mechkit
