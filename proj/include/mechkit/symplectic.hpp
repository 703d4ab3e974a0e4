#pragma once

// Autonomous conservative mechanics on T*Q and TQ: Hamilton equations,
// the coordinate Poisson bracket, Lagrangian data, the Euler-Lagrange field,
// the Legendre map, and the numerical checks that tie them together.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mechkit/autodiff.hpp"
#include "mechkit/integrate.hpp"
#include "mechkit/jet.hpp"
#include "mechkit/phase.hpp"

namespace mechkit::symplectic {

inline PhaseSpace cotangent_space(const Chart& c) { return PhaseSpace(c, Side::cotangent, false, false); }
inline PhaseSpace tangent_space(const Chart& c) { return PhaseSpace(c, Side::tangent, false, false); }

// (dq/dt, dp/dt) = (dh/dp, -dh/dq)
inline FieldEval hamiltonian_field(const Expr& h, const Chart& chart, const PhasePoint& pt, const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  const Jet jet(h, sp, pt, params);
  Vector x(sp.dim());
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.dp(i);
    x[sp.p_index(i)] = -jet.dq(i);
  }
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["h"] = jet.value();
  return out;
}

// {f, g} = sum_i df/dq^i dg/dp_i - df/dp_i dg/dq^i
inline double poisson_bracket(const Expr& f, const Expr& g, const Chart& chart, const PhasePoint& pt,
                              const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  const Vector x = sp.pack(pt);
  const HyperDual df = eval_hyperdual(f, sp.layout(), x, params);
  const HyperDual dg = eval_hyperdual(g, sp.layout(), x, params);
  double acc = 0.0;
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    acc += df.grad(sp.q_index(i)) * dg.grad(sp.p_index(i)) - df.grad(sp.p_index(i)) * dg.grad(sp.q_index(i));
  }
  return acc;
}

struct LagrangianData {
  double energy = 0.0;  // E_L = v . dL/dv - L
  Vector momenta;       // dL/dv
  Matrix W;             // d2L/dv dv
  Matrix cross;         // cross(i, j) = d2L/dq^j dv^i
  Vector grad_q;        // dL/dq
};

inline LagrangianData lagrangian_data(const Jet& jet) {
  const PhaseSpace& sp = jet.space();
  const std::size_t n = jet.n();
  LagrangianData d;
  d.energy = lagrangian_energy(jet);
  d.momenta.resize(n);
  d.grad_q.resize(n);
  d.W = jet.velocity_hessian();
  d.cross = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    d.momenta[i] = jet.dv(i);
    d.grad_q[i] = jet.dq(i);
    for (std::size_t j = 0; j < n; ++j) d.cross(i, j) = jet.dv_dslot(i, sp.q_index(j));
  }
  return d;
}

inline LagrangianData lagrangian_data(const Expr& L, const Chart& chart, const PhasePoint& pt, const Params& params) {
  return lagrangian_data(Jet(L, tangent_space(chart), pt, params));
}

// dq/dt = v,  W dv/dt = dL/dq - (d2L/dq dv) v
inline FieldEval euler_lagrange_field(const Expr& L, const Chart& chart, const PhasePoint& pt, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  const Jet jet(L, sp, pt, params);
  const Vector a = lagrangian_accelerations(jet, pt);
  Vector x(sp.dim());
  for (std::size_t i = 0; i < sp.dof(); ++i) {
    x[sp.q_index(i)] = jet.v(i);
    x[sp.v_index(i)] = a[i];
  }
  FieldEval out = make_field(sp, std::move(x));
  out.diagnostics["E_L"] = lagrangian_energy(jet);
  out.diagnostics["L"] = jet.value();
  return out;
}

inline PhasePoint legendre_map(const Expr& L, const Chart& chart, const PhasePoint& pt, const Params& params) {
  const Jet jet(L, tangent_space(chart), pt, params);
  return legendre_image(jet, pt);
}

// |D(FL) X_L - X_h o FL|_inf at a tangent point.
inline double equivalence_residual(const Expr& L, const Expr& h, const Chart& chart, const PhasePoint& pt,
                                   const Params& params) {
  const Jet jet(L, tangent_space(chart), pt, params);
  const FieldEval xl = euler_lagrange_field(L, chart, pt, params);
  const Vector pushed = legendre_pushforward(jet, xl.components);
  const FieldEval xh = hamiltonian_field(h, chart, legendre_image(jet, pt), params);
  double r = 0.0;
  for (std::size_t i = 0; i < pushed.size(); ++i) r = std::max(r, std::fabs(pushed[i] - xh.components[i]));
  return r;
}

// ---------------------------------------------------------------------------
// Hamilton-Jacobi

struct HJReport {
  double deviation = 0.0;  // max |h(q, dS/dq) - mean|
  double mean = 0.0;
  Vector energies;         // h(q, dS/dq) per sample
  std::vector<Vector> fields;  // dh/dp at p = dS/dq per sample
};

// The energy is h evaluated on the section p = dS/dq; `gradient` maps a
// base point to dS/dq.
template <class Gradient>
HJReport hj_report(const Expr& h, const Chart& chart, const std::vector<Vector>& samples, const Params& params,
                   const Gradient& gradient) {
  if (samples.empty()) throw ValidationError("Hamilton-Jacobi check needs at least one sample point");
  const PhaseSpace cot = cotangent_space(chart);
  HJReport r;
  for (const Vector& q : samples) {
    PhasePoint pt;
    pt.q = q;
    pt.p = gradient(q);
    const Jet jet(h, cot, pt, params);
    r.energies.push_back(jet.value());
    Vector x(chart.dof());
    for (std::size_t i = 0; i < chart.dof(); ++i) x[i] = jet.dp(i);
    r.fields.push_back(std::move(x));
  }
  double sum = 0.0;
  for (double e : r.energies) sum += e;
  r.mean = sum / static_cast<double>(r.energies.size());
  for (double e : r.energies) r.deviation = std::max(r.deviation, std::fabs(e - r.mean));
  return r;
}

// S is an expression over the coordinates (its constants enter as parameters).
inline HJReport hj_residual(const Expr& h, const Expr& S, const Chart& chart, const std::vector<Vector>& samples,
                            const Params& params) {
  const VarLayout base(chart.coordinates);
  return hj_report(h, chart, samples, params, [&](const Vector& q) {
    return eval_hyperdual(S, base, q, params).gradient();
  });
}

// The same check with dS/dq given componentwise, for generating functions
// whose closed form lies outside the expression language.
inline HJReport hj_residual_from_gradient(const Expr& h, const std::vector<Expr>& dS, const Chart& chart,
                                          const std::vector<Vector>& samples, const Params& params) {
  if (dS.size() != chart.dof()) throw DimensionError("need one gradient component per coordinate");
  const VarLayout base(chart.coordinates);
  return hj_report(h, chart, samples, params, [&](const Vector& q) {
    Vector p(dS.size());
    for (std::size_t i = 0; i < dS.size(); ++i) p[i] = eval(dS[i], base, q, params);
    return p;
  });
}

// ---------------------------------------------------------------------------
// Symplecticity of the flow

struct FlowCheck {
  double fd_step = 1e-5;
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.abs_tol = 1e-12;
    c.rel_tol = 1e-12;
    return c;
  }();
};

inline Matrix canonical_matrix(std::size_t n) {
  Matrix omega(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    omega(i, n + i) = 1.0;
    omega(n + i, i) = -1.0;
  }
  return omega;
}

// Central-difference Jacobian of the time-T flow map of `field`.
inline Matrix flow_jacobian(const FieldFn& field, const Vector& x0, double T, const FlowCheck& cfg) {
  const std::size_t dim = x0.size();
  Matrix J(dim, dim);
  if (T == 0.0) return Matrix::identity(dim);
  auto flow = [&](const Vector& x) { return integrate(field, x, 0.0, T, cfg.integrator).states.back(); };
  Vector y = x0;
  for (std::size_t j = 0; j < dim; ++j) {
    y[j] = x0[j] + cfg.fd_step;
    const Vector fp = flow(y);
    y[j] = x0[j] - cfg.fd_step;
    const Vector fm = flow(y);
    y[j] = x0[j];
    for (std::size_t i = 0; i < dim; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * cfg.fd_step);
  }
  return J;
}

inline double symplectic_defect(const Matrix& J) {
  const Matrix omega = canonical_matrix(J.rows() / 2);
  return (J.transpose() * omega * J - omega).norm_inf();
}

inline FieldFn hamiltonian_flow(const Expr& h, const Chart& chart, const Params& params) {
  const PhaseSpace sp = cotangent_space(chart);
  return [h, chart, sp, params](double, std::span<const double> x) {
    return hamiltonian_field(h, chart, sp.unpack(x), params).components;
  };
}

inline FieldFn lagrangian_flow(const Expr& L, const Chart& chart, const Params& params) {
  const PhaseSpace sp = tangent_space(chart);
  return [L, chart, sp, params](double, std::span<const double> x) {
    return euler_lagrange_field(L, chart, sp.unpack(x), params).components;
  };
}

// |J^T Omega J - Omega|_inf for the time-T Hamiltonian flow from a cotangent point.
inline double flow_symplecticity_hamiltonian(const Expr& h, const Chart& chart, const PhasePoint& pt, double T,
                                             const Params& params, const FlowCheck& cfg = {}) {
  const PhaseSpace sp = cotangent_space(chart);
  return symplectic_defect(flow_jacobian(hamiltonian_flow(h, chart, params), sp.pack(pt), T, cfg));
}

// Lagrangian version: the velocity-space flow is conjugated by the Legendre
// map, J = D(FL)(x_T) J_v D(FL)(x_0)^-1, before the canonical test.
inline double flow_symplecticity_lagrangian(const Expr& L, const Chart& chart, const PhasePoint& pt, double T,
                                            const Params& params, const FlowCheck& cfg = {}) {
  const PhaseSpace sp = tangent_space(chart);
  const FieldFn field = lagrangian_flow(L, chart, params);
  const Vector x0 = sp.pack(pt);
  const Matrix Jv = flow_jacobian(field, x0, T, cfg);
  const Vector xT = T == 0.0 ? x0 : integrate(field, x0, 0.0, T, cfg.integrator).states.back();
  const Matrix d0 = legendre_jacobian(Jet(L, sp, pt, params));
  const Matrix dT = legendre_jacobian(Jet(L, sp, sp.unpack(xT), params));
  return symplectic_defect(dT * Jv * LU(d0).inverse());
}

}  // namespace mechkit::symplectic
