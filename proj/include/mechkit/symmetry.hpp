#pragma once

// Pointwise symmetry checks. Generators are explicit vector fields given
// component by component over a phase-space layout; every check reports the
// worst residual over the sample points it was given and nothing more.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mechkit/autodiff.hpp"
#include "mechkit/integrate.hpp"
#include "mechkit/jet.hpp"
#include "mechkit/phase.hpp"
#include "mechkit/symbolic.hpp"
#include "mechkit/unified.hpp"  // Flavor and the per-flavor tangent spaces

namespace mechkit::symmetry {

using unified::Flavor;

class GeneratorField {
 public:
  GeneratorField() = default;
  GeneratorField(VarLayout layout, std::vector<Expr> components)
      : layout_(std::move(layout)), components_(std::move(components)) {
    if (components_.size() != layout_.size()) {
      throw DimensionError("generator has " + std::to_string(components_.size()) + " components for a " +
                           std::to_string(layout_.size()) + "-dimensional phase space");
    }
  }

  static GeneratorField parse(VarLayout layout, const std::vector<std::string>& components) {
    std::vector<Expr> c;
    c.reserve(components.size());
    for (const auto& s : components) c.push_back(mechkit::parse(s));
    return GeneratorField(std::move(layout), std::move(c));
  }

  // d/d(name)
  static GeneratorField coordinate(const VarLayout& layout, std::string_view name) {
    std::vector<Expr> c(layout.size(), Expr::constant(0.0));
    c[layout.index(name)] = Expr::constant(1.0);
    return GeneratorField(layout, std::move(c));
  }

  const VarLayout& layout() const noexcept { return layout_; }
  const std::vector<Expr>& components() const noexcept { return components_; }
  std::size_t dim() const noexcept { return components_.size(); }

  Vector at(std::span<const double> x, const Params& params = {}) const {
    Vector y(dim());
    for (std::size_t i = 0; i < dim(); ++i) y[i] = eval(components_[i], layout_, x, params);
    return y;
  }

  // J(i, j) = dY^i / dx^j
  Matrix jacobian(std::span<const double> x, const Params& params = {}) const {
    Matrix J(dim(), dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      const HyperDual d = eval_hyperdual(components_[i], layout_, x, params);
      for (std::size_t j = 0; j < dim(); ++j) J(i, j) = d.grad(j);
    }
    return J;
  }

  GeneratorField scaled(double c) const {
    std::vector<Expr> out;
    out.reserve(dim());
    for (const auto& e : components_) out.push_back(Expr::constant(c) * e);
    return GeneratorField(layout_, std::move(out));
  }

 private:
  VarLayout layout_;
  std::vector<Expr> components_;
};

inline void check_layout(const GeneratorField& Y, const VarLayout& layout) {
  if (Y.layout().names() != layout.names()) {
    throw DimensionError("generator layout does not match the phase space");
  }
}

// ---------------------------------------------------------------------------
// Lifts of a field Z = Z^i d/dq^i on the configuration space. Z is given over
// the coordinates (and may mention t or s when the tangent space carries them).

inline GeneratorField complete_lift(const std::vector<Expr>& Z, const PhaseSpace& tangent) {
  const Chart& c = tangent.chart();
  if (Z.size() != c.dof()) throw DimensionError("base field needs one component per coordinate");
  std::vector<Expr> y(tangent.dim(), Expr::constant(0.0));
  for (std::size_t i = 0; i < c.dof(); ++i) {
    y[tangent.q_index(i)] = Z[i];
    Expr acc = Expr::constant(0.0);
    for (std::size_t j = 0; j < c.dof(); ++j) {
      acc = detail::s_add(acc, detail::s_mul(differentiate(Z[i], c.coordinates[j]), Expr::symbol(c.velocities[j])));
    }
    y[tangent.v_index(i)] = acc;
  }
  return GeneratorField(tangent.layout(), std::move(y));
}

inline GeneratorField vertical_lift(const std::vector<Expr>& Z, const PhaseSpace& tangent) {
  const Chart& c = tangent.chart();
  if (Z.size() != c.dof()) throw DimensionError("base field needs one component per coordinate");
  std::vector<Expr> y(tangent.dim(), Expr::constant(0.0));
  for (std::size_t i = 0; i < c.dof(); ++i) y[tangent.v_index(i)] = Z[i];
  return GeneratorField(tangent.layout(), std::move(y));
}

// Coordinate Hamiltonian field of f on T*Q: (df/dp, -df/dq).
inline GeneratorField hamiltonian_generator(const Expr& f, const PhaseSpace& cotangent) {
  const Chart& c = cotangent.chart();
  std::vector<Expr> y(cotangent.dim(), Expr::constant(0.0));
  for (std::size_t i = 0; i < c.dof(); ++i) {
    y[cotangent.q_index(i)] = differentiate(f, c.momenta[i]);
    y[cotangent.p_index(i)] = detail::s_neg(differentiate(f, c.coordinates[i]));
  }
  return GeneratorField(cotangent.layout(), std::move(y));
}

// ---------------------------------------------------------------------------
// Brackets

// [X, Y]^i = X^j dY^i/dx^j - Y^j dX^i/dx^j
inline Vector lie_bracket(const GeneratorField& X, const GeneratorField& Y, std::span<const double> x,
                          const Params& params = {}) {
  check_layout(Y, X.layout());
  if (x.size() != X.dim()) throw DimensionError("point does not match the generator layout");
  const Vector xv = X.at(x, params);
  const Vector yv = Y.at(x, params);
  const Vector a = Y.jacobian(x, params) * xv;
  const Vector b = X.jacobian(x, params) * yv;
  Vector out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

struct SymmetryReport {
  double max_residual = 0.0;
  std::vector<Vector> samples;
  Vector residuals;  // |[Y, X]|_inf per sample
  // Set when the bracket is nonzero but everywhere a multiple g X of the
  // field, i.e. [Y, X] = g X with g != 0.
  bool parallel_to_field = false;
  Vector conformal_factors;  // g per sample (0 where X vanishes)
};

struct BracketConfig {
  double step = 1e-3;        // base finite-difference step along Y
  double tolerance = 1e-9;   // below this the bracket counts as zero
};

// Directional derivative dX(x)[y] of a pointwise field, by Richardson
// extrapolation of central differences.
inline Vector directional_derivative(const FieldFn& X, double t, std::span<const double> x, const Vector& y,
                                     double step) {
  const double scale = std::max(1.0, norm_inf(y));
  const double h = step / scale;
  auto central = [&](double hh) {
    Vector xp(x.begin(), x.end()), xm(x.begin(), x.end());
    for (std::size_t i = 0; i < xp.size(); ++i) {
      xp[i] += hh * y[i];
      xm[i] -= hh * y[i];
    }
    const Vector fp = X(t, xp);
    const Vector fm = X(t, xm);
    Vector d(fp.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = (fp[i] - fm[i]) / (2.0 * hh);
    return d;
  };
  const Vector d1 = central(h);
  const Vector d2 = central(0.5 * h);
  Vector out(d1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (4.0 * d2[i] - d1[i]) / 3.0;
  return out;
}

// max over samples of |[Y, X_dyn]|_inf. The dynamical field is any pointwise
// field (Hamiltonian, Euler-Lagrange, contact ...); its derivative along Y is
// taken numerically and the derivative of Y by autodiff.
inline SymmetryReport dynamical_symmetry_residual(const GeneratorField& Y, const FieldFn& X,
                                                  const std::vector<Vector>& samples, const Params& params = {},
                                                  const BracketConfig& cfg = {}, double t = 0.0) {
  if (samples.empty()) throw ValidationError("symmetry check needs at least one sample point");
  SymmetryReport r;
  r.samples = samples;
  bool any = false, all_parallel = true;
  for (const Vector& x : samples) {
    if (x.size() != Y.dim()) throw DimensionError("sample point does not match the generator layout");
    const Vector yv = Y.at(x, params);
    const Vector xv = X(t, x);
    const Vector dx_y = directional_derivative(X, t, x, yv, cfg.step);
    const Vector x_of_y = Y.jacobian(x, params) * xv;
    // [Y, X] = Y(X) - X(Y)
    Vector yx(xv.size());
    for (std::size_t i = 0; i < yx.size(); ++i) yx[i] = dx_y[i] - x_of_y[i];
    const double res = norm_inf(yx);
    r.residuals.push_back(res);
    r.max_residual = std::max(r.max_residual, res);

    const double xx = dot(xv, xv);
    double g = 0.0;
    if (xx > 0.0) g = dot(yx, xv) / xx;
    r.conformal_factors.push_back(g);
    if (res > cfg.tolerance) {
      any = true;
      double perp = 0.0;
      for (std::size_t i = 0; i < yx.size(); ++i) perp = std::max(perp, std::fabs(yx[i] - g * xv[i]));
      if (xx == 0.0 || perp > cfg.tolerance * std::max(1.0, res)) all_parallel = false;
    }
  }
  r.parallel_to_field = any && all_parallel;
  return r;
}

// ---------------------------------------------------------------------------
// Noether symmetries of a Lagrangian

struct NoetherReport {
  Flavor flavor = Flavor::autonomous;
  double form_residual = 0.0;    // max |L_Y theta_L|_inf (eta_L for contact)
  double energy_residual = 0.0;  // max |L_Y E_L|
  double time_residual = 0.0;    // max |i(Y) dt|, extended flavor only
  Vector quantity;               // f_Y per sample (the dissipated quantity for contact)
  std::vector<Vector> samples;

  double max_residual() const { return std::max({form_residual, energy_residual, time_residual}); }
  bool passes(double tolerance) const { return max_residual() <= tolerance; }
};

// The Lagrangian one-form as a coefficient vector over the tangent layout:
//   autonomous, extended: theta_L = (dL/dv^i) dq^i
//   contact:              eta_L   = ds - (dL/dv^i) dq^i
// and its coordinate derivatives D(a, b) = d alpha_a / dx^b.
struct FormJet {
  Vector alpha;
  Matrix D;
};

inline FormJet lagrangian_form(const Jet& jet, Flavor f) {
  const PhaseSpace& sp = jet.space();
  const double sign = f == Flavor::contact ? -1.0 : 1.0;
  FormJet out{Vector(sp.dim(), 0.0), Matrix(sp.dim(), sp.dim())};
  for (std::size_t i = 0; i < jet.n(); ++i) {
    const std::size_t a = sp.q_index(i);
    out.alpha[a] = sign * jet.dv(i);
    for (std::size_t b = 0; b < sp.dim(); ++b) out.D(a, b) = sign * jet.dv_dslot(i, b);
  }
  if (f == Flavor::contact) out.alpha[sp.s_index()] = 1.0;
  return out;
}

// (L_Y alpha)_a = Y^b d_b alpha_a + alpha_b d_a Y^b
inline Vector lie_derivative_form(const FormJet& form, const Vector& y, const Matrix& dy) {
  const std::size_t n = y.size();
  Vector out(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < n; ++b) acc += y[b] * form.D(a, b) + form.alpha[b] * dy(b, a);
    out[a] = acc;
  }
  return out;
}

// Exact Noether conditions L_Y theta_L = 0 (L_Y eta_L = 0 for contact),
// L_Y E_L = 0 and, with time, i(Y) dt = 0. The reported quantity is
// i(Y) theta_L = Y^{q,i} dL/dv^i, or -i(Y) eta_L in the contact case.
inline NoetherReport noether_check(const GeneratorField& Y, const Expr& L, const Chart& chart, Flavor f,
                                   const std::vector<Vector>& samples, const Params& params = {}) {
  if (samples.empty()) throw ValidationError("Noether check needs at least one sample point");
  const PhaseSpace sp = unified::tangent_space(chart, f);
  check_layout(Y, sp.layout());
  NoetherReport r;
  r.flavor = f;
  r.samples = samples;
  for (const Vector& x : samples) {
    if (x.size() != sp.dim()) throw DimensionError("sample point does not match the tangent layout");
    const PhasePoint pt = sp.unpack(x);
    const Jet jet(L, sp, pt, params);
    const Vector y = Y.at(x, params);
    const Matrix dy = Y.jacobian(x, params);

    const FormJet form = lagrangian_form(jet, f);
    r.form_residual = std::max(r.form_residual, norm_inf(lie_derivative_form(form, y, dy)));
    r.energy_residual = std::max(r.energy_residual, std::fabs(dot(lagrangian_energy_gradient(jet), y)));
    if (f == Flavor::extended) r.time_residual = std::max(r.time_residual, std::fabs(y[sp.t_index()]));

    const double contraction = dot(form.alpha, y);
    r.quantity.push_back(f == Flavor::contact ? -contraction : contraction);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Trajectory monitors

struct Conserve {};
struct Decay {
  Expr rate;  // the instantaneous rate, R(h) for a dissipated quantity
};
using MonitorMode = std::variant<Conserve, Decay>;

struct QuantityReport {
  Vector values;
  Vector expected;                  // f(0) or f(0) exp(-int rate)
  double max_deviation = 0.0;       // max |f - expected|
  double relative_deviation = 0.0;  // max |f - expected| / |expected|
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();  // decay only
};

// Least-squares slope of -log|f| against t.
inline double fit_decay_rate(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size() || times.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (values[k] == 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double y = std::log(std::fabs(values[k]));
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
  }
  const double den = n * stt - st * st;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -(n * sty - st * sy) / den;
}

namespace detail {

// The trajectory's state names, plus the sample time as "t" if the state
// does not already carry it.
struct TrajectoryView {
  VarLayout layout;
  bool appended_time = false;

  explicit TrajectoryView(const Trajectory& traj) {
    std::vector<std::string> names = traj.state_names;
    if (std::find(names.begin(), names.end(), "t") == names.end()) {
      names.push_back("t");
      appended_time = true;
    }
    layout = VarLayout(std::move(names));
  }

  Vector point(const Trajectory& traj, std::size_t k) const {
    Vector x = traj.states[k];
    if (appended_time) x.push_back(traj.times[k]);
    return x;
  }

  // d/dt of e along the trajectory, from its gradient and the stored rates.
  double slope(const HyperDual& d, const Trajectory& traj, std::size_t k) const {
    double s = 0.0;
    for (std::size_t b = 0; b < traj.states[k].size(); ++b) s += d.grad(b) * traj.rates[k][b];
    if (appended_time) s += d.grad(layout.size() - 1);
    return s;
  }
};

}  // namespace detail

inline QuantityReport monitor(const Trajectory& traj, const Expr& quantity, const Params& params = {},
                              const MonitorMode& mode = Conserve{}) {
  QuantityReport r;
  if (traj.size() == 0) return r;
  const detail::TrajectoryView view(traj);
  for (std::size_t k = 0; k < traj.size(); ++k) r.values.push_back(eval(quantity, view.layout, view.point(traj, k), params));
  const double f0 = r.values.front();

  if (const auto* decay = std::get_if<Decay>(&mode)) {
    Vector rate, slope;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const HyperDual d = eval_hyperdual(decay->rate, view.layout, view.point(traj, k), params);
      rate.push_back(d.value());
      slope.push_back(view.slope(d, traj, k));
    }
    const Vector integral = cumulative_integral(traj.times, rate, slope);
    for (double I : integral) r.expected.push_back(f0 * std::exp(-I));
    r.fitted_rate = fit_decay_rate(traj.times, r.values);
  } else {
    r.expected.assign(traj.size(), f0);
  }

  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double dev = std::fabs(r.values[k] - r.expected[k]);
    r.max_deviation = std::max(r.max_deviation, dev);
    r.relative_deviation = std::max(r.relative_deviation, dev / std::max(std::fabs(r.expected[k]), DBL_MIN));
  }
  return r;
}

}  // namespace mechkit::symmetry
