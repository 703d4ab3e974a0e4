#pragma once

// Newtonian mechanics on a Riemannian configuration space: the Levi-Civita
// connection of a metric given by expressions, geodesics, curvature, the
// Newton equation, and constraint forces (holonomic by projection,
// nonholonomic by multipliers).

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mechkit/autodiff.hpp"
#include "mechkit/integrate.hpp"
#include "mechkit/phase.hpp"

namespace mechkit::riemann {

// g_ij(q) as expressions over the coordinates.
class MetricField {
 public:
  MetricField() = default;
  MetricField(Chart chart, std::vector<std::vector<Expr>> entries)
      : chart_(std::move(chart)), layout_(chart_.coordinates), entries_(std::move(entries)) {
    const std::size_t n = chart_.dof();
    if (entries_.size() != n) throw DimensionError("metric needs " + std::to_string(n) + " rows");
    for (const auto& row : entries_) {
      if (row.size() != n) throw DimensionError("metric rows need " + std::to_string(n) + " entries");
    }
  }

  const Chart& chart() const noexcept { return chart_; }
  const VarLayout& layout() const noexcept { return layout_; }
  std::size_t dim() const noexcept { return chart_.dof(); }
  const Expr& entry(std::size_t i, std::size_t j) const { return entries_.at(i).at(j); }

  // Value, first and second derivatives of every entry. Throws if the
  // evaluated matrix is not symmetric or not positive definite.
  struct Jet {
    Matrix g;
    Matrix inverse;
    std::vector<Matrix> dg;               // dg[l](i, j) = d g_ij / dq^l
    std::vector<std::vector<Matrix>> ddg;  // ddg[l][m](i, j) = d2 g_ij / dq^l dq^m
  };

  Jet jet(std::span<const double> q, const Params& params) const {
    const std::size_t n = dim();
    if (q.size() != n) throw DimensionError("metric evaluated at a point of the wrong dimension");
    Jet J;
    J.g = Matrix(n, n);
    J.dg.assign(n, Matrix(n, n));
    J.ddg.assign(n, std::vector<Matrix>(n, Matrix(n, n)));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const HyperDual e = eval_hyperdual(entries_[i][j], layout_, q, params);
        J.g(i, j) = e.value();
        for (std::size_t l = 0; l < n; ++l) {
          J.dg[l](i, j) = e.grad(l);
          for (std::size_t m = 0; m < n; ++m) J.ddg[l][m](i, j) = e.hess(l, m);
        }
      }
    }
    check_metric(J.g, q);
    J.inverse = LU(J.g).inverse();
    return J;
  }

  Matrix at(std::span<const double> q, const Params& params) const {
    const std::size_t n = dim();
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) g(i, j) = eval(entries_[i][j], layout_, q, params);
    }
    check_metric(g, q);
    return g;
  }

  static void check_metric(const Matrix& g, std::span<const double> q) {
    const std::size_t n = g.rows();
    const double scale = std::max(1.0, g.max_abs());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (std::fabs(g(i, j) - g(j, i)) > 1e-12 * scale) {
          throw ValidationError("metric is not symmetric at " + where(q));
        }
      }
    }
    // Cholesky: every pivot must be positive.
    Matrix c(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      double d = g(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= c(j, k) * c(j, k);
      if (!(d > 1e-14 * scale)) throw ValidationError("metric is not positive definite at " + where(q));
      c(j, j) = std::sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = g(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= c(i, k) * c(j, k);
        c(i, j) = s / c(j, j);
      }
    }
  }

  static MetricField euclidean(const Chart& chart) {
    const std::size_t n = chart.dof();
    std::vector<std::vector<Expr>> e(n, std::vector<Expr>(n, Expr::constant(0.0)));
    for (std::size_t i = 0; i < n; ++i) e[i][i] = Expr::constant(1.0);
    return MetricField(chart, std::move(e));
  }

 private:
  static std::string where(std::span<const double> q) {
    PhasePoint pt;
    pt.q.assign(q.begin(), q.end());
    return describe(pt);
  }

  Chart chart_;
  VarLayout layout_;
  std::vector<std::vector<Expr>> entries_;
};

// A force field F^k(t, q, v), given either componentwise or as the gradient
// force -grad V of a potential.
struct ForceField {
  std::vector<Expr> components;
  std::optional<Expr> potential;

  static ForceField zero(std::size_t n) { return ForceField{std::vector<Expr>(n, Expr::constant(0.0)), {}}; }
  static ForceField from_potential(Expr V) { return ForceField{{}, std::move(V)}; }

  bool velocity_dependent(const Chart& chart) const { return mentions(chart.velocities); }
  bool time_dependent(const Chart& chart) const { return mentions({chart.time}); }

  // Contravariant components at (t, q, v).
  Vector at(const MetricField& g, const MetricField::Jet& gj, double t, std::span<const double> q,
            std::span<const double> v, const Params& params) const {
    const Chart& chart = g.chart();
    const std::size_t n = chart.dof();
    if (potential) {
      const HyperDual dV = eval_hyperdual(*potential, g.layout(), q, params);
      Vector grad(n);
      for (std::size_t l = 0; l < n; ++l) grad[l] = -dV.grad(l);
      return gj.inverse * grad;
    }
    if (components.size() != n) throw DimensionError("force needs one component per coordinate");
    const PhaseSpace sp(chart, Side::tangent, true, false);
    Vector x;
    x.reserve(sp.dim());
    x.push_back(t);
    x.insert(x.end(), q.begin(), q.end());
    x.insert(x.end(), v.begin(), v.end());
    Vector f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = eval(components[k], sp.layout(), x, params);
    return f;
  }

 private:
  bool mentions(const std::vector<std::string>& names) const {
    auto check = [&](const Expr& e) {
      const auto ids = free_identifiers(e);
      return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return ids.count(n) > 0; });
    };
    if (potential && check(*potential)) return true;
    return std::any_of(components.begin(), components.end(), check);
  }
};

// Gamma^k_ij stored as gamma[k](i, j).
struct Christoffel {
  std::vector<Matrix> gamma;

  double operator()(std::size_t k, std::size_t i, std::size_t j) const { return gamma[k](i, j); }
  std::size_t dim() const noexcept { return gamma.size(); }
};

// Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
inline Christoffel christoffel(const MetricField::Jet& J) {
  const std::size_t n = J.g.rows();
  Christoffel c;
  c.gamma.assign(n, Matrix(n, n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t l = 0; l < n; ++l) s += J.inverse(k, l) * (J.dg[i](j, l) + J.dg[j](i, l) - J.dg[l](i, j));
        c.gamma[k](i, j) = 0.5 * s;
      }
    }
  }
  return c;
}

inline Christoffel christoffel(const MetricField& g, std::span<const double> q, const Params& params) {
  return christoffel(g.jet(q, params));
}

// d_m Gamma^k_ij stored as dgamma[m][k](i, j), from the metric's second
// derivatives and d(g^-1) = -g^-1 (dg) g^-1.
inline std::vector<std::vector<Matrix>> christoffel_derivatives(const MetricField::Jet& J) {
  const std::size_t n = J.g.rows();
  std::vector<Matrix> dinv(n);
  for (std::size_t m = 0; m < n; ++m) {
    Matrix t = J.inverse * J.dg[m] * J.inverse;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) t(a, b) = -t(a, b);
    }
    dinv[m] = std::move(t);
  }
  std::vector<std::vector<Matrix>> out(n, std::vector<Matrix>(n, Matrix(n, n)));
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t l = 0; l < n; ++l) {
            const double bracket = J.dg[i](j, l) + J.dg[j](i, l) - J.dg[l](i, j);
            const double dbracket = J.ddg[m][i](j, l) + J.ddg[m][j](i, l) - J.ddg[m][l](i, j);
            s += dinv[m](k, l) * bracket + J.inverse(k, l) * dbracket;
          }
          out[m][k](i, j) = 0.5 * s;
        }
      }
    }
  }
  return out;
}

// dv^k/dt = -Gamma^k_ij v^i v^j
inline Vector geodesic_accel(const Christoffel& c, std::span<const double> v) {
  const std::size_t n = c.dim();
  if (v.size() != n) throw DimensionError("velocity has the wrong dimension");
  Vector a(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) s += c(k, i, j) * v[i] * v[j];
    }
    a[k] = -s;
  }
  return a;
}

inline Vector geodesic_accel(const MetricField& g, std::span<const double> q, std::span<const double> v,
                             const Params& params) {
  return geodesic_accel(christoffel(g, q, params), v);
}

// dv^k/dt = F^k - Gamma^k_ij v^i v^j
inline Vector newton_field(const MetricField& g, const ForceField& F, std::span<const double> q,
                           std::span<const double> v, const Params& params, double t = 0.0) {
  const MetricField::Jet J = g.jet(q, params);
  Vector a = geodesic_accel(christoffel(J), v);
  const Vector f = F.at(g, J, t, q, v, params);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += f[k];
  return a;
}

struct Curvature {
  std::vector<std::vector<Matrix>> riemann;  // riemann[l][i](j, k) = R^l_ijk
  Matrix ricci;                              // R_jk = R^i_ijk
  double scalar = 0.0;                       // g^jk R_jk

  double R(std::size_t l, std::size_t i, std::size_t j, std::size_t k) const { return riemann[l][i](j, k); }
};

// R^l_ijk = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^m_jk Gamma^l_im - Gamma^m_ik Gamma^l_jm
inline Curvature curvature(const MetricField& g, std::span<const double> q, const Params& params) {
  const MetricField::Jet J = g.jet(q, params);
  const std::size_t n = J.g.rows();
  const Christoffel G = christoffel(J);
  const auto dG = christoffel_derivatives(J);
  Curvature c;
  c.riemann.assign(n, std::vector<Matrix>(n, Matrix(n, n)));
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          double s = dG[i][l](j, k) - dG[j][l](i, k);
          for (std::size_t m = 0; m < n; ++m) s += G(m, j, k) * G(l, i, m) - G(m, i, k) * G(l, j, m);
          c.riemann[l][i](j, k) = s;
        }
      }
    }
  }
  c.ricci = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += c.riemann[i][i](j, k);
      c.ricci(j, k) = s;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) c.scalar += J.inverse(j, k) * c.ricci(j, k);
  }
  return c;
}

// g(a, b) at a metric value.
inline double inner(const Matrix& g, std::span<const double> a, std::span<const double> b) {
  return dot(a, g * b);
}

struct Projection {
  Vector tangential;  // F^S, g-orthogonal to every constraint normal
  Vector normal;      // F - F^S
};

// Orthogonal projection of a force onto the tangent space of the constraint
// submanifold {phi_a(q) = 0}. The normals X_a = g^-1 d(phi_a) are made
// orthonormal in the metric by Gram-Schmidt.
inline Projection holonomic_project(const MetricField& g, std::span<const double> force,
                                    const std::vector<Expr>& constraints, std::span<const double> q,
                                    const Params& params) {
  const MetricField::Jet J = g.jet(q, params);
  const std::size_t n = g.dim();
  if (force.size() != n) throw DimensionError("force has the wrong dimension");
  std::vector<Vector> basis;
  for (std::size_t a = 0; a < constraints.size(); ++a) {
    const HyperDual dphi = eval_hyperdual(constraints[a], g.layout(), q, params);
    Vector X = J.inverse * dphi.gradient();
    const double norm0 = std::sqrt(inner(J.g, X, X));
    for (const Vector& e : basis) {
      const double c = inner(J.g, X, e);
      for (std::size_t k = 0; k < n; ++k) X[k] -= c * e[k];
    }
    const double norm = std::sqrt(inner(J.g, X, X));
    if (!(norm > 1e-10 * norm0) || norm0 == 0.0) {
      throw ValidationError("constraint gradients are linearly dependent (constraint " + std::to_string(a) + ")");
    }
    for (double& x : X) x /= norm;
    basis.push_back(std::move(X));
  }
  Projection p;
  p.tangential.assign(force.begin(), force.end());
  for (const Vector& e : basis) {
    const double c = inner(J.g, force, e);
    for (std::size_t k = 0; k < n; ++k) p.tangential[k] -= c * e[k];
  }
  p.normal.resize(n);
  for (std::size_t k = 0; k < n; ++k) p.normal[k] = force[k] - p.tangential[k];
  return p;
}

struct NonholonomicStep {
  Vector accelerations;
  Vector multipliers;            // f_k
  Vector constraint_force;       // f_k g^-1 (d phi_k / dv)
  double constraint_rate = 0.0;  // max_k |d/dt phi_k| after the solve
};

// Accelerations under constraints phi_k(q, v) = a^k_j(q) v^j = 0. With
// A = d phi / dv, the multipliers solve
//   (A g^-1 A^T) f = -(d phi / dq) v - A (F - Gamma v v)
// and the accelerations are F - Gamma v v + g^-1 A^T f.
inline NonholonomicStep nonholonomic_step(const MetricField& g, const ForceField& F,
                                          const std::vector<Expr>& constraints, std::span<const double> q,
                                          std::span<const double> v, const Params& params, double t = 0.0,
                                          double tolerance = 1e-9) {
  const MetricField::Jet J = g.jet(q, params);
  const std::size_t n = g.dim();
  const std::size_t m = constraints.size();
  Vector a0 = geodesic_accel(christoffel(J), v);
  {
    const Vector f = F.at(g, J, t, q, v, params);
    for (std::size_t k = 0; k < n; ++k) a0[k] += f[k];
  }
  NonholonomicStep out;
  if (m == 0) {
    out.accelerations = std::move(a0);
    return out;
  }

  const PhaseSpace sp(g.chart(), Side::tangent, false, false);
  Vector x(q.begin(), q.end());
  x.insert(x.end(), v.begin(), v.end());
  Matrix A(m, n);
  Vector drift(m);
  for (std::size_t c = 0; c < m; ++c) {
    const HyperDual phi = eval_hyperdual(constraints[c], sp.layout(), x, params);
    // Linear in v: no v-v second derivatives and nothing left at v = 0.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (std::fabs(phi.hess(sp.v_index(i), sp.v_index(j))) > 1e-12) {
          throw ValidationError("constraint " + std::to_string(c) + " is not linear in the velocities");
        }
      }
    }
    Vector x0 = x;
    for (std::size_t i = 0; i < n; ++i) x0[sp.v_index(i)] = 0.0;
    if (std::fabs(eval(constraints[c], sp.layout(), x0, params)) > 1e-12) {
      throw ValidationError("constraint " + std::to_string(c) + " has a velocity-independent part");
    }
    if (std::fabs(phi.value()) > tolerance) {
      throw OffConstraint("velocity violates constraint " + std::to_string(c) + " (residual " +
                          std::to_string(phi.value()) + ")");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      A(c, i) = phi.grad(sp.v_index(i));
      d += phi.grad(sp.q_index(i)) * v[i];
    }
    drift[c] = d;
  }

  const Matrix ginvAt = J.inverse * A.transpose();
  const Matrix S = A * ginvAt;
  Vector rhs(m);
  const Vector Aa0 = A * a0;
  for (std::size_t c = 0; c < m; ++c) rhs[c] = -drift[c] - Aa0[c];
  try {
    out.multipliers = LU(S).solve(rhs);
  } catch (const SingularMatrix&) {
    throw ValidationError("nonholonomic constraints are rank-deficient at this point");
  }
  out.constraint_force = ginvAt * out.multipliers;
  out.accelerations = a0;
  for (std::size_t k = 0; k < n; ++k) out.accelerations[k] += out.constraint_force[k];
  const Vector Aa = A * out.accelerations;
  for (std::size_t c = 0; c < m; ++c) out.constraint_rate = std::max(out.constraint_rate, std::fabs(drift[c] + Aa[c]));
  return out;
}

// State layout for the flows below: q.. v..
inline PhaseSpace state_space(const MetricField& g) { return PhaseSpace(g.chart(), Side::tangent, false, false); }

inline FieldFn newton_flow(const MetricField& g, const ForceField& F, const Params& params) {
  const std::size_t n = g.dim();
  return [g, F, params, n](double t, std::span<const double> x) {
    const auto q = x.subspan(0, n);
    const auto v = x.subspan(n, n);
    Vector out(v.begin(), v.end());
    const Vector a = newton_field(g, F, q, v, params, t);
    out.insert(out.end(), a.begin(), a.end());
    return out;
  };
}

inline FieldFn geodesic_flow(const MetricField& g, const Params& params) {
  return newton_flow(g, ForceField::zero(g.dim()), params);
}

inline FieldFn nonholonomic_flow(const MetricField& g, const ForceField& F, std::vector<Expr> constraints,
                                 const Params& params) {
  const std::size_t n = g.dim();
  return [g, F, constraints = std::move(constraints), params, n](double t, std::span<const double> x) {
    const auto q = x.subspan(0, n);
    const auto v = x.subspan(n, n);
    Vector out(v.begin(), v.end());
    // integration error moves v slightly off the constraint; accept it here
    const NonholonomicStep s = nonholonomic_step(g, F, constraints, q, v, params, t, 1e-3);
    out.insert(out.end(), s.accelerations.begin(), s.accelerations.end());
    return out;
  };
}

// g(v, v) along a (q, v) state.
inline Monitor speed_monitor(const MetricField& g, const Params& params, std::string name = "speed2") {
  const std::size_t n = g.dim();
  return attach_monitor(std::move(name), [g, params, n](double, std::span<const double> x) {
    const auto v = x.subspan(n, n);
    return inner(g.at(x.subspan(0, n), params), v, v);
  });
}

}  // namespace mechkit::riemann
