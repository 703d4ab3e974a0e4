#pragma once

// Second-order forward automatic differentiation.
//
// A HyperDual carries f, the gradient df/dx_i and the Hessian d2f/dx_i dx_j
// with respect to k active variables. The Hessian is kept as a packed upper
// triangle, so it is symmetric by construction.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mechkit/error.hpp"
#include "mechkit/expr.hpp"
#include "mechkit/linalg.hpp"

namespace mechkit {

class HyperDual {
 public:
  HyperDual() = default;

  // A constant: zero gradient and Hessian. k is adopted from the other
  // operand on first arithmetic use.
  HyperDual(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)

  HyperDual(double v, std::size_t k) : value_(v), k_(k), data_(k + packed_size(k), 0.0) {}

  // The i-th active variable seeded with value v.
  static HyperDual variable(double v, std::size_t i, std::size_t k) {
    if (i >= k) throw DimensionError("variable index out of range");
    HyperDual x(v, k);
    x.data_[i] = 1.0;
    return x;
  }

  static constexpr std::size_t packed_size(std::size_t k) { return k * (k + 1) / 2; }

  double value() const noexcept { return value_; }
  std::size_t size() const noexcept { return k_; }
  bool has_derivatives() const noexcept { return !data_.empty(); }

  double grad(std::size_t i) const { return data_.empty() ? 0.0 : data_.at(i); }

  double hess(std::size_t i, std::size_t j) const {
    if (data_.empty()) return 0.0;
    if (i > j) std::swap(i, j);
    if (j >= k_) throw DimensionError("Hessian index out of range");
    return data_[k_ + packed_index(i, j, k_)];
  }

  std::vector<double> gradient() const {
    std::vector<double> g(k_, 0.0);
    for (std::size_t i = 0; i < k_ && !data_.empty(); ++i) g[i] = data_[i];
    return g;
  }

  Matrix hessian() const {
    Matrix h(k_, k_);
    for (std::size_t i = 0; i < k_; ++i) {
      for (std::size_t j = 0; j < k_; ++j) h(i, j) = hess(i, j);
    }
    return h;
  }

  std::span<const double> packed_hessian() const {
    if (data_.empty()) return {};
    return std::span<const double>(data_).subspan(k_);
  }

  // --- arithmetic -------------------------------------------------------

  friend HyperDual operator-(const HyperDual& a) {
    HyperDual r = a;
    r.value_ = -a.value_;
    for (double& d : r.data_) d = -d;
    return r;
  }

  friend HyperDual operator+(const HyperDual& a, const HyperDual& b) {
    HyperDual r = sized_like(a, b);
    r.value_ = a.value_ + b.value_;
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] = a.d(i) + b.d(i);
    return r;
  }

  friend HyperDual operator-(const HyperDual& a, const HyperDual& b) {
    HyperDual r = sized_like(a, b);
    r.value_ = a.value_ - b.value_;
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] = a.d(i) - b.d(i);
    return r;
  }

  friend HyperDual operator*(const HyperDual& a, const HyperDual& b) {
    HyperDual r = sized_like(a, b);
    r.value_ = a.value_ * b.value_;
    const std::size_t k = r.k_;
    if (k == 0) return r;
    for (std::size_t i = 0; i < k; ++i) r.data_[i] = a.value_ * b.d(i) + b.value_ * a.d(i);
    std::size_t idx = k;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j, ++idx) {
        r.data_[idx] = a.value_ * b.d(idx) + b.value_ * a.d(idx) + a.d(i) * b.d(j) + a.d(j) * b.d(i);
      }
    }
    return r;
  }

  friend HyperDual operator/(const HyperDual& a, const HyperDual& b) {
    const double inv = 1.0 / b.value_;
    HyperDual r = a * chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
    r.value_ = a.value_ / b.value_;  // keep the primal identical to plain evaluation
    return r;
  }

  friend HyperDual sin(const HyperDual& a) {
    const double s = std::sin(a.value_), c = std::cos(a.value_);
    return chain(a, s, c, -s);
  }
  friend HyperDual cos(const HyperDual& a) {
    const double s = std::sin(a.value_), c = std::cos(a.value_);
    return chain(a, c, -s, -c);
  }
  friend HyperDual tan(const HyperDual& a) {
    const double t = std::tan(a.value_);
    const double sec2 = 1.0 + t * t;
    return chain(a, t, sec2, 2.0 * t * sec2);
  }
  friend HyperDual exp(const HyperDual& a) {
    const double e = std::exp(a.value_);
    return chain(a, e, e, e);
  }
  friend HyperDual log(const HyperDual& a) {
    const double inv = 1.0 / a.value_;
    return chain(a, std::log(a.value_), inv, -inv * inv);
  }
  friend HyperDual sqrt(const HyperDual& a) {
    const double s = std::sqrt(a.value_);
    if (!a.has_derivatives()) return HyperDual(s);
    return chain(a, s, 0.5 / s, -0.25 / (s * a.value_));
  }
  friend HyperDual abs(const HyperDual& a) {
    if (a.value_ > 0.0) return a;
    if (a.value_ < 0.0) return -a;
    if (a.has_derivatives()) {
      for (double d : a.data_) {
        if (d != 0.0) throw DomainError("derivative of abs at 0");
      }
    }
    return HyperDual(0.0, a.k_);
  }
  // Real power for a positive base: exp(b log a).
  friend HyperDual pow_real(const HyperDual& a, const HyperDual& b) {
    if (!b.has_derivatives()) {
      const double y = b.value_;
      const double v = std::pow(a.value_, y);
      return chain(a, v, y * std::pow(a.value_, y - 1.0), y * (y - 1.0) * std::pow(a.value_, y - 2.0));
    }
    return exp(b * log(a));
  }

  friend double primal(const HyperDual& a) noexcept { return a.value_; }
  friend bool locally_constant(const HyperDual& a) noexcept {
    for (double d : a.data_) {
      if (d != 0.0) return false;
    }
    return true;
  }

 private:
  static std::size_t packed_index(std::size_t i, std::size_t j, std::size_t k) {
    // row-major upper triangle, i <= j
    return i * k - i * (i - 1) / 2 + (j - i);
  }

  double d(std::size_t i) const { return data_.empty() ? 0.0 : data_[i]; }

  static HyperDual sized_like(const HyperDual& a, const HyperDual& b) {
    if (a.has_derivatives() && b.has_derivatives() && a.k_ != b.k_) {
      throw DimensionError("HyperDual size mismatch: " + std::to_string(a.k_) + " vs " + std::to_string(b.k_));
    }
    const std::size_t k = a.has_derivatives() ? a.k_ : b.k_;
    if (!a.has_derivatives() && !b.has_derivatives()) return HyperDual(0.0);
    return HyperDual(0.0, k);
  }

  // f(a) given f, f', f'' at a.
  static HyperDual chain(const HyperDual& a, double f0, double f1, double f2) {
    if (!a.has_derivatives()) return HyperDual(f0);
    const std::size_t k = a.k_;
    HyperDual r(f0, k);
    for (std::size_t i = 0; i < k; ++i) r.data_[i] = f1 * a.data_[i];
    std::size_t idx = k;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i; j < k; ++j, ++idx) {
        r.data_[idx] = f1 * a.data_[idx] + f2 * a.data_[i] * a.data_[j];
      }
    }
    return r;
  }

  double value_ = 0.0;
  std::size_t k_ = 0;
  std::vector<double> data_;  // gradient (k) followed by packed Hessian
};

// Value, gradient and Hessian of `e` at `point`. Derivatives are taken with
// respect to `active` (names from the layout), in that order.
inline HyperDual eval_hyperdual(const Expr& e, const VarLayout& layout, std::span<const double> point,
                                const std::vector<std::string>& active, const Params& params = {}) {
  if (point.size() != layout.size()) {
    throw DimensionError("point has " + std::to_string(point.size()) + " entries, layout has " +
                         std::to_string(layout.size()));
  }
  const std::size_t k = active.size();
  std::vector<std::ptrdiff_t> slot_to_active(layout.size(), -1);
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t i = layout.index(active[a]);
    if (slot_to_active[i] >= 0) throw ValidationError("duplicate active variable '" + active[a] + "'");
    slot_to_active[i] = static_cast<std::ptrdiff_t>(a);
  }
  auto resolve = [&](const std::string& name) -> HyperDual {
    if (auto i = layout.find(name)) {
      if (slot_to_active[*i] >= 0) {
        return HyperDual::variable(point[*i], static_cast<std::size_t>(slot_to_active[*i]), k);
      }
      return HyperDual(point[*i], k);
    }
    auto it = params.find(name);
    if (it == params.end()) throw UnboundIdentifier(name);
    return HyperDual(it->second, k);
  };
  HyperDual r = detail::evaluate<HyperDual>(e, resolve);
  if (!r.has_derivatives() && k > 0) r = r + HyperDual(0.0, k);
  return r;
}

// All layout variables active.
inline HyperDual eval_hyperdual(const Expr& e, const VarLayout& layout, std::span<const double> point,
                                const Params& params = {}) {
  return eval_hyperdual(e, layout, point, layout.names(), params);
}

}  // namespace mechkit
