#pragma once

// Trajectory integration: classic fixed-step RK4 and the adaptive
// Dormand-Prince 5(4) pair. Requested sample times are hit exactly by
// clamping the step; between samples the trajectory can be queried by cubic
// Hermite interpolation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mechkit/error.hpp"
#include "mechkit/expr.hpp"
#include "mechkit/linalg.hpp"

namespace mechkit {

using FieldFn = std::function<Vector(double t, std::span<const double> x)>;

enum class Method { rk4, dopri5 };

inline const char* to_string(Method m) { return m == Method::rk4 ? "rk4" : "dopri5"; }

struct IntegratorConfig {
  Method method = Method::dopri5;
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double dt = 1e-2;  // fixed step for rk4, first trial step for dopri5
  double min_step = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double sample_dt = 0.0;           // > 0: uniform samples from t0
  std::vector<double> sample_times;  // explicit samples (take precedence)
  std::size_t max_steps = 50'000'000;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

// A named scalar evaluated at every sample.
struct Monitor {
  std::string name;
  std::function<double(double t, std::span<const double> x)> fn;
};

inline Monitor attach_monitor(std::string name, std::function<double(double, std::span<const double>)> fn) {
  return Monitor{std::move(name), std::move(fn)};
}

inline Monitor time_monitor(std::string name = "time") {
  return attach_monitor(std::move(name), [](double t, std::span<const double>) { return t; });
}

// Monitor of an expression over the state layout.
inline Monitor expression_monitor(std::string name, Expr e, VarLayout layout, Params params) {
  return attach_monitor(std::move(name), [e = std::move(e), layout = std::move(layout), params = std::move(params)](
                                              double, std::span<const double> x) { return eval(e, layout, x, params); });
}

struct Trajectory {
  std::string system_id;
  std::vector<std::string> state_names;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> rates;  // field value at each sample, for interpolation
  std::vector<std::string> monitor_names;
  std::map<std::string, Vector> monitors;
  IntegratorConfig config;
  StepStats stats;

  std::size_t size() const noexcept { return times.size(); }

  const Vector& monitor(const std::string& name) const {
    auto it = monitors.find(name);
    if (it == monitors.end()) throw ValidationError("trajectory has no monitor '" + name + "'");
    return it->second;
  }

  Vector column(const std::string& state_name) const {
    for (std::size_t j = 0; j < state_names.size(); ++j) {
      if (state_names[j] == state_name) {
        Vector c(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) c[i] = states[i][j];
        return c;
      }
    }
    if (monitors.count(state_name)) return monitor(state_name);
    throw ValidationError("trajectory has no column '" + state_name + "'");
  }

  // Cubic Hermite interpolation between the bracketing samples.
  Vector interpolate(double t) const {
    if (times.empty()) throw ValidationError("empty trajectory");
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i1 = static_cast<std::size_t>(it - times.begin());
    const std::size_t i0 = i1 - 1;
    const double h = times[i1] - times[i0];
    const double s = (t - times[i0]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    Vector x(states[i0].size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = h00 * states[i0][j] + h10 * h * rates[i0][j] + h01 * states[i1][j] + h11 * h * rates[i1][j];
    }
    return x;
  }
};

namespace detail {

inline std::vector<double> sample_grid(double t0, double t1, const IntegratorConfig& cfg) {
  std::vector<double> out;
  if (!cfg.sample_times.empty()) {
    out = cfg.sample_times;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (double s : out) {
      if (s < t0 || s > t1) throw ValidationError("sample time outside the integration span");
    }
    if (out.front() != t0) out.insert(out.begin(), t0);
    return out;
  }
  out.push_back(t0);
  if (cfg.sample_dt > 0.0) {
    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / cfg.sample_dt + 1e-9));
    for (std::size_t k = 1; k <= count; ++k) {
      const double s = t0 + static_cast<double>(k) * cfg.sample_dt;
      if (s < t1 - 1e-12 * std::max(1.0, std::fabs(t1))) out.push_back(s);
    }
  }
  if (t1 > t0) out.push_back(t1);
  return out;
}

class Recorder {
 public:
  Recorder(Trajectory& traj, const std::vector<Monitor>& monitors) : traj_(traj), monitors_(monitors) {
    for (const auto& m : monitors_) {
      traj_.monitor_names.push_back(m.name);
      traj_.monitors[m.name];
    }
  }

  void record(double t, const Vector& x, const Vector& rate) {
    traj_.times.push_back(t);
    traj_.states.push_back(x);
    traj_.rates.push_back(rate);
    for (const auto& m : monitors_) traj_.monitors[m.name].push_back(m.fn(t, x));
  }

 private:
  Trajectory& traj_;
  const std::vector<Monitor>& monitors_;
};

inline void axpy(Vector& out, const Vector& x, double a, const Vector& k) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + a * k[i];
}

}  // namespace detail

// Integrate dx/dt = field(t, x) from t0 to t1.
inline Trajectory integrate(const FieldFn& field, Vector x0, double t0, double t1, const IntegratorConfig& cfg,
                            const std::vector<Monitor>& monitors = {}) {
  if (!(t1 >= t0)) throw ValidationError("integration span must satisfy t0 <= t1");
  if (cfg.method == Method::rk4 && !(cfg.dt > 0.0)) throw ValidationError("rk4 needs a positive step");
  if (cfg.method == Method::dopri5 && !(cfg.abs_tol > 0.0 || cfg.rel_tol > 0.0)) {
    throw ValidationError("adaptive integration needs a positive tolerance");
  }

  Trajectory traj;
  traj.config = cfg;
  detail::Recorder rec(traj, monitors);
  const std::size_t n = x0.size();

  double t = t0;
  auto f = [&](double tt, const Vector& x) -> Vector {
    ++traj.stats.evaluations;
    Vector r;
    try {
      r = field(tt, x);
    } catch (const IntegrationError&) {
      throw;
    } catch (const Error& e) {
      throw IntegrationError(tt, e.what());
    }
    if (r.size() != n) throw IntegrationError(tt, "field returned wrong dimension");
    for (double v : r) {
      if (!std::isfinite(v)) throw IntegrationError(tt, "field returned a non-finite value");
    }
    return r;
  };

  Vector x = std::move(x0);
  Vector k1 = f(t, x);
  const std::vector<double> samples = detail::sample_grid(t0, t1, cfg);
  rec.record(t, x, k1);
  std::size_t next = 1;
  const bool every_step = cfg.sample_times.empty() && cfg.sample_dt <= 0.0;

  Vector k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), xn(n);
  double h = cfg.dt > 0.0 ? cfg.dt : 1e-3 * std::max(1.0, t1 - t0);
  h = std::min(h, cfg.max_step);

  while (next < samples.size()) {
    const double target = samples[next];
    if (traj.stats.accepted + traj.stats.rejected >= cfg.max_steps) throw IntegrationError(t, "step budget exhausted");
    double step = std::min(h, target - t);
    bool hits = step >= target - t;
    if (hits) step = target - t;
    const bool truncated = step < h;

    if (cfg.method == Method::rk4) {
      step = std::min(cfg.dt, target - t);
      hits = step >= target - t;
      detail::axpy(tmp, x, 0.5 * step, k1);
      k2 = f(t + 0.5 * step, tmp);
      detail::axpy(tmp, x, 0.5 * step, k2);
      k3 = f(t + 0.5 * step, tmp);
      detail::axpy(tmp, x, step, k3);
      k4 = f(t + step, tmp);
      for (std::size_t i = 0; i < n; ++i) x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t = hits ? target : t + step;
      k1 = f(t, x);
      ++traj.stats.accepted;
    } else {
      // Dormand-Prince 5(4), FSAL.
      constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
      constexpr double a21 = 1.0 / 5;
      constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
      constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
      constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
      constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                       a65 = -5103.0 / 18656;
      constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
      constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                       e6 = 22.0 / 525, e7 = -1.0 / 40;

      if (step < cfg.min_step && !hits) throw IntegrationError(t, "step size underflow");
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + step * a21 * k1[i];
      k2 = f(t + c2 * step, tmp);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + step * (a31 * k1[i] + a32 * k2[i]);
      k3 = f(t + c3 * step, tmp);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = f(t + c4 * step, tmp);
      for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = x[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      }
      k5 = f(t + c5 * step, tmp);
      for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = x[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      }
      k6 = f(t + step, tmp);
      for (std::size_t i = 0; i < n; ++i) {
        xn[i] = x[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
      }
      const double t_new = hits ? target : t + step;
      k7 = f(t_new, xn);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::fabs(x[i]), std::fabs(xn[i]));
        err = std::max(err, std::fabs(e) / sc);
      }
      if (!std::isfinite(err)) throw IntegrationError(t, "non-finite error estimate");
      const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (err <= 1.0) {
        t = t_new;
        x.swap(xn);
        k1.swap(k7);
        ++traj.stats.accepted;
        // A step shortened to land on a sample says little about the next one.
        if (!truncated) h = std::min(step * factor, cfg.max_step);
      } else {
        ++traj.stats.rejected;
        h = step * std::max(factor, 0.1);
        if (h < cfg.min_step) throw IntegrationError(t, "step size underflow");
        continue;
      }
    }

    if (hits) {
      rec.record(t, x, k1);
      ++next;
    } else if (every_step) {
      rec.record(t, x, k1);
    }
  }
  return traj;
}

// Running integral of a sampled function f with known slopes f' at the
// samples: trapezoid plus the Hermite end correction h^2/12 (f'_a - f'_b),
// exact for cubics.
inline Vector cumulative_integral(std::span<const double> times, std::span<const double> f,
                                  std::span<const double> slope) {
  if (times.size() != f.size() || f.size() != slope.size()) throw DimensionError("sample sizes differ");
  Vector out(times.size(), 0.0);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = times[i] - times[i - 1];
    out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (slope[i - 1] - slope[i]);
  }
  return out;
}

}  // namespace mechkit
