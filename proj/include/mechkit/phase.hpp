#pragma once

// Phase-space bookkeeping shared by every formalism: variable naming, point
// packing and the field-evaluation record.
//
// Variables are always ordered  [t] q.. (v.. | p.. | v.. p..) [s], i.e. time
// first when present, the action/dissipation coordinate last when present.

#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mechkit/error.hpp"
#include "mechkit/expr.hpp"
#include "mechkit/linalg.hpp"

namespace mechkit {

enum class Side { tangent, cotangent, unified };

inline const char* to_string(Side s) {
  switch (s) {
    case Side::tangent: return "tangent";
    case Side::cotangent: return "cotangent";
    case Side::unified: return "unified";
  }
  return "?";
}

// Names of the coordinates of one mechanical system.
struct Chart {
  std::vector<std::string> coordinates;
  std::vector<std::string> velocities;
  std::vector<std::string> momenta;
  std::string time = "t";
  std::string action = "s";

  std::size_t dof() const noexcept { return coordinates.size(); }

  // Velocity and momentum names follow the coordinate names: q -> v, p;
  // q1 -> v1, p1; r -> vr, pr.
  static Chart from_coordinates(std::vector<std::string> coords) {
    Chart c;
    for (const auto& q : coords) {
      if (q == "q") {
        c.velocities.push_back("v");
        c.momenta.push_back("p");
      } else if (q.size() > 1 && q[0] == 'q' && q.find_first_not_of("0123456789", 1) == std::string::npos) {
        c.velocities.push_back("v" + q.substr(1));
        c.momenta.push_back("p" + q.substr(1));
      } else {
        c.velocities.push_back("v" + q);
        c.momenta.push_back("p" + q);
      }
    }
    c.coordinates = std::move(coords);
    return c;
  }

  void validate() const {
    if (coordinates.empty()) throw ValidationError("a system needs at least one coordinate");
    if (velocities.size() != coordinates.size() || momenta.size() != coordinates.size()) {
      throw ValidationError("velocity/momentum names must match the number of coordinates");
    }
    std::vector<std::string> all = coordinates;
    all.insert(all.end(), velocities.begin(), velocities.end());
    all.insert(all.end(), momenta.begin(), momenta.end());
    all.push_back(time);
    all.push_back(action);
    VarLayout check(all);  // throws on duplicates or bad identifiers
  }
};

struct PhasePoint {
  std::optional<double> t;
  Vector q;
  Vector v;
  Vector p;
  std::optional<double> s;
};

inline std::string describe(const PhasePoint& pt) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  bool first = true;
  auto put = [&](double x) {
    if (!first) os << ", ";
    os << x;
    first = false;
  };
  if (pt.t) put(*pt.t);
  for (double x : pt.q) put(x);
  for (double x : pt.v) put(x);
  for (double x : pt.p) put(x);
  if (pt.s) put(*pt.s);
  os << ')';
  return os.str();
}

// One concrete phase space: which blocks are present and in which order.
class PhaseSpace {
 public:
  PhaseSpace() = default;
  PhaseSpace(Chart chart, Side side, bool with_time, bool with_action)
      : chart_(std::move(chart)), side_(side), time_(with_time), action_(with_action) {
    std::vector<std::string> names;
    if (time_) names.push_back(chart_.time);
    names.insert(names.end(), chart_.coordinates.begin(), chart_.coordinates.end());
    if (side_ != Side::cotangent) names.insert(names.end(), chart_.velocities.begin(), chart_.velocities.end());
    if (side_ != Side::tangent) names.insert(names.end(), chart_.momenta.begin(), chart_.momenta.end());
    if (action_) names.push_back(chart_.action);
    layout_ = VarLayout(std::move(names));
  }

  const Chart& chart() const noexcept { return chart_; }
  Side side() const noexcept { return side_; }
  bool has_time() const noexcept { return time_; }
  bool has_action() const noexcept { return action_; }
  std::size_t dof() const noexcept { return chart_.dof(); }
  std::size_t dim() const noexcept { return layout_.size(); }
  const VarLayout& layout() const noexcept { return layout_; }

  // Slot offsets inside a packed state.
  std::size_t t_index() const { return require(time_, "time"), 0; }
  std::size_t q_index(std::size_t i) const { return (time_ ? 1 : 0) + i; }
  std::size_t v_index(std::size_t i) const {
    require(side_ != Side::cotangent, "velocities");
    return (time_ ? 1 : 0) + dof() + i;
  }
  std::size_t p_index(std::size_t i) const {
    require(side_ != Side::tangent, "momenta");
    return (time_ ? 1 : 0) + dof() * (side_ == Side::unified ? 2 : 1) + i;
  }
  std::size_t s_index() const { return require(action_, "action"), dim() - 1; }

  Vector pack(const PhasePoint& pt) const {
    check(pt);
    Vector x;
    x.reserve(dim());
    if (time_) x.push_back(*pt.t);
    x.insert(x.end(), pt.q.begin(), pt.q.end());
    if (side_ != Side::cotangent) x.insert(x.end(), pt.v.begin(), pt.v.end());
    if (side_ != Side::tangent) x.insert(x.end(), pt.p.begin(), pt.p.end());
    if (action_) x.push_back(*pt.s);
    return x;
  }

  PhasePoint unpack(std::span<const double> x) const {
    if (x.size() != dim()) throw DimensionError("state has wrong dimension");
    PhasePoint pt;
    const std::size_t n = dof();
    if (time_) pt.t = x[0];
    pt.q.assign(x.begin() + q_index(0), x.begin() + q_index(0) + n);
    if (side_ != Side::cotangent) pt.v.assign(x.begin() + v_index(0), x.begin() + v_index(0) + n);
    if (side_ != Side::tangent) pt.p.assign(x.begin() + p_index(0), x.begin() + p_index(0) + n);
    if (action_) pt.s = x[dim() - 1];
    return pt;
  }

  void check(const PhasePoint& pt) const {
    const std::size_t n = dof();
    if (pt.q.size() != n) throw DimensionError("point has " + std::to_string(pt.q.size()) + " coordinates, expected " + std::to_string(n));
    if (side_ != Side::cotangent && pt.v.size() != n) throw DimensionError("point is missing velocities");
    if (side_ != Side::tangent && pt.p.size() != n) throw DimensionError("point is missing momenta");
    if (time_ != pt.t.has_value()) {
      throw ValidationError(time_ ? "point needs a time value" : "point carries a time value the formalism does not use");
    }
    if (action_ != pt.s.has_value()) {
      throw ValidationError(action_ ? "point needs an action value s" : "point carries an action value the formalism does not use");
    }
  }

 private:
  static void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("phase space has no ") + what);
  }

  Chart chart_;
  Side side_ = Side::tangent;
  bool time_ = false;
  bool action_ = false;
  VarLayout layout_;
};

// Components of a vector field at one point, ordered like the phase-space
// layout, plus named diagnostics (energies, residuals, Reeb values).
struct FieldEval {
  std::vector<std::string> names;
  Vector components;
  std::map<std::string, double> diagnostics;

  double operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return components[i];
    }
    throw ValidationError("field has no component along '" + name + "'");
  }

  double diagnostic(const std::string& key) const {
    auto it = diagnostics.find(key);
    if (it == diagnostics.end()) throw ValidationError("field has no diagnostic '" + key + "'");
    return it->second;
  }
};

inline FieldEval make_field(const PhaseSpace& space, Vector components) {
  FieldEval f;
  f.names = space.layout().names();
  f.components = std::move(components);
  return f;
}

}  // namespace mechkit
