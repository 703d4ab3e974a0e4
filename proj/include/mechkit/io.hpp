#pragma once

// JSON system files and trajectory output. Needs nlohmann/json on the include
// path; the rest of the library does not.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>  // nlohmann/json

#include "mechkit/integrate.hpp"
#include "mechkit/registry.hpp"

namespace mechkit::io {

using json = nlohmann::ordered_json;

// 17 significant digits round-trip every double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("system file is missing \"") + key + "\"");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("\"" + what + "\" has the wrong type");
  }
}

inline std::string behavior_name(QuantitySpec::Behavior b) {
  return b == QuantitySpec::Behavior::conserved ? "conserved" : "decay";
}

}  // namespace detail

// Known top-level keys; anything else is rejected so typos surface.
inline constexpr const char* kSystemKeys[] = {"id",     "formalism",   "description", "coordinates", "lagrangian",
                                              "hamiltonian", "metric", "force",       "potential",   "constraints",
                                              "params", "initial",     "symmetries",  "quantities",  "erratum"};

inline SystemSpec spec_from_json(const json& j) {
  using detail::get_as;
  if (!j.is_object()) throw ValidationError("system file must hold a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kSystemKeys) known = known || key == k;
    if (!known) throw ValidationError("unknown key \"" + key + "\" in system file");
  }
  SystemSpec s;
  s.id = get_as<std::string>(detail::field(j, "id"), "id");
  s.formalism = formalism_from_string(get_as<std::string>(detail::field(j, "formalism"), "formalism"));
  s.coordinates = get_as<std::vector<std::string>>(detail::field(j, "coordinates"), "coordinates");
  if (j.contains("description")) s.description = get_as<std::string>(j["description"], "description");
  if (j.contains("lagrangian")) s.lagrangian = get_as<std::string>(j["lagrangian"], "lagrangian");
  if (j.contains("hamiltonian")) s.hamiltonian = get_as<std::string>(j["hamiltonian"], "hamiltonian");
  if (j.contains("metric")) s.metric = get_as<std::vector<std::vector<std::string>>>(j["metric"], "metric");
  if (j.contains("force")) s.force = get_as<std::vector<std::string>>(j["force"], "force");
  if (j.contains("potential")) s.potential = get_as<std::string>(j["potential"], "potential");
  if (j.contains("constraints")) s.constraints = get_as<std::vector<std::string>>(j["constraints"], "constraints");
  if (j.contains("params")) s.params = get_as<std::map<std::string, double>>(j["params"], "params");
  if (j.contains("initial")) s.initial = get_as<std::map<std::string, double>>(j["initial"], "initial");
  if (j.contains("erratum")) s.erratum = get_as<std::string>(j["erratum"], "erratum");
  if (j.contains("symmetries")) {
    for (const auto& y : get_as<json::array_t>(j["symmetries"], "symmetries")) {
      SymmetrySpec sy;
      sy.name = get_as<std::string>(detail::field(y, "name"), "symmetries.name");
      sy.components = get_as<std::vector<std::string>>(detail::field(y, "components"), "symmetries.components");
      if (y.contains("quantity")) sy.quantity = get_as<std::string>(y["quantity"], "symmetries.quantity");
      s.symmetries.push_back(std::move(sy));
    }
  }
  if (j.contains("quantities")) {
    for (const auto& q : get_as<json::array_t>(j["quantities"], "quantities")) {
      QuantitySpec qs;
      qs.name = get_as<std::string>(detail::field(q, "name"), "quantities.name");
      qs.expression = get_as<std::string>(detail::field(q, "expression"), "quantities.expression");
      const std::string b = q.contains("behavior") ? get_as<std::string>(q["behavior"], "quantities.behavior") : "conserved";
      if (b == "conserved") {
        qs.behavior = QuantitySpec::Behavior::conserved;
      } else if (b == "decay") {
        qs.behavior = QuantitySpec::Behavior::decay;
      } else {
        throw ValidationError("quantity behavior must be \"conserved\" or \"decay\"");
      }
      if (q.contains("rate")) qs.rate = get_as<std::string>(q["rate"], "quantities.rate");
      if (q.contains("tolerance")) qs.tolerance = get_as<double>(q["tolerance"], "quantities.tolerance");
      s.quantities.push_back(std::move(qs));
    }
  }
  validate(s);
  return s;
}

inline json spec_to_json(const SystemSpec& s) {
  json j;
  j["id"] = s.id;
  j["formalism"] = to_string(s.formalism);
  if (!s.description.empty()) j["description"] = s.description;
  j["coordinates"] = s.coordinates;
  if (!s.lagrangian.empty()) j["lagrangian"] = s.lagrangian;
  if (!s.hamiltonian.empty()) j["hamiltonian"] = s.hamiltonian;
  if (!s.metric.empty()) j["metric"] = s.metric;
  if (!s.force.empty()) j["force"] = s.force;
  if (!s.potential.empty()) j["potential"] = s.potential;
  if (!s.constraints.empty()) j["constraints"] = s.constraints;
  j["params"] = json::object();
  for (const auto& [k, v] : s.params) j["params"][k] = v;
  j["initial"] = json::object();
  for (const auto& [k, v] : s.initial) j["initial"][k] = v;
  if (!s.symmetries.empty()) {
    j["symmetries"] = json::array();
    for (const auto& y : s.symmetries) {
      json o{{"name", y.name}, {"components", y.components}};
      if (!y.quantity.empty()) o["quantity"] = y.quantity;
      j["symmetries"].push_back(std::move(o));
    }
  }
  if (!s.quantities.empty()) {
    j["quantities"] = json::array();
    for (const auto& q : s.quantities) {
      json o{{"name", q.name}, {"expression", q.expression}, {"behavior", detail::behavior_name(q.behavior)}};
      if (!q.rate.empty()) o["rate"] = q.rate;
      o["tolerance"] = q.tolerance;
      j["quantities"].push_back(std::move(o));
    }
  }
  if (!s.erratum.empty()) j["erratum"] = s.erratum;
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline SystemSpec load_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

// Header `t,<states...>,<monitors...>`, one row per sample. A time
// coordinate in the state duplicates the first column and is left out.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << "t";
  for (const auto& n : traj.state_names) {
    if (n != "t") out << ',' << n;
  }
  for (const auto& n : traj.monitor_names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    for (std::size_t j = 0; j < traj.states[k].size(); ++j) {
      if (traj.state_names[j] != "t") out << ',' << format_double(traj.states[k][j]);
    }
    for (const auto& n : traj.monitor_names) out << ',' << format_double(traj.monitors.at(n)[k]);
    out << '\n';
  }
  return out.str();
}

inline json trajectory_json(const Trajectory& traj) {
  json j;
  j["system"] = traj.system_id;
  j["columns"] = json::array({"t"});
  for (const auto& n : traj.state_names) j["columns"].push_back(n);
  for (const auto& n : traj.monitor_names) j["columns"].push_back(n);
  j["rows"] = json::array();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    json row = json::array({traj.times[k]});
    for (double x : traj.states[k]) row.push_back(x);
    for (const auto& n : traj.monitor_names) row.push_back(traj.monitors.at(n)[k]);
    j["rows"].push_back(std::move(row));
  }
  j["config"] = {{"method", to_string(traj.config.method)},
                 {"abs_tol", traj.config.abs_tol},
                 {"rel_tol", traj.config.rel_tol},
                 {"dt", traj.config.dt}};
  j["stats"] = {{"accepted", traj.stats.accepted},
                {"rejected", traj.stats.rejected},
                {"evaluations", traj.stats.evaluations}};
  return j;
}

}  // namespace mechkit::io
