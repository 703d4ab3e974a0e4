#pragma once

// Built-in example systems. Every entry is plain data in the same shape as
// a system file, so it can be exported, edited and read back.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mechkit/error.hpp"
#include "mechkit/expr.hpp"
#include "mechkit/phase.hpp"

namespace mechkit {

enum class Formalism {
  symplectic_lagrangian,
  symplectic_hamiltonian,
  cosymplectic,
  contact_lagrangian,
  contact_hamiltonian,
  unified_autonomous,
  unified_extended,
  unified_contact,
  riemann_newton,
};

inline constexpr std::pair<Formalism, const char*> kFormalismNames[] = {
    {Formalism::symplectic_lagrangian, "symplectic-lagrangian"},
    {Formalism::symplectic_hamiltonian, "symplectic-hamiltonian"},
    {Formalism::cosymplectic, "cosymplectic"},
    {Formalism::contact_lagrangian, "contact-lagrangian"},
    {Formalism::contact_hamiltonian, "contact-hamiltonian"},
    {Formalism::unified_autonomous, "unified-autonomous"},
    {Formalism::unified_extended, "unified-extended"},
    {Formalism::unified_contact, "unified-contact"},
    {Formalism::riemann_newton, "riemann-newton"},
};

inline const char* to_string(Formalism f) {
  for (const auto& [k, name] : kFormalismNames) {
    if (k == f) return name;
  }
  return "?";
}

inline Formalism formalism_from_string(const std::string& s) {
  for (const auto& [k, name] : kFormalismNames) {
    if (s == name) return k;
  }
  std::string known;
  for (const auto& [k, name] : kFormalismNames) known += std::string(known.empty() ? "" : ", ") + name;
  throw ValidationError("unknown formalism '" + s + "' (expected one of " + known + ")");
}

inline bool uses_time(Formalism f) { return f == Formalism::cosymplectic || f == Formalism::unified_extended; }
inline bool uses_action(Formalism f) {
  return f == Formalism::contact_lagrangian || f == Formalism::contact_hamiltonian || f == Formalism::unified_contact;
}

// A generator given over the velocity phase space of the system (including t
// or s when the formalism carries them), with the quantity it should produce.
struct SymmetrySpec {
  std::string name;
  std::vector<std::string> components;
  std::string quantity;  // expected f_Y, or the dissipated quantity for contact systems
};

// A quantity expected to be conserved, or to decay at the given rate.
struct QuantitySpec {
  enum class Behavior { conserved, decay };
  std::string name;
  std::string expression;
  Behavior behavior = Behavior::conserved;
  std::string rate;  // decay only
  double tolerance = 1e-6;
};

struct SystemSpec {
  std::string id;
  Formalism formalism = Formalism::symplectic_lagrangian;
  std::string description;
  std::vector<std::string> coordinates;
  std::string lagrangian;
  std::string hamiltonian;
  std::vector<std::vector<std::string>> metric;  // riemann-newton
  std::vector<std::string> force;                // contravariant components over (t, q, v)
  std::string potential;                         // alternative to force
  std::vector<std::string> constraints;          // nonholonomic, linear in v
  Params params;
  std::map<std::string, double> initial;
  std::vector<SymmetrySpec> symmetries;
  std::vector<QuantitySpec> quantities;
  std::string erratum;  // corrections applied to the published formulas

  Chart chart() const {
    Chart c = Chart::from_coordinates(coordinates);
    c.validate();
    return c;
  }
};

namespace detail {

inline void check_identifiers(const std::string& what, const std::string& text, const std::set<std::string>& allowed,
                              const Params& params) {
  Expr e;
  try {
    e = parse(text);
  } catch (const ParseError& err) {
    throw ValidationError(what + ": " + err.what());
  }
  for (const auto& id : free_identifiers(e)) {
    if (!allowed.count(id) && !params.count(id)) {
      throw ValidationError(what + " mentions '" + id + "', which is neither a variable nor a parameter");
    }
  }
}

}  // namespace detail

// Structural checks: names, parse, free identifiers and the presence of t
// and s exactly where the formalism needs them. Regularity needs numbers and
// is checked by the system facade.
inline void validate(const SystemSpec& s) {
  if (s.id.empty()) throw ValidationError("system id is empty");
  const Chart c = s.chart();
  const std::size_t n = c.dof();
  const bool t = uses_time(s.formalism), a = uses_action(s.formalism);

  std::set<std::string> base(c.coordinates.begin(), c.coordinates.end());
  std::set<std::string> tangent = base, cotangent = base;
  tangent.insert(c.velocities.begin(), c.velocities.end());
  cotangent.insert(c.momenta.begin(), c.momenta.end());
  if (t) tangent.insert(c.time), cotangent.insert(c.time);
  if (a) tangent.insert(c.action), cotangent.insert(c.action);
  for (const auto& [name, _] : s.params) {
    if (tangent.count(name) || cotangent.count(name) || name == c.time || name == c.action) {
      throw ValidationError("parameter '" + name + "' shadows a phase-space variable");
    }
  }

  if (s.formalism == Formalism::riemann_newton) {
    if (s.metric.size() != n) throw ValidationError("metric needs " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i) {
      if (s.metric[i].size() != n) throw ValidationError("metric row " + std::to_string(i) + " has the wrong length");
      for (std::size_t j = 0; j < n; ++j) {
        detail::check_identifiers("metric entry (" + std::to_string(i) + "," + std::to_string(j) + ")", s.metric[i][j],
                                  base, s.params);
      }
    }
    if (!s.force.empty() && !s.potential.empty()) throw ValidationError("give either force or potential, not both");
    if (!s.force.empty() && s.force.size() != n) throw ValidationError("force needs one component per coordinate");
    std::set<std::string> tqv = tangent;
    tqv.insert(c.time);
    for (std::size_t k = 0; k < s.force.size(); ++k) {
      detail::check_identifiers("force component " + std::to_string(k), s.force[k], tqv, s.params);
    }
    if (!s.potential.empty()) detail::check_identifiers("potential", s.potential, base, s.params);
    for (const auto& ph : s.constraints) detail::check_identifiers("constraint", ph, tangent, s.params);
    if (!s.lagrangian.empty()) detail::check_identifiers("lagrangian", s.lagrangian, tangent, s.params);
  } else {
    const bool hamiltonian_only =
        s.formalism == Formalism::symplectic_hamiltonian || s.formalism == Formalism::contact_hamiltonian;
    if (hamiltonian_only && s.hamiltonian.empty()) throw ValidationError("a Hamiltonian formalism needs a hamiltonian");
    if (!hamiltonian_only && s.lagrangian.empty()) throw ValidationError("this formalism needs a lagrangian");
    if (!s.lagrangian.empty()) detail::check_identifiers("lagrangian", s.lagrangian, tangent, s.params);
    if (!s.hamiltonian.empty()) detail::check_identifiers("hamiltonian", s.hamiltonian, cotangent, s.params);
    if (!s.metric.empty() || !s.force.empty() || !s.potential.empty() || !s.constraints.empty()) {
      throw ValidationError("metric, force, potential and constraints belong to riemann-newton systems");
    }
  }

  // The state variables of the primary representation.
  const bool ham = s.formalism == Formalism::symplectic_hamiltonian || s.formalism == Formalism::contact_hamiltonian;
  const bool uni = s.formalism == Formalism::unified_autonomous || s.formalism == Formalism::unified_extended ||
                   s.formalism == Formalism::unified_contact;
  std::set<std::string> state = ham ? cotangent : tangent;
  if (uni) state.insert(c.momenta.begin(), c.momenta.end());
  for (const auto& [name, _] : s.initial) {
    // momenta of unified systems are recomputed from the constraint
    if (!state.count(name)) throw ValidationError("initial value for unknown variable '" + name + "'");
  }

  const std::set<std::string>& sym_vars = tangent;
  for (const auto& y : s.symmetries) {
    const std::size_t dim = 2 * n + (t ? 1 : 0) + (a ? 1 : 0);
    if (y.components.size() != dim) {
      throw ValidationError("symmetry '" + y.name + "' needs " + std::to_string(dim) + " components");
    }
    for (const auto& comp : y.components) detail::check_identifiers("symmetry '" + y.name + "'", comp, sym_vars, s.params);
    if (!y.quantity.empty()) detail::check_identifiers("symmetry '" + y.name + "' quantity", y.quantity, sym_vars, s.params);
  }
  std::set<std::string> qvars = state;
  qvars.insert(c.time);
  for (const auto& q : s.quantities) {
    detail::check_identifiers("quantity '" + q.name + "'", q.expression, qvars, s.params);
    if (q.behavior == QuantitySpec::Behavior::decay) {
      if (q.rate.empty()) throw ValidationError("quantity '" + q.name + "' decays but has no rate");
      detail::check_identifiers("quantity '" + q.name + "' rate", q.rate, qvars, s.params);
    }
  }
}

namespace registry {

inline std::vector<SystemSpec> builtin() {
  std::vector<SystemSpec> out;

  {
    SystemSpec s;
    s.id = "harmonic-oscillator";
    s.formalism = Formalism::symplectic_lagrangian;
    s.description = "Point mass on a line under Hooke's law.";
    s.coordinates = {"q"};
    s.lagrangian = "0.5*(m*v^2 - k*q^2)";
    s.hamiltonian = "p^2/(2*m) + 0.5*k*q^2";
    s.params = {{"m", 1.0}, {"k", 1.0}};
    s.initial = {{"q", 1.0}, {"v", 0.0}};
    s.quantities = {{"energy", "0.5*(m*v^2 + k*q^2)", QuantitySpec::Behavior::conserved, "", 1e-8}};
    s.erratum =
        "The published canonical Hamiltonian reads p^2/(2m) + k q^2; the Legendre transform of the Lagrangian "
        "gives p^2/(2m) + k q^2/2, which is used here.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "kepler";
    s.formalism = Formalism::symplectic_lagrangian;
    s.description = "Particle under a Newtonian central force in polar coordinates; K < 0 is attractive.";
    s.coordinates = {"r", "phi"};
    s.lagrangian = "0.5*m*(vr^2 + r^2*vphi^2) - K/r";
    s.hamiltonian = "pr^2/(2*m) + pphi^2/(2*m*r^2) + K/r";
    s.params = {{"m", 1.0}, {"K", -1.0}};
    s.initial = {{"r", 1.0}, {"phi", 0.0}, {"vr", 0.0}, {"vphi", 1.0}};
    s.symmetries = {{"rotation", {"0", "1", "0", "0"}, "m*r^2*vphi"}};
    s.quantities = {{"angular-momentum", "m*r^2*vphi", QuantitySpec::Behavior::conserved, "", 1e-9},
                    {"energy", "0.5*m*(vr^2 + r^2*vphi^2) + K/r", QuantitySpec::Behavior::conserved, "", 1e-8}};
    s.erratum = "K is only required to be nonzero; the default K = -1 gives bound orbits.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "forced-oscillator";
    s.formalism = Formalism::cosymplectic;
    s.description = "Harmonic oscillator driven by the periodic force A cos(w t).";
    s.coordinates = {"q"};
    s.lagrangian = "0.5*(m*v^2 - k*q^2) + A*q*cos(w*t)";
    s.hamiltonian = "p^2/(2*m) + 0.5*k*q^2 - A*q*cos(w*t)";
    s.params = {{"m", 1.0}, {"k", 1.0}, {"A", 2.0}, {"w", 0.5}};
    s.initial = {{"t", 0.0}, {"q", 1.0}, {"v", 0.0}};
    s.erratum =
        "The published Hamiltonian has k q^2 where the Legendre transform gives k q^2/2. Amplitude and frequency "
        "are not fixed in the text; the defaults keep w away from the resonance w^2 = k/m.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "variable-mass-kepler";
    s.formalism = Formalism::cosymplectic;
    s.description = "Kepler problem with the time-dependent mass m(t) = m0 (1 + kappa t).";
    s.coordinates = {"r", "phi"};
    s.lagrangian = "0.5*m0*(1 + kappa*t)*(vr^2 + r^2*vphi^2) - K/r";
    s.hamiltonian = "(pr^2 + pphi^2/r^2)/(2*m0*(1 + kappa*t)) + K/r";
    s.params = {{"m0", 1.0}, {"kappa", 0.1}, {"K", -1.0}};
    s.initial = {{"t", 0.0}, {"r", 1.0}, {"phi", 0.0}, {"vr", 0.0}, {"vphi", 1.0}};
    s.symmetries = {{"rotation", {"0", "0", "1", "0", "0"}, "m0*(1 + kappa*t)*r^2*vphi"}};
    s.quantities = {
        {"angular-momentum", "m0*(1 + kappa*t)*r^2*vphi", QuantitySpec::Behavior::conserved, "", 1e-6}};
    s.erratum =
        "The mass law m(t) is left open in the text; m0 (1 + kappa t) with kappa = 0.1 is an engine default. The "
        "published integral-curve equation for v_phi carries +(m'/m) v_phi; the vector field above it, and the "
        "Euler-Lagrange equations, give -(m'/m) v_phi, which is what the engine computes.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "damped-oscillator";
    s.formalism = Formalism::contact_lagrangian;
    s.description = "Harmonic oscillator with linear friction, as a contact Lagrangian system.";
    s.coordinates = {"q"};
    s.lagrangian = "0.5*m*v^2 - 0.5*k*q^2 - gamma*s";
    s.hamiltonian = "p^2/(2*m) + 0.5*k*q^2 + gamma*s";
    s.params = {{"m", 1.0}, {"k", 1.0}, {"gamma", 0.1}};
    s.initial = {{"q", 1.0}, {"v", 0.0}, {"s", 0.0}};
    s.quantities = {{"energy", "0.5*m*v^2 + 0.5*k*q^2 + gamma*s", QuantitySpec::Behavior::decay, "gamma", 1e-5}};
    s.erratum =
        "The published Hamiltonian has p^2/(2m^2); the Legendre transform of the Lagrangian gives p^2/(2m). The "
        "two agree at the default m = 1.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "kepler-friction";
    s.formalism = Formalism::contact_lagrangian;
    s.description = "Kepler problem in a medium with linear friction.";
    s.coordinates = {"r", "phi"};
    s.lagrangian = "0.5*m*(vr^2 + r^2*vphi^2) - K/r - gamma*s";
    s.hamiltonian = "pr^2/(2*m) + pphi^2/(2*m*r^2) + K/r + gamma*s";
    s.params = {{"m", 1.0}, {"K", -1.0}, {"gamma", 0.1}};
    s.initial = {{"r", 1.0}, {"phi", 0.0}, {"vr", 0.0}, {"vphi", 1.0}, {"s", 0.0}};
    s.symmetries = {{"rotation", {"0", "1", "0", "0", "0"}, "m*r^2*vphi"}};
    s.quantities = {
        {"angular-momentum", "m*r^2*vphi", QuantitySpec::Behavior::decay, "gamma", 1e-6},
        {"energy", "0.5*m*(vr^2 + r^2*vphi^2) + K/r + gamma*s", QuantitySpec::Behavior::decay, "gamma", 1e-5}};
    s.erratum =
        "One intermediate component reads g_phi = -2 v_phi v_r / r - gamma r^2 v_phi; the vector field that follows "
        "it, and the Herglotz equations, have -gamma v_phi, which is what the engine computes.";
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "free-particle";
    s.formalism = Formalism::symplectic_lagrangian;
    s.description = "Free particle on a line.";
    s.coordinates = {"q"};
    s.lagrangian = "0.5*m*v^2";
    s.hamiltonian = "p^2/(2*m)";
    s.params = {{"m", 1.0}};
    s.initial = {{"q", 0.0}, {"v", 1.0}};
    s.symmetries = {{"translation", {"1", "0"}, "m*v"}};
    s.quantities = {{"momentum", "m*v", QuantitySpec::Behavior::conserved, "", 1e-12}};
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "sphere-geodesic";
    s.formalism = Formalism::riemann_newton;
    s.description = "Free motion on the sphere of radius R (geodesics).";
    s.coordinates = {"theta", "phi"};
    s.metric = {{"R^2", "0"}, {"0", "R^2*sin(theta)^2"}};
    s.force = {"0", "0"};
    s.lagrangian = "0.5*R^2*(vtheta^2 + sin(theta)^2*vphi^2)";
    s.params = {{"R", 1.0}};
    s.initial = {{"theta", 1.5707963267948966}, {"phi", 0.0}, {"vtheta", 0.0}, {"vphi", 1.0}};
    s.quantities = {{"speed2", "R^2*(vtheta^2 + sin(theta)^2*vphi^2)", QuantitySpec::Behavior::conserved, "", 1e-8}};
    out.push_back(std::move(s));
  }
  {
    SystemSpec s;
    s.id = "polar-kepler";
    s.formalism = Formalism::riemann_newton;
    s.description = "The Kepler problem as a Newtonian system on the plane in polar coordinates (unit mass).";
    s.coordinates = {"r", "phi"};
    s.metric = {{"1", "0"}, {"0", "r^2"}};
    s.potential = "K/r";
    s.lagrangian = "0.5*(vr^2 + r^2*vphi^2) - K/r";
    s.params = {{"K", -1.0}};
    s.initial = {{"r", 1.0}, {"phi", 0.0}, {"vr", 0.0}, {"vphi", 1.0}};
    s.quantities = {{"angular-momentum", "r^2*vphi", QuantitySpec::Behavior::conserved, "", 1e-9},
                    {"energy", "0.5*(vr^2 + r^2*vphi^2) + K/r", QuantitySpec::Behavior::conserved, "", 1e-8}};
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<std::pair<std::string, Formalism>> list() {
  std::vector<std::pair<std::string, Formalism>> ids;
  for (const auto& s : builtin()) ids.emplace_back(s.id, s.formalism);
  return ids;
}

inline bool contains(const std::string& id) {
  const auto all = builtin();
  return std::any_of(all.begin(), all.end(), [&](const SystemSpec& s) { return s.id == id; });
}

inline SystemSpec get(const std::string& id) {
  for (auto& s : builtin()) {
    if (s.id == id) return s;
  }
  std::string known;
  for (const auto& [name, _] : list()) known += (known.empty() ? "" : ", ") + name;
  throw ValidationError("unknown system '" + id + "' (registered: " + known + ")");
}

}  // namespace registry
}  // namespace mechkit
