#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "mechkit/io.hpp"
#include "mechkit/registry.hpp"
#include "mechkit/system.hpp"

using namespace mechkit;
using mechkit::io::json;

namespace {

// Every expression a spec carries, labelled for failure messages.
std::vector<std::pair<std::string, std::string>> expressions(const SystemSpec& s) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!s.lagrangian.empty()) out.emplace_back("lagrangian", s.lagrangian);
  if (!s.hamiltonian.empty()) out.emplace_back("hamiltonian", s.hamiltonian);
  for (const auto& row : s.metric) {
    for (const auto& e : row) out.emplace_back("metric", e);
  }
  for (const auto& e : s.force) out.emplace_back("force", e);
  if (!s.potential.empty()) out.emplace_back("potential", s.potential);
  for (const auto& e : s.constraints) out.emplace_back("constraint", e);
  for (const auto& y : s.symmetries) {
    for (const auto& e : y.components) out.emplace_back("symmetry " + y.name, e);
    if (!y.quantity.empty()) out.emplace_back("symmetry quantity " + y.name, y.quantity);
  }
  for (const auto& q : s.quantities) {
    out.emplace_back("quantity " + q.name, q.expression);
    if (!q.rate.empty()) out.emplace_back("rate " + q.name, q.rate);
  }
  return out;
}

json kepler_json() { return io::spec_to_json(registry::get("kepler")); }

std::string validation_message(const json& j) {
  try {
    io::spec_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Registry, ListsTheBuiltinSystems) {
  std::set<std::string> ids;
  for (const auto& [id, f] : registry::list()) ids.insert(id);
  for (const char* id : {"harmonic-oscillator", "kepler", "forced-oscillator", "variable-mass-kepler",
                         "damped-oscillator", "kepler-friction", "free-particle", "sphere-geodesic"}) {
    EXPECT_TRUE(ids.count(id)) << id;
    EXPECT_TRUE(registry::contains(id)) << id;
  }
  EXPECT_EQ(ids.size(), registry::builtin().size());  // ids are unique
  EXPECT_FALSE(registry::contains("pendulum"));
}

TEST(Registry, FormalismTags) {
  EXPECT_EQ(registry::get("harmonic-oscillator").formalism, Formalism::symplectic_lagrangian);
  EXPECT_EQ(registry::get("forced-oscillator").formalism, Formalism::cosymplectic);
  EXPECT_EQ(registry::get("variable-mass-kepler").formalism, Formalism::cosymplectic);
  EXPECT_EQ(registry::get("damped-oscillator").formalism, Formalism::contact_lagrangian);
  EXPECT_EQ(registry::get("kepler-friction").formalism, Formalism::contact_lagrangian);
  EXPECT_EQ(registry::get("sphere-geodesic").formalism, Formalism::riemann_newton);
}

TEST(Registry, HarmonicOscillator) {
  const SystemSpec s = registry::get("harmonic-oscillator");
  EXPECT_EQ(s.coordinates, (std::vector<std::string>{"q"}));
  EXPECT_EQ(s.params.at("m"), 1.0);
  EXPECT_EQ(s.params.at("k"), 1.0);
  const VarLayout l({"q", "v"});
  const Params P{{"m", 2.0}, {"k", 3.0}};
  // 1/2 (m v^2 - k q^2)
  EXPECT_DOUBLE_EQ(eval(parse(s.lagrangian), l, Vector{0.5, 1.5}, P), 0.5 * (2.0 * 2.25 - 3.0 * 0.25));
  EXPECT_FALSE(s.erratum.empty());
}

TEST(Registry, KeplerFriction) {
  const SystemSpec s = registry::get("kepler-friction");
  const VarLayout l({"r", "phi", "vr", "vphi", "s"});
  const Params P{{"m", 2.0}, {"K", -1.5}, {"gamma", 0.3}};
  const Vector x{1.5, 0.2, 0.4, -0.7, 0.9};
  EXPECT_DOUBLE_EQ(eval(parse(s.lagrangian), l, x, P),
                   0.5 * 2.0 * (0.16 + 2.25 * 0.49) + 1.5 / 1.5 - 0.3 * 0.9);
  ASSERT_EQ(s.symmetries.size(), 1u);
  EXPECT_EQ(s.symmetries[0].components, (std::vector<std::string>{"0", "1", "0", "0", "0"}));
  const auto it = std::find_if(s.quantities.begin(), s.quantities.end(),
                               [](const QuantitySpec& q) { return q.name == "angular-momentum"; });
  ASSERT_NE(it, s.quantities.end());
  EXPECT_EQ(it->behavior, QuantitySpec::Behavior::decay);
  EXPECT_EQ(it->rate, "gamma");
}

TEST(Registry, VariableMassKeplerCarriesTheMassLaw) {
  const SystemSpec s = registry::get("variable-mass-kepler");
  EXPECT_TRUE(uses_time(s.formalism));
  EXPECT_EQ(s.params.at("kappa"), 0.1);
  const Expr L = parse(s.lagrangian);
  EXPECT_TRUE(free_identifiers(L).count("t"));
  const System sys(s, {{"kappa", 1.0}});
  EXPECT_EQ(sys.params().at("kappa"), 1.0);
}

TEST(Registry, UnknownIdNamesTheRegisteredOnes) {
  try {
    registry::get("pendulum");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("kepler-friction"), std::string::npos);
  }
}

TEST(Registry, EverySpecValidatesAndIsRegular) {
  for (const SystemSpec& s : registry::builtin()) {
    EXPECT_NO_THROW(validate(s)) << s.id;
    const System sys(s);
    EXPECT_NO_THROW(sys.check_regular()) << s.id;
    EXPECT_TRUE(sys.supports(sys.primary())) << s.id;
  }
}

// Parse, print, parse again: the printed form is a fixed point.
TEST(Registry, ExpressionsReserializeStably) {
  for (const SystemSpec& s : registry::builtin()) {
    for (const auto& [what, text] : expressions(s)) {
      const Expr e = parse(text);
      const std::string once = to_string(e);
      const Expr back = parse(once);
      EXPECT_EQ(to_string(back), once) << s.id << ' ' << what;
      EXPECT_TRUE(back == e) << s.id << ' ' << what << ": " << text << " -> " << once;
    }
  }
}

TEST(Registry, JsonRoundTrip) {
  for (const SystemSpec& s : registry::builtin()) {
    const json j = io::spec_to_json(s);
    const SystemSpec back = io::spec_from_json(j);
    EXPECT_EQ(io::spec_to_json(back), j) << s.id;
    EXPECT_EQ(back.id, s.id);
    EXPECT_EQ(back.formalism, s.formalism);
    EXPECT_EQ(back.params, s.params);
    EXPECT_EQ(back.initial, s.initial);
    // and through text
    EXPECT_EQ(io::spec_to_json(io::spec_from_json(json::parse(j.dump(2)))), j) << s.id;
  }
}

TEST(Registry, FormalismNames) {
  for (const auto& [f, name] : kFormalismNames) {
    EXPECT_EQ(formalism_from_string(name), f);
    EXPECT_STREQ(to_string(f), name);
  }
  EXPECT_THROW(formalism_from_string("lagrangian"), ValidationError);
}

// The shipped schema lists exactly the keys the loader accepts.
TEST(Validation, SchemaMatchesTheLoader) {
  std::ifstream in(MECHKIT_DOCS_DIR "/system.schema.json");
  ASSERT_TRUE(in);
  const json schema = json::parse(in);
  std::set<std::string> documented, accepted(std::begin(io::kSystemKeys), std::end(io::kSystemKeys));
  for (const auto& [key, _] : schema["properties"].items()) documented.insert(key);
  EXPECT_EQ(documented, accepted);
  std::set<std::string> formalisms;
  for (const auto& f : schema["properties"]["formalism"]["enum"]) formalisms.insert(f.get<std::string>());
  for (const auto& [f, name] : kFormalismNames) EXPECT_TRUE(formalisms.count(name)) << name;
  EXPECT_EQ(formalisms.size(), std::size(kFormalismNames));
}

TEST(Validation, RejectsBadFiles) {
  json j = kepler_json();
  j["colour"] = "red";
  EXPECT_NE(validation_message(j).find("unknown key"), std::string::npos);

  j = kepler_json();
  j.erase("coordinates");
  EXPECT_NE(validation_message(j).find("coordinates"), std::string::npos);

  j = kepler_json();
  j["lagrangian"] = "0.5*m*vr^2 - K/x";
  EXPECT_NE(validation_message(j).find("'x'"), std::string::npos);

  j = kepler_json();
  j["lagrangian"] = "0.5*m*(vr^2";
  EXPECT_NE(validation_message(j).find("lagrangian"), std::string::npos);

  j = kepler_json();
  j["formalism"] = "newtonian";
  EXPECT_NE(validation_message(j).find("unknown formalism"), std::string::npos);

  j = kepler_json();
  j["params"]["r"] = 1.0;
  EXPECT_NE(validation_message(j).find("shadows"), std::string::npos);

  j = kepler_json();
  j["params"]["m"] = "one";
  EXPECT_FALSE(validation_message(j).empty());

  j = kepler_json();
  j["initial"]["pr"] = 0.0;
  EXPECT_NE(validation_message(j).find("'pr'"), std::string::npos);

  j = kepler_json();
  j["symmetries"][0]["components"] = json::array({"0", "1"});
  EXPECT_NE(validation_message(j).find("4 components"), std::string::npos);

  j = kepler_json();
  j["quantities"][0]["behavior"] = "decay";
  EXPECT_NE(validation_message(j).find("no rate"), std::string::npos);

  j = kepler_json();
  j["metric"] = json::array({json::array({"1", "0"}), json::array({"0", "r^2"})});
  EXPECT_NE(validation_message(j).find("riemann-newton"), std::string::npos);

  EXPECT_NE(validation_message(json::array()).find("object"), std::string::npos);
}

TEST(Validation, TimeAndActionOnlyWhereTheFormalismHasThem) {
  json j = kepler_json();
  j["lagrangian"] = "0.5*m*(vr^2 + r^2*vphi^2) - K/r - gamma*s";
  j["params"]["gamma"] = 0.1;
  EXPECT_NE(validation_message(j).find("'s'"), std::string::npos);
  j["formalism"] = "contact-lagrangian";
  j["initial"]["s"] = 0.0;
  j["symmetries"][0]["components"] = {"0", "1", "0", "0", "0"};
  EXPECT_EQ(validation_message(j), "");

  j = kepler_json();
  j["lagrangian"] = "0.5*m*(vr^2 + r^2*vphi^2) - K/r*cos(t)";
  EXPECT_NE(validation_message(j).find("'t'"), std::string::npos);
}

TEST(Validation, RiemannSpecs) {
  json j = io::spec_to_json(registry::get("sphere-geodesic"));
  j["metric"] = json::array({json::array({"1", "0"})});
  EXPECT_NE(validation_message(j).find("rows"), std::string::npos);

  j = io::spec_to_json(registry::get("sphere-geodesic"));
  j["metric"][1][1] = "sin(theta)^2*vtheta";
  EXPECT_NE(validation_message(j).find("'vtheta'"), std::string::npos);

  j = io::spec_to_json(registry::get("sphere-geodesic"));
  j["force"] = json::array({"0", "0"});
  j["potential"] = "cos(theta)";
  EXPECT_NE(validation_message(j).find("not both"), std::string::npos);
}

TEST(Validation, SingularLagrangianSurfacesAtConstruction) {
  json j = kepler_json();
  j["lagrangian"] = "r*vr + vphi^2";
  j.erase("hamiltonian");
  j.erase("quantities");
  j["symmetries"][0].erase("quantity");
  const System sys(io::spec_from_json(j));
  EXPECT_THROW(sys.check_regular(), SingularLagrangian);
}

TEST(Io, ReadErrors) {
  EXPECT_THROW(io::load_spec("/nonexistent/system.json"), ValidationError);
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(2.0), "2");
}
