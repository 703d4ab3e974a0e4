// mechkit command-line front end. Every command prints one JSON report on
// stdout; the exit code is 0 when every expectation in it passed, 1 when one
// failed and 2 when the command could not run.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mechkit/io.hpp"
#include "mechkit/system.hpp"

namespace mk = mechkit;
using json = mk::io::json;

namespace {

// ---------------------------------------------------------------------------
// Logging on stderr, controlled by MECHKIT_LOG=error|warn|info|debug.

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("MECHKIT_LOG");
    const std::string s = env ? env : "warn";
    if (s == "error") return Level::error;
    if (s == "info") return Level::info;
    if (s == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

void log(Level l, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (l <= log_level()) std::cerr << "[mechkit " << names[static_cast<int>(l)] << "] " << msg << '\n';
}

// ---------------------------------------------------------------------------

class Report {
 public:
  explicit Report(std::string command) { body_["command"] = std::move(command); }

  json& operator[](const char* key) { return body_[key]; }

  // Passes when value <= tolerance.
  void expect(const std::string& name, double value, double tolerance) {
    const bool ok = std::isfinite(value) && value <= tolerance;
    expectations_.push_back({{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", ok}});
    pass_ = pass_ && ok;
    log(ok ? Level::debug : Level::warn, name + ": " + mk::io::format_double(value) + (ok ? " <= " : " > ") +
                                             mk::io::format_double(tolerance));
  }

  void error(const std::string& what) {
    body_["error"] = what;
    failed_to_run_ = true;
  }

  bool pass() const { return pass_ && !failed_to_run_; }
  bool failed_to_run() const { return failed_to_run_; }

  json finish(double seconds) const {
    json out = body_;
    out["expectations"] = expectations_;
    out["pass"] = pass();
    out["wall_time_s"] = seconds;  // the only nondeterministic field
    return out;
  }

 private:
  json body_;
  json expectations_ = json::array();
  bool pass_ = true;
  bool failed_to_run_ = false;
};

// ---------------------------------------------------------------------------
// Option parsing helpers

std::map<std::string, double> parse_assignments(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw mk::ValidationError("expected name=value, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    try {
      std::size_t used = 0;
      const double v = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
      out[name] = v;
    } catch (const std::exception&) {
      throw mk::ValidationError("value for '" + name + "' is not a number");
    }
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& text, std::size_t count, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw mk::ValidationError(what + " must be " + std::to_string(count) + " comma-separated numbers");
    }
  }
  if (out.size() != count) throw mk::ValidationError(what + " must be " + std::to_string(count) + " comma-separated numbers");
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

mk::SystemSpec load_system(const std::string& ref) {
  if (ref.empty()) throw mk::ValidationError("--system is required");
  if (std::filesystem::exists(ref)) return mk::io::load_spec(ref);
  if (mk::registry::contains(ref)) return mk::registry::get(ref);
  throw mk::ValidationError("'" + ref + "' is neither a file nor a registered system");
}

json describe_spec(const mk::System& sys) {
  return {{"id", sys.id()}, {"formalism", mk::to_string(sys.formalism())}, {"params", sys.params()}};
}

json named(const mk::PhaseSpace& sp, std::span<const double> x) {
  json o = json::object();
  for (std::size_t k = 0; k < sp.dim(); ++k) o[sp.layout().name(k)] = x[k];
  return o;
}

json named(const mk::PhaseSpace& sp, const mk::PhasePoint& pt) { return named(sp, sp.pack(pt)); }

// Deterministic sample points scattered around the default initial state.
std::vector<mk::Vector> sample_points(const mk::System& sys, mk::Representation r, std::size_t count,
                                      std::uint64_t seed) {
  const mk::PhaseSpace sp = sys.space(r);
  const mk::Vector x0 = sp.pack(sys.initial(r));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<mk::Vector> out;
  for (std::size_t k = 0; k < count; ++k) {
    mk::Vector x = x0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::string& n = sp.layout().name(i);
      if (n == sys.chart().time) {
        x[i] = 2.5 + 2.5 * u(rng);
      } else if (n == sys.chart().action) {
        x[i] = 0.5 * u(rng);
      } else {
        x[i] += 0.2 * u(rng) * std::max(1.0, std::fabs(x[i]));
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

struct RunOptions {
  std::string system;
  std::string point;
  std::string tspan = "0,10";
  double dt = 0.1;
  double tol = 1e-10;
  std::string method = "dopri5";
  std::string representation;
  std::string params;
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 20240601;
  std::size_t samples = 20;
};

mk::System make_system(const RunOptions& o, const mk::Params& extra_allowed = {}) {
  mk::Params overrides = o.params.empty() ? mk::Params{} : parse_assignments(o.params);
  for (const auto& [k, _] : extra_allowed) overrides.erase(k);
  return mk::System(load_system(o.system), overrides);
}

mk::Representation pick(const mk::System& sys, const RunOptions& o) {
  return o.representation.empty() ? sys.primary() : mk::representation_from_string(o.representation);
}

mk::IntegratorConfig integrator(const RunOptions& o) {
  mk::IntegratorConfig cfg;
  if (o.method == "rk4") {
    cfg.method = mk::Method::rk4;
    cfg.dt = o.dt;
  } else if (o.method != "dopri5") {
    throw mk::ValidationError("--method must be rk4 or dopri5");
  }
  if (!(o.dt > 0.0)) throw mk::ValidationError("--dt must be positive");
  if (!(o.tol > 0.0)) throw mk::ValidationError("--tol must be positive");
  cfg.abs_tol = cfg.rel_tol = o.tol;
  cfg.sample_dt = o.dt;
  return cfg;
}

std::pair<double, double> time_span(const RunOptions& o) {
  const auto ts = parse_numbers(o.tspan, 2, "--tspan");
  if (!(ts[1] > ts[0])) throw mk::ValidationError("--tspan must satisfy start < end");
  return {ts[0], ts[1]};
}

mk::PhasePoint start_point(const mk::System& sys, mk::Representation r, const RunOptions& o, double t0) {
  std::map<std::string, double> values = sys.spec().initial;
  if (!o.point.empty()) values = parse_assignments(o.point);
  if (sys.flavor() == mk::unified::Flavor::extended) values[sys.chart().time] = t0;
  return sys.point(r, values);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_derive(const RunOptions& o, Report& rep) {
  const mk::System sys = make_system(o);
  const mk::Representation r = pick(sys, o);
  rep["system"] = describe_spec(sys);
  rep["representation"] = mk::to_string(r);
  std::map<std::string, double> values = sys.spec().initial;
  if (!o.point.empty()) values = parse_assignments(o.point);
  const mk::PhasePoint pt = sys.point(r, values);
  const mk::PhaseSpace sp = sys.space(r);
  const mk::FieldEval f = sys.field(r, pt);

  json res;
  res["point"] = named(sp, pt);
  res["field"] = named(sp, f.components);
  res["diagnostics"] = f.diagnostics;
  if (r == mk::Representation::lagrangian) {
    const mk::Jet jet(sys.lagrangian(), sp, pt, sys.params());
    res["energy"] = mk::lagrangian_energy(jet);
    const mk::PhasePoint image = mk::legendre_image(jet, pt);
    json p = json::object();
    for (std::size_t i = 0; i < sys.chart().dof(); ++i) p[sys.chart().momenta[i]] = image.p[i];
    res["legendre_image"] = p;
    if (sys.flavor() == mk::unified::Flavor::extended) {
      const mk::FieldEval reeb = mk::cosymplectic::lagrangian_reeb(sys.lagrangian(), sys.chart(), pt, sys.params());
      res["reeb"] = named(sp, reeb.components);
    } else if (sys.flavor() == mk::unified::Flavor::contact) {
      const mk::FieldEval reeb = mk::contact::contact_reeb_lagrangian(sys.lagrangian(), sys.chart(), pt, sys.params());
      res["reeb"] = named(sp, reeb.components);
    }
  }
  rep["results"] = res;
}

void cmd_simulate(const RunOptions& o, Report& rep) {
  const auto [t0, t1] = time_span(o);
  const mk::System sys = make_system(o);
  const mk::Representation r = pick(sys, o);
  const mk::IntegratorConfig cfg = integrator(o);
  if (o.format != "csv" && o.format != "json") throw mk::ValidationError("--format must be csv or json");
  rep["system"] = describe_spec(sys);
  rep["representation"] = mk::to_string(r);
  rep["config"] = {{"tspan", {t0, t1}}, {"method", o.method}, {"tol", o.tol}, {"dt", o.dt}};

  const mk::PhasePoint start = start_point(sys, r, o, t0);
  log(Level::info, "integrating " + sys.id() + " on [" + mk::io::format_double(t0) + ", " +
                       mk::io::format_double(t1) + "]");
  const mk::Trajectory traj = sys.simulate(r, start, t0, t1, cfg);

  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw mk::ValidationError("cannot write '" + o.out + "'");
    if (o.format == "csv") {
      f << mk::io::trajectory_csv(traj);
    } else {
      f << mk::io::trajectory_json(traj).dump(2) << '\n';
    }
  }

  json res;
  res["samples"] = traj.size();
  res["steps"] = {{"accepted", traj.stats.accepted}, {"rejected", traj.stats.rejected}};
  res["final"] = named(sys.space(r), traj.states.back());
  json mons = json::object();
  for (const auto& q : sys.spec().quantities) {
    if (!traj.monitors.count(q.name)) continue;
    const mk::Expr e = mk::parse(q.expression);
    json m;
    if (q.behavior == mk::QuantitySpec::Behavior::conserved) {
      const auto qr = mk::symmetry::monitor(traj, e, sys.params());
      m = {{"behavior", "conserved"}, {"initial", qr.values.front()}, {"max_drift", qr.max_deviation}};
      rep.expect(q.name + " drift", qr.max_deviation, q.tolerance);
    } else {
      const mk::Expr rate = mk::parse(q.rate);
      const auto qr = mk::symmetry::monitor(traj, e, sys.params(), mk::symmetry::Decay{rate});
      m = {{"behavior", "decay"},
           {"initial", qr.values.front()},
           {"relative_deviation", qr.relative_deviation},
           {"fitted_rate", qr.fitted_rate}};
      rep.expect(q.name + " decay law", qr.relative_deviation, q.tolerance);
      // A constant rate can be compared with the log-linear fit directly.
      bool constant = true;
      for (const auto& id : mk::free_identifiers(rate)) constant = constant && sys.params().count(id) > 0;
      if (constant) {
        const double expected = mk::eval(rate, sys.params());
        m["expected_rate"] = expected;
        rep.expect(q.name + " fitted rate", std::fabs(qr.fitted_rate - expected), 1e-4);
      }
    }
    mons[q.name] = m;
  }
  res["monitors"] = mons;
  if (!o.out.empty()) res["output"] = {{"path", o.out}, {"format", o.format}};
  rep["results"] = res;
}

// The invariant battery of one system.
void run_checks(const mk::System& sys, const RunOptions& o, Report& rep) {
  rep["system"] = describe_spec(sys);
  const mk::Params& P = sys.params();
  const mk::Chart& chart = sys.chart();
  json res = json::object();
  sys.check_regular();

  if (sys.is_riemann()) {
    const auto samples = sample_points(sys, mk::Representation::newton, o.samples, o.seed);
    const mk::PhaseSpace sp = sys.space(mk::Representation::newton);
    double scalar = 0.0;
    {
      const mk::PhasePoint pt = sp.unpack(samples.front());
      scalar = mk::riemann::curvature(sys.metric(), pt.q, P).scalar;
    }
    res["scalar_curvature_at_first_sample"] = scalar;
    if (sys.has_lagrangian() && sys.constraints().empty()) {
      // the mechanical Lagrangian and the Newton field must agree
      double worst = 0.0;
      const mk::PhaseSpace ts = mk::symplectic::tangent_space(chart);
      const mk::FieldFn newton = sys.flow(mk::Representation::newton);
      for (const auto& x : samples) {
        const mk::FieldEval el = mk::symplectic::euler_lagrange_field(sys.lagrangian(), chart, ts.unpack(x), P);
        const mk::Vector nf = newton(0.0, x);
        for (std::size_t i = 0; i < nf.size(); ++i) worst = std::max(worst, std::fabs(nf[i] - el.components[i]));
      }
      res["lagrangian_vs_newton"] = worst;
      rep.expect("lagrangian vs newton field", worst, 1e-10);
    }
  } else {
    const mk::Representation lr = mk::Representation::lagrangian;
    const auto samples = sys.supports(lr) ? sample_points(sys, lr, o.samples, o.seed) : std::vector<mk::Vector>{};
    const mk::PhaseSpace ts = sys.supports(lr) ? sys.space(lr) : mk::PhaseSpace{};
    const auto flavor = sys.flavor();

    if (sys.has_lagrangian() && sys.has_hamiltonian()) {
      double eq = 0.0, proj_l = 0.0, proj_h = 0.0;
      for (const auto& x : samples) {
        const mk::PhasePoint pt = ts.unpack(x);
        switch (flavor) {
          case mk::unified::Flavor::autonomous:
            eq = std::max(eq, mk::symplectic::equivalence_residual(sys.lagrangian(), sys.hamiltonian(), chart, pt, P));
            break;
          case mk::unified::Flavor::extended:
            eq = std::max(eq, mk::cosymplectic::equivalence_residual(sys.lagrangian(), sys.hamiltonian(), chart, pt, P));
            break;
          case mk::unified::Flavor::contact:
            eq = std::max(eq, mk::contact::equivalence_residual(sys.lagrangian(), sys.hamiltonian(), chart, pt, P));
            break;
        }
        const mk::PhasePoint up = mk::unified::lift_to_constraint(sys.lagrangian(), chart, pt, flavor, P);
        const auto pr = mk::unified::projection_check(sys.lagrangian(), sys.hamiltonian(), chart, up, flavor, P);
        proj_l = std::max(proj_l, pr.lagrangian);
        proj_h = std::max(proj_h, pr.hamiltonian);
      }
      res["equivalence"] = eq;
      res["unified_projection"] = {{"lagrangian", proj_l}, {"hamiltonian", proj_h}};
      rep.expect("legendre equivalence", eq, 1e-10);
      rep.expect("unified projection (lagrangian side)", proj_l, 1e-10);
      rep.expect("unified projection (hamiltonian side)", proj_h, 1e-10);
    }

    if (sys.has_lagrangian() && flavor == mk::unified::Flavor::extended) {
      double worst = 0.0;
      for (const auto& x : samples) {
        const auto R = mk::cosymplectic::lagrangian_reeb(sys.lagrangian(), chart, ts.unpack(x), P);
        worst = std::max(worst, std::fabs(R.diagnostic("R(E_L)") - R.diagnostic("-dL/dt")));
      }
      res["reeb_identity"] = worst;
      rep.expect("reeb identity R_L(E_L) = -dL/dt", worst, 1e-10);

      mk::IntegratorConfig cfg = integrator(o);
      const mk::PhasePoint start = sys.initial(lr);
      const auto traj = sys.simulate(lr, start, start.t.value_or(0.0), start.t.value_or(0.0) + 10.0, cfg);
      const auto bal = mk::cosymplectic::energy_balance(traj, sys.lagrangian(), chart, P);
      res["energy_balance"] = bal.max_defect;
      rep.expect("energy balance dE_L/dt = -dL/dt", bal.max_defect, 1e-6);
    }

    if (sys.has_lagrangian() && flavor == mk::unified::Flavor::contact) {
      double reeb = 0.0, diss_l = 0.0, diss_h = 0.0;
      for (const auto& x : samples) {
        const mk::PhasePoint pt = ts.unpack(x);
        const auto R = mk::contact::contact_reeb_lagrangian(sys.lagrangian(), chart, pt, P);
        reeb = std::max(reeb, std::fabs(R.diagnostic("R(E_L)") - R.diagnostic("-dL/ds")));
        diss_l = std::max(diss_l, mk::contact::lagrangian_dissipation_rate_check(sys.lagrangian(), chart, pt, P).residual);
        if (sys.has_hamiltonian()) {
          const mk::PhasePoint cp = mk::legendre_image(mk::Jet(sys.lagrangian(), ts, pt, P), pt);
          diss_h = std::max(diss_h, mk::contact::dissipation_rate_check(sys.hamiltonian(), chart, cp, P).residual);
        }
      }
      res["reeb_identity"] = reeb;
      res["dissipation_rate"] = {{"lagrangian", diss_l}, {"hamiltonian", diss_h}};
      rep.expect("reeb identity R_L(E_L) = -dL/ds", reeb, 1e-10);
      rep.expect("energy dissipation (lagrangian side)", diss_l, 1e-10);
      if (sys.has_hamiltonian()) rep.expect("energy dissipation (hamiltonian side)", diss_h, 1e-10);
    }

    for (const auto& y : sys.spec().symmetries) {
      const auto Y = sys.generator(y);
      const auto nr = mk::symmetry::noether_check(Y, sys.lagrangian(), chart, flavor, samples, P);
      json o2 = {{"form", nr.form_residual}, {"energy", nr.energy_residual}, {"time", nr.time_residual}};
      rep.expect("noether " + y.name, nr.max_residual(), 1e-10);
      if (!y.quantity.empty()) {
        const mk::Expr q = mk::parse(y.quantity);
        double diff = 0.0;
        for (std::size_t k = 0; k < samples.size(); ++k) {
          diff = std::max(diff, std::fabs(nr.quantity[k] - mk::eval(q, ts.layout(), samples[k], P)));
        }
        o2["quantity_mismatch"] = diff;
        rep.expect("noether " + y.name + " quantity " + y.quantity, diff, 1e-10);
      }
      res["symmetry " + y.name] = o2;
    }
  }

  // declared quantities along the default trajectory
  if (!sys.spec().quantities.empty()) {
    const mk::Representation r = sys.primary();
    mk::IntegratorConfig cfg = integrator(o);
    const mk::PhasePoint start = sys.initial(r);
    const double t0 = start.t.value_or(0.0);
    const auto traj = sys.simulate(r, start, t0, t0 + 10.0, cfg);
    json mons = json::object();
    for (const auto& q : sys.spec().quantities) {
      if (!traj.monitors.count(q.name)) continue;
      const mk::Expr e = mk::parse(q.expression);
      if (q.behavior == mk::QuantitySpec::Behavior::conserved) {
        const auto qr = mk::symmetry::monitor(traj, e, P);
        mons[q.name] = qr.max_deviation;
        rep.expect(q.name + " conserved", qr.max_deviation, q.tolerance);
      } else {
        const auto qr = mk::symmetry::monitor(traj, e, P, mk::symmetry::Decay{mk::parse(q.rate)});
        mons[q.name] = qr.relative_deviation;
        rep.expect(q.name + " decays at rate " + q.rate, qr.relative_deviation, q.tolerance);
      }
    }
    res["monitors"] = mons;
  }
  rep["results"] = res;
}

json run_guarded(const std::string& command, const std::function<void(Report&)>& body, bool& pass, bool& failed) {
  const auto start = std::chrono::steady_clock::now();
  Report rep(command);
  try {
    body(rep);
  } catch (const mk::Error& e) {
    rep.error(e.what());
    log(Level::error, e.what());
  } catch (const std::exception& e) {
    rep.error(std::string("internal error: ") + e.what());
    log(Level::error, e.what());
  }
  pass = rep.pass();
  failed = rep.failed_to_run();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep.finish(secs);
}

void cmd_check(const RunOptions& o, bool all, Report& rep) {
  if (!all) {
    run_checks(make_system(o), o, rep);
    return;
  }
  // one worker per registered system, each with its own state
  std::vector<std::future<std::tuple<json, bool, bool>>> jobs;
  for (const auto& [id, _] : mk::registry::list()) {
    jobs.push_back(std::async(std::launch::async, [id, o] {
      RunOptions oo = o;
      oo.system = id;
      oo.params.clear();
      bool pass = false, failed = false;
      json j = run_guarded("check", [&](Report& r) { run_checks(make_system(oo), oo, r); }, pass, failed);
      j.erase("wall_time_s");
      return std::tuple<json, bool, bool>{std::move(j), pass, failed};
    }));
  }
  json systems = json::array();
  for (auto& f : jobs) {
    auto [j, pass, failed] = f.get();
    const std::string id = j["system"].is_object() ? j["system"]["id"].get<std::string>() : "?";
    rep.expect("system " + id, (pass && !failed) ? 0.0 : 1.0, 0.0);
    systems.push_back(std::move(j));
  }
  rep["results"] = {{"systems", systems}};
}

void cmd_symmetry(const RunOptions& o, const std::string& generator, const std::string& components, Report& rep) {
  const mk::System sys = make_system(o);
  if (sys.is_riemann()) throw mk::ValidationError("symmetry checks need a Lagrangian system");
  rep["system"] = describe_spec(sys);
  const mk::Representation lr = mk::Representation::lagrangian;
  const mk::PhaseSpace ts = sys.space(lr);
  const auto samples = sample_points(sys, lr, o.samples, o.seed);

  std::vector<mk::SymmetrySpec> gens;
  if (!components.empty()) {
    gens.push_back({generator.empty() ? "custom" : generator, split(components, ','), ""});
  } else {
    for (const auto& y : sys.spec().symmetries) {
      if (generator.empty() || y.name == generator) gens.push_back(y);
    }
    if (gens.empty()) throw mk::ValidationError("no generator named '" + generator + "' in " + sys.id());
  }

  json res = json::array();
  for (const auto& y : gens) {
    if (y.components.size() != ts.dim()) {
      throw mk::ValidationError("generator needs " + std::to_string(ts.dim()) + " components over " + [&] {
        std::string s;
        for (const auto& n : ts.layout().names()) s += (s.empty() ? "" : ",") + n;
        return s;
      }());
    }
    const auto Y = sys.generator(y);
    const auto nr = mk::symmetry::noether_check(Y, sys.lagrangian(), sys.chart(), sys.flavor(), samples, sys.params());
    const auto dr = mk::symmetry::dynamical_symmetry_residual(Y, sys.flow(lr), samples, sys.params());
    json g = {{"name", y.name},
              {"components", y.components},
              {"noether", {{"form", nr.form_residual}, {"energy", nr.energy_residual}, {"time", nr.time_residual}}},
              {"dynamical", {{"max_bracket", dr.max_residual}, {"parallel_to_field", dr.parallel_to_field}}},
              {"quantity_at_initial", mk::symmetry::noether_check(Y, sys.lagrangian(), sys.chart(), sys.flavor(),
                                                                  {ts.pack(sys.initial(lr))}, sys.params())
                                          .quantity.front()},
              {"quantity_kind", sys.flavor() == mk::unified::Flavor::contact ? "dissipated" : "conserved"}};
    rep.expect(y.name + " noether residual", nr.max_residual(), 1e-10);
    rep.expect(y.name + " dynamical residual", dr.max_residual, 1e-8);
    if (!y.quantity.empty()) {
      const mk::Expr q = mk::parse(y.quantity);
      double diff = 0.0;
      for (std::size_t k = 0; k < samples.size(); ++k) {
        diff = std::max(diff, std::fabs(nr.quantity[k] - mk::eval(q, ts.layout(), samples[k], sys.params())));
      }
      g["expected_quantity"] = y.quantity;
      g["quantity_mismatch"] = diff;
      rep.expect(y.name + " quantity", diff, 1e-10);
    }
    res.push_back(std::move(g));
  }
  rep["results"] = {{"samples", samples.size()}, {"seed", o.seed}, {"generators", res}};
}

void cmd_hj(const RunOptions& o, const std::string& S, const std::string& grid, double tolerance, Report& rep) {
  if (S.empty()) throw mk::ValidationError("--S is required");
  const mk::Expr Sx = mk::parse(S);
  mk::Params extra;
  if (!o.params.empty()) extra = parse_assignments(o.params);
  const mk::System base_sys = make_system(o, extra);
  mk::Params P = base_sys.params();
  for (const auto& [k, v] : extra) P[k] = v;
  if (base_sys.flavor() != mk::unified::Flavor::autonomous || !base_sys.has_hamiltonian()) {
    throw mk::ValidationError("the Hamilton-Jacobi check needs an autonomous system with a hamiltonian");
  }
  const auto g = parse_numbers(grid, 3, "--grid");
  const std::size_t n = static_cast<std::size_t>(g[2]);
  if (n < 1 || g[2] != static_cast<double>(n)) throw mk::ValidationError("--grid count must be a positive integer");
  const std::size_t dof = base_sys.chart().dof();
  std::vector<mk::Vector> samples;
  std::vector<std::size_t> idx(dof, 0);
  while (true) {
    mk::Vector q(dof);
    for (std::size_t i = 0; i < dof; ++i) q[i] = n == 1 ? g[0] : g[0] + (g[1] - g[0]) * idx[i] / (n - 1.0);
    samples.push_back(q);
    std::size_t i = 0;
    while (i < dof && ++idx[i] == n) idx[i++] = 0;
    if (i == dof) break;
  }
  const auto r = mk::symplectic::hj_residual(base_sys.hamiltonian(), Sx, base_sys.chart(), samples, P);
  rep["system"] = describe_spec(base_sys);
  rep["results"] = {{"S", mk::to_string(Sx)}, {"samples", samples.size()}, {"mean_energy", r.mean},
                    {"deviation", r.deviation}};
  rep.expect("h(q, dS/dq) constant", r.deviation, tolerance);
}

void cmd_geodesic(const RunOptions& o, Report& rep) {
  const auto [t0, t1] = time_span(o);
  const mk::System sys = make_system(o);
  if (!sys.is_riemann()) throw mk::ValidationError("geodesic needs a riemann-newton system (a metric)");
  const mk::PhaseSpace sp = sys.space(mk::Representation::newton);
  const mk::PhasePoint start = start_point(sys, mk::Representation::newton, o, t0);
  mk::IntegratorConfig cfg = integrator(o);
  const auto& g = sys.metric();
  mk::Trajectory traj = mk::integrate(mk::riemann::geodesic_flow(g, sys.params()), sp.pack(start), t0, t1, cfg,
                                      {mk::riemann::speed_monitor(g, sys.params())});
  traj.system_id = sys.id();
  traj.state_names = sp.layout().names();
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw mk::ValidationError("cannot write '" + o.out + "'");
    f << (o.format == "json" ? mk::io::trajectory_json(traj).dump(2) + "\n" : mk::io::trajectory_csv(traj));
  }
  const auto& speed = traj.monitor("speed2");
  double drift = 0.0;
  for (double s : speed) drift = std::max(drift, std::fabs(s - speed.front()));
  rep["system"] = describe_spec(sys);
  rep["results"] = {{"start", named(sp, start)},
                    {"final", named(sp, traj.states.back())},
                    {"speed2", speed.front()},
                    {"speed2_drift", drift},
                    {"scalar_curvature_at_start", mk::riemann::curvature(g, start.q, sys.params()).scalar}};
  rep.expect("g(v, v) constant", drift, 1e-8);
}

void cmd_validate(const RunOptions& o, Report& rep) {
  const mk::System sys = make_system(o);
  sys.check_regular();
  rep["system"] = describe_spec(sys);
  rep["results"] = {{"valid", true}, {"primary_representation", mk::to_string(sys.primary())}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mechkit: geometric mechanics checks for Lagrangian, Hamiltonian, contact and Riemannian systems"};
  app.require_subcommand(1);
  RunOptions o;
  bool all = false;
  std::string generator, components, S, grid = "0.5,1.5,5", id, dir;
  double hj_tol = 1e-10;

  auto add_common = [&](CLI::App* c) {
    c->add_option("--system", o.system, "system file or registry id");
    c->add_option("--param", o.params, "parameter overrides, name=value,...");
    c->add_option("--seed", o.seed, "seed for sample points");
    c->add_option("--samples", o.samples, "number of sample points");
  };
  auto add_run = [&](CLI::App* c) {
    c->add_option("--point", o.point, "state, name=value,...");
    c->add_option("--tspan", o.tspan, "start,end");
    c->add_option("--dt", o.dt, "sample spacing (and the rk4 step)");
    c->add_option("--tol", o.tol, "integrator tolerance");
    c->add_option("--method", o.method, "rk4 or dopri5");
    c->add_option("--out", o.out, "trajectory output path");
    c->add_option("--format", o.format, "csv or json");
    c->add_option("--representation", o.representation, "lagrangian, hamiltonian, unified or newton");
  };

  auto* derive = app.add_subcommand("derive", "field components at a point");
  add_common(derive);
  add_run(derive);
  auto* simulate = app.add_subcommand("simulate", "integrate a trajectory");
  add_common(simulate);
  add_run(simulate);
  auto* check = app.add_subcommand("check", "run the invariant battery of a system");
  add_common(check);
  check->add_option("--tol", o.tol, "integrator tolerance");
  check->add_flag("--all", all, "check every registered system");
  auto* symmetry = app.add_subcommand("symmetry", "Noether and dynamical symmetry checks");
  add_common(symmetry);
  symmetry->add_option("--generator", generator, "declared generator name");
  symmetry->add_option("--components", components, "generator components, comma-separated");
  auto* hj = app.add_subcommand("hj", "Hamilton-Jacobi residual of a generating function");
  add_common(hj);
  hj->add_option("--S", S, "generating function S(q)");
  hj->add_option("--grid", grid, "start,end,count per coordinate");
  hj->add_option("--hj-tol", hj_tol, "tolerance on the energy deviation");
  auto* geodesic = app.add_subcommand("geodesic", "integrate a geodesic of the system's metric");
  add_common(geodesic);
  add_run(geodesic);
  auto* validate = app.add_subcommand("validate", "check a system file");
  add_common(validate);
  auto* list = app.add_subcommand("list", "list registered systems");
  auto* show = app.add_subcommand("show", "print a registered system as JSON");
  show->add_option("id", id, "registry id")->required();
  auto* exporter = app.add_subcommand("export", "write every registered system to a directory");
  exporter->add_option("--out", dir, "directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    json out = json::array();
    for (const auto& [name, f] : mk::registry::list()) out.push_back({{"id", name}, {"formalism", mk::to_string(f)}});
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  if (show->parsed() || exporter->parsed()) {
    try {
      if (show->parsed()) {
        std::cout << mk::io::spec_to_json(mk::registry::get(id)).dump(2) << '\n';
      } else {
        std::filesystem::create_directories(dir);
        for (const auto& s : mk::registry::builtin()) {
          std::ofstream f(std::filesystem::path(dir) / (s.id + ".json"));
          f << mk::io::spec_to_json(s).dump(2) << '\n';
        }
      }
      return 0;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
  }

  std::string command;
  std::function<void(Report&)> body;
  if (derive->parsed()) {
    command = "derive";
    body = [&](Report& r) { cmd_derive(o, r); };
  } else if (simulate->parsed()) {
    command = "simulate";
    body = [&](Report& r) { cmd_simulate(o, r); };
  } else if (check->parsed()) {
    command = all ? "check --all" : "check";
    body = [&](Report& r) { cmd_check(o, all, r); };
  } else if (symmetry->parsed()) {
    command = "symmetry";
    body = [&](Report& r) { cmd_symmetry(o, generator, components, r); };
  } else if (hj->parsed()) {
    command = "hj";
    body = [&](Report& r) { cmd_hj(o, S, grid, hj_tol, r); };
  } else if (geodesic->parsed()) {
    command = "geodesic";
    body = [&](Report& r) { cmd_geodesic(o, r); };
  } else {
    command = "validate";
    body = [&](Report& r) { cmd_validate(o, r); };
  }

  bool pass = false, failed = false;
  const json report = run_guarded(command, body, pass, failed);
  std::cout << report.dump(2) << '\n';
  if (failed) return 2;
  return pass ? 0 : 1;
}
