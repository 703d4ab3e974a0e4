#pragma once

// A validated system specification bound to its parameters, with the phase
// spaces, fields and flows of each representation it supports.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mechkit/contact.hpp"
#include "mechkit/cosymplectic.hpp"
#include "mechkit/integrate.hpp"
#include "mechkit/registry.hpp"
#include "mechkit/riemann.hpp"
#include "mechkit/symmetry.hpp"
#include "mechkit/symplectic.hpp"
#include "mechkit/unified.hpp"

namespace mechkit {

enum class Representation { lagrangian, hamiltonian, unified, newton };

inline const char* to_string(Representation r) {
  switch (r) {
    case Representation::lagrangian: return "lagrangian";
    case Representation::hamiltonian: return "hamiltonian";
    case Representation::unified: return "unified";
    case Representation::newton: return "newton";
  }
  return "?";
}

inline Representation representation_from_string(const std::string& s) {
  for (auto r : {Representation::lagrangian, Representation::hamiltonian, Representation::unified,
                 Representation::newton}) {
    if (s == to_string(r)) return r;
  }
  throw ValidationError("unknown representation '" + s + "' (lagrangian, hamiltonian, unified or newton)");
}

class System {
 public:
  explicit System(SystemSpec spec, const Params& overrides = {}) : spec_(std::move(spec)) {
    for (const auto& [k, v] : overrides) {
      if (!spec_.params.count(k)) throw ValidationError("system '" + spec_.id + "' has no parameter '" + k + "'");
      spec_.params[k] = v;
    }
    validate(spec_);
    chart_ = spec_.chart();
    if (!spec_.lagrangian.empty()) L_ = parse(spec_.lagrangian);
    if (!spec_.hamiltonian.empty()) h_ = parse(spec_.hamiltonian);
    if (is_riemann()) {
      std::vector<std::vector<Expr>> g;
      for (const auto& row : spec_.metric) {
        std::vector<Expr> r;
        for (const auto& e : row) r.push_back(parse(e));
        g.push_back(std::move(r));
      }
      metric_ = riemann::MetricField(chart_, std::move(g));
      if (!spec_.potential.empty()) {
        force_ = riemann::ForceField::from_potential(parse(spec_.potential));
      } else if (!spec_.force.empty()) {
        std::vector<Expr> f;
        for (const auto& e : spec_.force) f.push_back(parse(e));
        force_ = riemann::ForceField{std::move(f), {}};
      } else {
        force_ = riemann::ForceField::zero(chart_.dof());
      }
      for (const auto& c : spec_.constraints) constraints_.push_back(parse(c));
    }
  }

  const SystemSpec& spec() const noexcept { return spec_; }
  const std::string& id() const noexcept { return spec_.id; }
  const Chart& chart() const noexcept { return chart_; }
  const Params& params() const noexcept { return spec_.params; }
  Formalism formalism() const noexcept { return spec_.formalism; }
  bool is_riemann() const noexcept { return spec_.formalism == Formalism::riemann_newton; }

  unified::Flavor flavor() const noexcept {
    if (uses_time(spec_.formalism)) return unified::Flavor::extended;
    if (uses_action(spec_.formalism)) return unified::Flavor::contact;
    return unified::Flavor::autonomous;
  }

  bool has_lagrangian() const noexcept { return L_.has_value(); }
  bool has_hamiltonian() const noexcept { return h_.has_value(); }
  const Expr& lagrangian() const {
    if (!L_) throw ValidationError("system '" + id() + "' has no lagrangian");
    return *L_;
  }
  const Expr& hamiltonian() const {
    if (!h_) throw ValidationError("system '" + id() + "' has no hamiltonian");
    return *h_;
  }

  const riemann::MetricField& metric() const {
    require_riemann();
    return metric_;
  }
  const riemann::ForceField& force() const {
    require_riemann();
    return force_;
  }
  const std::vector<Expr>& constraints() const noexcept { return constraints_; }

  Representation primary() const noexcept {
    switch (spec_.formalism) {
      case Formalism::symplectic_hamiltonian:
      case Formalism::contact_hamiltonian: return Representation::hamiltonian;
      case Formalism::unified_autonomous:
      case Formalism::unified_extended:
      case Formalism::unified_contact: return Representation::unified;
      case Formalism::riemann_newton: return Representation::newton;
      default: return Representation::lagrangian;
    }
  }

  bool supports(Representation r) const noexcept {
    switch (r) {
      case Representation::lagrangian: return !is_riemann() && has_lagrangian();
      case Representation::hamiltonian: return !is_riemann() && has_hamiltonian();
      case Representation::unified: return !is_riemann() && has_lagrangian();
      case Representation::newton: return is_riemann();
    }
    return false;
  }

  PhaseSpace space(Representation r) const {
    require(r);
    switch (r) {
      case Representation::lagrangian: return unified::tangent_space(chart_, flavor());
      case Representation::hamiltonian: return unified::cotangent_space(chart_, flavor());
      case Representation::unified: return unified::unified_space(chart_, flavor());
      case Representation::newton: return riemann::state_space(metric_);
    }
    return {};
  }

  // The field at a point, with the diagnostics of the underlying module.
  FieldEval field(Representation r, const PhasePoint& pt) const {
    require(r);
    const Params& P = params();
    switch (r) {
      case Representation::lagrangian:
        switch (flavor()) {
          case unified::Flavor::autonomous: return symplectic::euler_lagrange_field(*L_, chart_, pt, P);
          case unified::Flavor::extended: return cosymplectic::nonautonomous_el_field(*L_, chart_, pt, P);
          case unified::Flavor::contact: return contact::herglotz_el_field(*L_, chart_, pt, P);
        }
        break;
      case Representation::hamiltonian:
        switch (flavor()) {
          case unified::Flavor::autonomous: return symplectic::hamiltonian_field(*h_, chart_, pt, P);
          case unified::Flavor::extended: return cosymplectic::evolution_field(*h_, chart_, pt, P);
          case unified::Flavor::contact: return contact::contact_hamiltonian_field(*h_, chart_, pt, P);
        }
        break;
      case Representation::unified:
        return unified::tangency_solve(*L_, chart_, pt, flavor(), P).field;
      case Representation::newton: {
        const PhaseSpace sp = space(r);
        const Vector x = sp.pack(pt);
        return make_field(sp, flow(r)(0.0, x));
      }
    }
    throw ValidationError("unsupported representation");
  }

  FieldFn flow(Representation r) const {
    require(r);
    const Params& P = params();
    switch (r) {
      case Representation::lagrangian:
        switch (flavor()) {
          case unified::Flavor::autonomous: return symplectic::lagrangian_flow(*L_, chart_, P);
          case unified::Flavor::extended: return cosymplectic::lagrangian_flow(*L_, chart_, P);
          case unified::Flavor::contact: return contact::lagrangian_flow(*L_, chart_, P);
        }
        break;
      case Representation::hamiltonian:
        switch (flavor()) {
          case unified::Flavor::autonomous: return symplectic::hamiltonian_flow(*h_, chart_, P);
          case unified::Flavor::extended: return cosymplectic::hamiltonian_flow(*h_, chart_, P);
          case unified::Flavor::contact: return contact::hamiltonian_flow(*h_, chart_, P);
        }
        break;
      case Representation::unified:
        return unified::unified_flow(*L_, chart_, flavor(), P);
      case Representation::newton:
        if (!constraints_.empty()) return riemann::nonholonomic_flow(metric_, force_, constraints_, P);
        return riemann::newton_flow(metric_, force_, P);
    }
    throw ValidationError("unsupported representation");
  }

  // A point of the representation's space from named values. Velocity-side
  // values are mapped across by the Legendre map when the target is the
  // momentum side, and lifted onto the constraint for the unified space.
  PhasePoint point(Representation r, const std::map<std::string, double>& values) const {
    require(r);
    const PhaseSpace target = space(r);
    auto has_all = [&](const PhaseSpace& sp) {
      for (const auto& n : sp.layout().names()) {
        if (!values.count(n)) return false;
      }
      return true;
    };
    auto read = [&](const PhaseSpace& sp) {
      Vector x(sp.dim());
      for (std::size_t k = 0; k < sp.dim(); ++k) {
        const std::string& n = sp.layout().name(k);
        auto it = values.find(n);
        if (it == values.end()) throw ValidationError("missing value for coordinate '" + n + "'");
        x[k] = it->second;
      }
      return sp.unpack(x);
    };
    if (r == Representation::newton) return read(target);
    if (has_all(target) && r != Representation::unified) return read(target);

    const PhaseSpace ts = unified::tangent_space(chart_, flavor());
    if (r == Representation::hamiltonian && !has_all(ts)) return read(target);  // names the missing momentum
    const PhasePoint tp = read(ts);
    if (r == Representation::lagrangian) return tp;
    if (r == Representation::unified) return unified::lift_to_constraint(*L_, chart_, tp, flavor(), params());
    return legendre_image(Jet(*L_, ts, tp, params()), tp);
  }

  PhasePoint initial(Representation r) const { return point(r, spec_.initial); }
  PhasePoint initial() const { return initial(primary()); }

  // Regularity of the Lagrangian (invertible velocity Hessian, or metric) at
  // the default initial condition.
  void check_regular() const {
    if (is_riemann()) {
      const PhasePoint pt = initial(Representation::newton);
      (void)metric_.at(pt.q, params());
      return;
    }
    if (!has_lagrangian()) return;
    const PhaseSpace ts = space(Representation::lagrangian);
    const PhasePoint pt = point(Representation::lagrangian, spec_.initial);
    const Jet jet(*L_, ts, pt, params());
    (void)solve_velocity_hessian(jet.velocity_hessian(), Vector(chart_.dof(), 0.0), pt);
  }

  // Monitors for the declared quantities that can be evaluated on the state
  // layout of `r` (plus the time).
  std::vector<Monitor> monitors(Representation r) const {
    const PhaseSpace sp = space(r);
    std::vector<Monitor> out;
    for (const auto& q : spec_.quantities) {
      const Expr e = parse(q.expression);
      bool ok = true;
      for (const auto& id : free_identifiers(e)) {
        if (!sp.layout().contains(id) && !params().count(id) && id != chart_.time) ok = false;
      }
      if (!ok) continue;
      out.push_back(quantity_monitor(q.name, e, sp));
    }
    return out;
  }

  Monitor quantity_monitor(std::string name, const Expr& e, const PhaseSpace& sp) const {
    const bool append_t = !sp.layout().contains(chart_.time);
    std::vector<std::string> names = sp.layout().names();
    if (append_t) names.push_back(chart_.time);
    const VarLayout layout(names);
    return attach_monitor(std::move(name), [e, layout, append_t, P = params()](double t, std::span<const double> x) {
      if (!append_t) return eval(e, layout, x, P);
      Vector y(x.begin(), x.end());
      y.push_back(t);
      return eval(e, layout, y, P);
    });
  }

  symmetry::GeneratorField generator(const SymmetrySpec& y) const {
    return symmetry::GeneratorField::parse(unified::tangent_space(chart_, flavor()).layout(), y.components);
  }

  Trajectory simulate(Representation r, const PhasePoint& start, double t0, double t1, const IntegratorConfig& cfg,
                      std::vector<Monitor> extra = {}) const {
    const PhaseSpace sp = space(r);
    std::vector<Monitor> mons = monitors(r);
    for (auto& m : extra) mons.push_back(std::move(m));
    Trajectory traj = integrate(flow(r), sp.pack(start), t0, t1, cfg, mons);
    traj.system_id = id();
    traj.state_names = sp.layout().names();
    return traj;
  }

 private:
  void require(Representation r) const {
    if (!supports(r)) {
      throw ValidationError("system '" + id() + "' has no " + std::string(to_string(r)) + " representation");
    }
  }
  void require_riemann() const {
    if (!is_riemann()) throw ValidationError("system '" + id() + "' is not a riemann-newton system");
  }

  SystemSpec spec_;
  Chart chart_;
  std::optional<Expr> L_, h_;
  riemann::MetricField metric_;
  riemann::ForceField force_;
  std::vector<Expr> constraints_;
};

}  // namespace mechkit
