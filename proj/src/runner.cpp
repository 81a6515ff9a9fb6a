#include "dsp/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"
#include "dsp/filter.hpp"
#include "dsp/spectral.hpp"

namespace dsp {

const char* version() { return DSP_VERSION; }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) config_fail(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) config_fail(where, "unknown key '" + k + "'");
}

template <class T>
std::optional<T> opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(where + "." + key, e.what());
  }
}

template <class T>
T req(const json& obj, const char* key, const std::string& where) {
  auto v = opt<T>(obj, key, where);
  if (!v) config_fail(where, std::string("missing required key '") + key + "'");
  return *v;
}

cplx parse_coeff(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) return {j[0].get<double>(), j[1].get<double>()};
  config_fail(where, "coefficient must be a number or [re, im]");
}

NamedTerms parse_named_terms(const json& j, const std::string& where) {
  allow_keys(j, where, {"label", "terms", "add_hc"});
  NamedTerms nt;
  nt.label = opt<std::string>(j, "label", where).value_or("custom");
  if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
    config_fail(where, "'terms' must be a non-empty array");
  for (std::size_t i = 0; i < j.at("terms").size(); ++i) {
    const auto& t = j.at("terms")[i];
    const auto w = where + ".terms[" + std::to_string(i) + "]";
    allow_keys(t, w, {"coeff", "ops"});
    FermionTerm term;
    term.coeff = t.contains("coeff") ? parse_coeff(t.at("coeff"), w) : cplx{1.0, 0.0};
    term.factors = parse_factors(req<std::string>(t, "ops", w));
    nt.terms.push_back(std::move(term));
  }
  if (opt<bool>(j, "add_hc", where).value_or(false)) nt.terms = with_hermitian_conjugate(nt.terms);
  return nt;
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.source = doc;
  allow_keys(doc, "config",
             {"system", "sector", "protocol", "coupling", "engine", "filter", "schedule", "noise", "initial_state",
              "target", "asp", "lindbladian_gap", "connectivity_ell"});

  // system
  if (!doc.contains("system")) config_fail("config", "missing 'system'");
  const auto& sys = doc.at("system");
  allow_keys(sys, "system", {"fcidump", "hubbard"});
  if (sys.contains("fcidump") == sys.contains("hubbard")) config_fail("system", "give exactly one of fcidump, hubbard");
  if (sys.contains("fcidump")) {
    std::filesystem::path p = req<std::string>(sys, "fcidump", "system");
    c.fcidump = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else {
    const auto& h = sys.at("hubbard");
    allow_keys(h, "system.hubbard", {"sites", "t", "U"});
    c.hubbard_sites = req<int>(h, "sites", "system.hubbard");
    c.hubbard_t = opt<double>(h, "t", "system.hubbard").value_or(1.0);
    c.hubbard_U = req<double>(h, "U", "system.hubbard");
    if (c.hubbard_sites < 1) config_fail("system.hubbard", "sites must be >= 1");
  }

  // sector
  if (!doc.contains("sector")) config_fail("config", "missing 'sector'");
  allow_keys(doc.at("sector"), "sector", {"n_alpha", "n_beta"});
  c.n_alpha = req<int>(doc.at("sector"), "n_alpha", "sector");
  c.n_beta = req<int>(doc.at("sector"), "n_beta", "sector");

  // protocol
  if (doc.contains("protocol")) {
    const auto& p = doc.at("protocol");
    allow_keys(p, "protocol", {"mode", "mu", "target_level"});
    const auto mode = opt<std::string>(p, "mode", "protocol").value_or("plain");
    if (mode == "plain")
      c.mode = ProtocolMode::Kind::plain;
    else if (mode == "symmetry")
      c.mode = ProtocolMode::Kind::symmetry;
    else if (mode == "folded")
      c.mode = ProtocolMode::Kind::folded;
    else if (mode == "projected")
      c.mode = ProtocolMode::Kind::projected;
    else
      config_fail("protocol.mode", "unknown mode '" + mode + "'");
    c.mu = opt<double>(p, "mu", "protocol");
    c.target_level = opt<int>(p, "target_level", "protocol");
    if (c.mu && !std::isfinite(*c.mu)) config_fail("protocol.mu", "must be finite");
    const bool needs_mu = c.mode == ProtocolMode::Kind::folded || c.mode == ProtocolMode::Kind::projected;
    if (needs_mu && !c.mu && !c.target_level) config_fail("protocol", mode + " mode needs mu or target_level");
  }

  // couplings
  if (doc.contains("coupling")) {
    const auto& cp = doc.at("coupling");
    allow_keys(cp, "coupling", {"base", "quartic_preset", "extra"});
    const auto base = opt<std::string>(cp, "base", "coupling").value_or("S_II");
    if (base == "S_II")
      c.coupling_base = CouplingBase::S_II;
    else if (base == "S_II_reduced")
      c.coupling_base = CouplingBase::S_II_reduced;
    else if (base == "none")
      c.coupling_base = CouplingBase::none;
    else
      config_fail("coupling.base", "unknown base '" + base + "'");
    if (auto preset = opt<std::string>(cp, "quartic_preset", "coupling")) {
      try {
        for (auto& nt : quartic_preset(*preset)) c.extra_couplings.push_back(std::move(nt));
      } catch (const ParameterError& e) {
        config_fail("coupling.quartic_preset", e.what());
      }
    }
    if (cp.contains("extra")) {
      if (!cp.at("extra").is_array()) config_fail("coupling.extra", "expected an array");
      for (std::size_t i = 0; i < cp.at("extra").size(); ++i)
        c.extra_couplings.push_back(parse_named_terms(cp.at("extra")[i], "coupling.extra[" + std::to_string(i) + "]"));
    }
  }

  // engine
  if (doc.contains("engine")) {
    const auto& e = doc.at("engine");
    allow_keys(e, "engine", {"kind", "n_traj", "seed", "improved_sampling", "substeps", "max_superop_dim"});
    const auto kind = opt<std::string>(e, "kind", "engine").value_or("density");
    if (kind == "density")
      c.trajectories = false;
    else if (kind == "trajectories")
      c.trajectories = true;
    else
      config_fail("engine.kind", "unknown engine '" + kind + "'");
    c.traj.n_traj = opt<int>(e, "n_traj", "engine").value_or(c.traj.n_traj);
    c.traj.seed = opt<std::uint64_t>(e, "seed", "engine").value_or(c.traj.seed);
    c.traj.improved_sampling = opt<bool>(e, "improved_sampling", "engine").value_or(c.traj.improved_sampling);
    c.traj.substeps = opt<int>(e, "substeps", "engine").value_or(c.traj.substeps);
    c.max_superop_dim = opt<std::size_t>(e, "max_superop_dim", "engine").value_or(c.max_superop_dim);
    if (c.traj.n_traj < 1) config_fail("engine.n_traj", "must be >= 1");
    if (c.traj.substeps < 1) config_fail("engine.substeps", "must be >= 1");
  }

  // filter
  if (doc.contains("filter")) {
    const auto& f = doc.at("filter");
    allow_keys(f, "filter", {"a", "b", "da", "db", "S", "M", "safety", "kappa", "hard_threshold", "construction"});
    c.a = opt<double>(f, "a", "filter");
    c.b = opt<double>(f, "b", "filter");
    c.da = opt<double>(f, "da", "filter");
    c.db = opt<double>(f, "db", "filter");
    c.S = opt<double>(f, "S", "filter");
    c.jump.M = opt<int>(f, "M", "filter").value_or(c.jump.M);
    c.safety = opt<double>(f, "safety", "filter").value_or(c.safety);
    c.kappa = opt<double>(f, "kappa", "filter").value_or(c.kappa);
    c.jump.hard_threshold = opt<bool>(f, "hard_threshold", "filter").value_or(c.jump.hard_threshold);
    const auto cons = opt<std::string>(f, "construction", "filter").value_or("eigenbasis");
    if (cons == "eigenbasis")
      c.jump.construction = Construction::eigenbasis;
    else if (cons == "quadrature")
      c.jump.construction = Construction::quadrature;
    else
      config_fail("filter.construction", "unknown construction '" + cons + "'");
    if (c.jump.M < 0) config_fail("filter.M", "must be >= 0");
    if (c.safety < 1.0) config_fail("filter.safety", "must be >= 1");
    if (!(c.kappa > 0.0)) config_fail("filter.kappa", "must be > 0");
  }

  // schedule and noise
  if (doc.contains("schedule")) {
    const auto& s = doc.at("schedule");
    allow_keys(s, "schedule", {"T", "dt"});
    c.T = opt<double>(s, "T", "schedule").value_or(c.T);
    c.dt = opt<double>(s, "dt", "schedule").value_or(c.dt);
  }
  if (!(c.T > 0.0) || !(c.dt > 0.0)) config_fail("schedule", "T and dt must be > 0");
  if (doc.contains("noise")) {
    allow_keys(doc.at("noise"), "noise", {"gamma"});
    c.noise.gamma = opt<double>(doc.at("noise"), "gamma", "noise").value_or(0.0);
    if (c.noise.gamma < 0.0) config_fail("noise.gamma", "must be >= 0");
  }

  // initial state
  if (doc.contains("initial_state")) {
    const auto& is = doc.at("initial_state");
    allow_keys(is, "initial_state", {"kind", "determinants"});
    const auto kind = req<std::string>(is, "kind", "initial_state");
    if (kind == "hf_aufbau")
      c.initial = RunConfig::Initial::hf_aufbau;
    else if (kind == "high_spin_D")
      c.initial = RunConfig::Initial::high_spin_D;
    else if (kind == "maximally_mixed")
      c.initial = RunConfig::Initial::maximally_mixed;
    else if (kind == "determinants")
      c.initial = RunConfig::Initial::determinants;
    else
      config_fail("initial_state.kind", "unknown kind '" + kind + "'");
    if (c.initial == RunConfig::Initial::determinants) {
      if (!is.contains("determinants") || !is.at("determinants").is_array() || is.at("determinants").empty())
        config_fail("initial_state", "kind 'determinants' needs a non-empty 'determinants' array");
      for (std::size_t i = 0; i < is.at("determinants").size(); ++i) {
        const auto& d = is.at("determinants")[i];
        const auto w = "initial_state.determinants[" + std::to_string(i) + "]";
        allow_keys(d, w, {"alpha", "beta", "coeff"});
        DeterminantSpec spec;
        spec.alpha = opt<std::vector<int>>(d, "alpha", w).value_or(std::vector<int>{});
        spec.beta = opt<std::vector<int>>(d, "beta", w).value_or(std::vector<int>{});
        if (d.contains("coeff")) spec.coeff = parse_coeff(d.at("coeff"), w + ".coeff");
        c.determinants.push_back(std::move(spec));
      }
    }
  }
  if (c.trajectories && c.initial == RunConfig::Initial::maximally_mixed)
    config_fail("initial_state", "the trajectory engine needs a pure initial state");
  if (c.trajectories && c.noise.gamma > 0.0)
    config_fail("noise", "depolarizing noise is supported by the density engine only");

  // target
  if (doc.contains("target")) {
    const auto& t = doc.at("target");
    allow_keys(t, "target", {"level", "E_ref"});
    c.report_level = opt<int>(t, "level", "target");
    c.e_ref = opt<double>(t, "E_ref", "target");
  }

  c.lindbladian_gap = opt<bool>(doc, "lindbladian_gap", "config").value_or(false);
  c.connectivity_ell = opt<int>(doc, "connectivity_ell", "config").value_or(c.connectivity_ell);
  if (c.connectivity_ell < 1) config_fail("connectivity_ell", "must be >= 1");

  if (doc.contains("asp")) {
    const auto& a = doc.at("asp");
    allow_keys(a, "asp", {"T", "steps"});
    c.asp = true;
    c.asp_T = opt<double>(a, "T", "asp").value_or(c.asp_T);
    c.asp_steps = opt<int>(a, "steps", "asp").value_or(c.asp_steps);
    if (!(c.asp_T > 0.0) || c.asp_steps < 1) config_fail("asp", "T must be > 0 and steps >= 1");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

// ---------------------------------------------------------------- run

namespace {

// Runs one pipeline stage, prefixing any library error with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  const std::string p = std::string(name) + ": ";
  try {
    return f();
  } catch (const ParseError& e) {
    throw e.with_prefix(p);
  } catch (const CapacityError& e) {
    throw CapacityError(p + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(p + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(p + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(p + e.what());
  }
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json filter_json(const FilterSpec& f, const JumpOptions& o) {
  return {{"a", f.a},
          {"b", f.b},
          {"da", f.da},
          {"db", f.db},
          {"S", f.S},
          {"M", o.M},
          {"hard_threshold", o.hard_threshold},
          {"construction", o.construction == Construction::eigenbasis ? "eigenbasis" : "quadrature"}};
}

FilterSpec resolve_filter(const RunConfig& c, const Spectrum& eff) {
  FilterSpec f;
  const bool all_given = c.a && c.b && c.da && c.db && c.S;
  if (!all_given) {
    if (!eff.gap_defined && !c.b) throw ParameterError("spectrum has no gap; supply the filter parameter b explicitly");
    if (eff.gap_defined) f = default_filter_params(eff, c.safety, c.kappa);
  }
  if (c.b) {
    f.b = *c.b;
    if (!c.a) f.a = 2.0 * eff.radius * c.safety + f.b;
    if (!c.db) f.db = 0.5 * f.b;
    if (!c.S) f.S = c.kappa / f.b;
    if (!c.da) f.da = 0.5 * f.a;
  }
  if (c.a) {
    f.a = *c.a;
    if (!c.da) f.da = 0.5 * f.a;
  }
  if (c.da) f.da = *c.da;
  if (c.db) f.db = *c.db;
  if (c.S) f.S = *c.S;
  f.validate();
  return f;
}

int nearest_level(const Spectrum& spec, double mu) {
  int best = 0;
  for (int l = 1; l < spec.level_count(); ++l)
    if (std::abs(spec.level_values[l] - mu) < std::abs(spec.level_values[best] - mu)) best = l;
  return best;
}

int lowest_level_at_or_above(const Spectrum& spec, double mu) {
  for (int l = 0; l < spec.level_count(); ++l)
    if (spec.level_values[l] >= mu - spec.degeneracy_tol) return l;
  throw ParameterError("no eigenvalue lies at or above mu = " + std::to_string(mu));
}

template <class V>
double max_of(const V& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

RunResult run(const RunConfig& c) {
  ScopedWarningCapture warnings;
  RunResult result;
  json& rep = result.report;
  rep["version"] = version();
  rep["config_hash"] = [&] {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(c.source.dump())));
    return std::string(buf);
  }();
  rep["config"] = c.source;

  // integrals and operators
  const IntegralSet ints = stage("integrals", [&] {
    return c.fcidump ? load_fcidump(*c.fcidump) : hubbard_integrals(c.hubbard_sites, c.hubbard_t, c.hubbard_U);
  });
  rep["system"] = {{"source", c.fcidump ? c.fcidump->string() : "hubbard"},
                   {"norb", ints.norb},
                   {"nelec_header", ints.nelec},
                   {"e_core", ints.e_core}};
  if (!c.fcidump) rep["system"]["hubbard"] = {{"sites", c.hubbard_sites}, {"t", c.hubbard_t}, {"U", c.hubbard_U}};

  const SectorBasis basis = stage("sector", [&] { return SectorBasis::sector(ints.norb, c.n_alpha, c.n_beta); });
  rep["sector"] = {{"n_alpha", c.n_alpha}, {"n_beta", c.n_beta}, {"dim", basis.size()}};

  const OperatorMatrix H = stage("hamiltonian", [&] { return assemble_hamiltonian(ints, basis); });
  const OperatorMatrix S2 = stage("spin", [&] {
    return spin_square_operator(basis, SpinOpsInput::restricted(ints.norb, c.n_alpha, c.n_beta));
  });
  const Spectrum spec = stage("spectrum", [&] { return eigendecompose(H); });
  {
    json levels = json::array();
    for (int l = 0; l < std::min(spec.level_count(), 16); ++l)
      levels.push_back({{"energy", spec.level_values[l]}, {"degeneracy", spec.indices_of_level(l).size()}});
    rep["spectrum"] = {{"gap", spec.gap},
                       {"gap_defined", spec.gap_defined},
                       {"radius", spec.radius},
                       {"degeneracy_tol", spec.degeneracy_tol},
                       {"distinct_levels", spec.level_count()},
                       {"lowest_levels", levels}};
  }

  // protocol and mu
  ProtocolMode mode{c.mode, 0.0};
  int target_level = 0;
  stage("protocol", [&] {
    json pj = {{"mode", mode.label()}};
    if (c.target_level && (*c.target_level < 0 || *c.target_level >= spec.level_count()))
      throw ParameterError("target_level " + std::to_string(*c.target_level) + " out of range (" +
                           std::to_string(spec.level_count()) + " distinct levels)");
    if (c.mode == ProtocolMode::Kind::folded) {
      if (c.mu) {
        mode.mu = *c.mu;
        target_level = c.target_level.value_or(nearest_level(spec, mode.mu));
      } else {
        target_level = *c.target_level;
        mode.mu = validate_mu(spec, target_level, 0.0).centre;
      }
    } else if (c.mode == ProtocolMode::Kind::projected) {
      if (c.mu) {
        mode.mu = *c.mu;
        target_level = lowest_level_at_or_above(spec, mode.mu);
      } else {
        target_level = *c.target_level;
        mode.mu = target_level == 0 ? spec.level_values[0] - 1.0
                                    : 0.5 * (spec.level_values[target_level] + spec.level_values[target_level - 1]);
      }
    }
    if (mode.uses_mu()) {
      const auto w = validate_mu(spec, target_level, mode.mu);
      if (!w.valid) {
        std::ostringstream msg;
        msg << "mu = " << mode.mu << " lies outside the placement window of level " << target_level;
        warn(msg.str());
      }
      pj["mu"] = mode.mu;
      pj["mu_window"] = {{"lower", finite_or_null(w.lower)},
                         {"upper", finite_or_null(w.upper)},
                         {"centre", w.centre},
                         {"valid", w.valid}};
    }
    pj["target_level"] = target_level;
    rep["protocol"] = pj;
  });
  if (c.report_level) {
    if (*c.report_level < 0 || *c.report_level >= spec.level_count())
      throw ConfigError("target.level out of range");
    target_level = *c.report_level;
  }
  const CMatrix targets = spec.level_vectors(target_level);
  const double e_ref = c.e_ref.value_or(spec.level_values[target_level]);
  rep["target"] = {{"level", target_level},
                   {"energy", spec.level_values[target_level]},
                   {"degeneracy", targets.cols()},
                   {"E_ref", e_ref}};

  // couplings and jumps
  const CouplingSet couplings =
      stage("couplings", [&] { return coupling_set(basis, c.coupling_base, c.extra_couplings); });
  JumpSet jumps;
  jumps.mode = mode;
  jumps.options = c.jump;
  const Spectrum eff = effective_spectrum(spec, mode);
  const bool trivial = spec.level_count() < 2;
  if (trivial) {
    warn("sector has a single distinct level; no jump operators are built");
    rep["filter"] = nullptr;
  } else {
    const FilterSpec f = stage("filter", [&] { return resolve_filter(c, eff); });
    rep["filter"] = filter_json(f, c.jump);
    if (mode.kind == ProtocolMode::Kind::folded && spec.gap_defined)
      rep["filter_unfolded"] = filter_json(default_filter_params(spec, c.safety, c.kappa), c.jump);
    jumps = stage("jumps", [&] { return build_jump_set(spec, couplings, mode, f, c.jump); });
  }
  {
    json labels = json::array();
    for (const auto& op : couplings.ops) labels.push_back(op.label);
    rep["coupling"] = {{"kind", to_string(couplings.kind)}, {"count", couplings.ops.size()}, {"labels", labels}};
  }

  // initial state
  std::optional<OperatorMatrix> P;
  if (mode.kind == ProtocolMode::Kind::projected) P = spectral_projector(spec, basis, mode.mu);
  CVector psi0;
  CMatrix rho0;
  stage("initial_state", [&] {
    const auto D = static_cast<Eigen::Index>(basis.size());
    if (c.initial == RunConfig::Initial::maximally_mixed) {
      rho0 = CMatrix::Identity(D, D) / static_cast<double>(D);
      if (P) {
        const CMatrix p = P->to_dense();
        rho0 = p * rho0 * p;
        const double tr = rho0.trace().real();
        if (tr < 1e-8) throw NumericalError("projected initial state has norm below 1e-8");
        rho0 /= tr;
      }
      return;
    }
    ReferenceState ref = [&] {
      switch (c.initial) {
        case RunConfig::Initial::hf_aufbau: return build_reference_state(basis, ReferencePreset::hf_aufbau);
        case RunConfig::Initial::high_spin_D: return build_reference_state(basis, ReferencePreset::high_spin_D);
        default: return build_reference_state(basis, std::span<const DeterminantSpec>(c.determinants));
      }
    }();
    psi0 = ref.amplitudes;
    if (P) {
      psi0 = P->apply(psi0);
      const double n = psi0.norm();
      if (n < 1e-8) throw NumericalError("projected initial state has norm below 1e-8");
      psi0 /= n;
    }
    rho0 = psi0 * psi0.adjoint();
  });
  {
    static const char* names[] = {"hf_aufbau", "high_spin_D", "maximally_mixed", "determinants"};
    rep["initial_state"] = {{"kind", names[static_cast<int>(c.initial)]}, {"projected", P.has_value()}};
  }

  const ObservableSet obs{H, S2, targets};

  // propagation
  rep["schedule"] = {{"T", c.T}, {"dt", c.dt}};
  rep["noise"] = {{"gamma", c.noise.gamma}};
  if (c.trajectories) {
    const auto ens = stage("trajectories", [&] { return mc_trajectories(H, jumps, psi0, c.T, c.dt, obs, c.traj); });
    result.series = ens.mean;
    int total_jumps = 0;
    for (int j : ens.jump_counts) total_jumps += j;
    rep["engine"] = {{"kind", "trajectories"},
                     {"n_traj", c.traj.n_traj},
                     {"seed", c.traj.seed},
                     {"improved_sampling", c.traj.improved_sampling},
                     {"substeps", c.traj.substeps},
                     {"internal_dt", c.dt / c.traj.substeps},
                     {"no_jump_weight", ens.no_jump_weight},
                     {"total_jumps", total_jumps},
                     {"final_energy_stderr", ens.energy_stderr.back()}};
  } else {
    PropagationOptions popt;
    popt.max_superop_dim = c.max_superop_dim;
    auto prop = stage("propagation", [&] {
      const Superoperator L = build_liouvillian(H, jumps, c.noise);
      return propagate_density(L, rho0, c.T, c.dt, obs, popt);
    });
    result.series = std::move(prop.series);
    result.final_rho = std::move(prop.final_rho);
    rep["engine"] = {{"kind", "density"},
                     {"materialized", prop.materialized},
                     {"max_superop_dim", c.max_superop_dim},
                     {"internal_dt", prop.internal_dt},
                     {"seed", nullptr}};
  }

  const auto& s = result.series;
  rep["final"] = {{"time", s.times.back()},
                  {"energy", s.energy.back()},
                  {"energy_error", std::abs(s.energy.back() - e_ref)},
                  {"infidelity", s.infidelity.back()},
                  {"s2", s.s2.back()},
                  {"multiplicity", s.multiplicity.back()}};
  rep["sanity"] = {{"max_trace_err", max_of(s.trace_err)},
                   {"max_pos_err", max_of(s.pos_err)},
                   {"max_herm_err", max_of(s.herm_err)}};

  const auto t_star = time_to_chemical_accuracy(s, e_ref);
  rep["t_chemical_accuracy"] = t_star ? json(*t_star) : json(nullptr);

  const auto res = resource_estimate(mode, spec, jumps, t_star);
  rep["resource_estimate"] = {{"available", res.available}, {"trivial_sector", res.trivial_sector},
                              {"T", res.T},                 {"C_K", res.C_K},
                              {"k_norms", res.k_norms},     {"L_be_norm", res.L_be_norm},
                              {"total", res.total}};

  // diagnostics
  if (c.lindbladian_gap) {
    try {
      const Superoperator L = build_liouvillian(H, jumps, c.noise);
      const auto g = lindbladian_gap(L);
      rep["lindbladian_gap"] = {{"gap", g.gap}, {"dissipative", g.dissipative}};
    } catch (const CapacityError& e) {
      warn(std::string("lindbladian gap skipped: ") + e.what());
      rep["lindbladian_gap"] = nullptr;
    }
  }
  if (!jumps.empty()) {
    const CVector target = targets.col(0);
    std::vector<CVector> tests;
    std::vector<int> idx;
    const int limit = std::min<int>(static_cast<int>(spec.dim()), 32);
    for (int i = 0; i < limit; ++i) {
      if (spec.level_of[i] == target_level) continue;
      tests.push_back(spec.eigenvectors.col(i));
      idx.push_back(i);
    }
    const auto conn = connectivity_rates(jumps, target, tests, c.connectivity_ell);
    json states = json::array();
    for (std::size_t i = 0; i < tests.size(); ++i)
      states.push_back({{"eigenstate", idx[i]},
                        {"energy", spec.eigenvalues(idx[i])},
                        {"gamma", conn.gamma[i]},
                        {"dark", static_cast<bool>(conn.dark[i])}});
    rep["connectivity"] = {{"ell", conn.ell}, {"threshold", conn.threshold}, {"states", states}};
  }

  if (c.asp) {
    auto asp = stage("asp", [&] {
      CMatrix diag = CMatrix::Zero(H.dim(), H.dim());
      diag.diagonal() = H.to_dense().diagonal();
      const OperatorMatrix H0(basis, std::move(diag));
      const CVector start = adiabatic_initial_state(H0, H);
      return asp_propagate(AspPath{H0, H, c.asp_T, c.asp_steps}, start, c.noise, obs);
    });
    rep["asp"] = {{"T", c.asp_T},
                  {"steps", c.asp_steps},
                  {"H0", "diagonal"},
                  {"final_energy", asp.energy.back()},
                  {"final_infidelity", asp.infidelity.back()},
                  {"final_multiplicity", asp.multiplicity.back()}};
    result.asp_series = std::move(asp);
  }

  rep["warnings"] = warnings.messages();
  return result;
}

// ---------------------------------------------------------------- series I/O

std::string series_csv(const ObservableSeries& s) {
  std::string out = "time,energy,infidelity,s2,multiplicity,trace_err\n";
  char buf[32];
  auto put = [&](double x, char end) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
    out += end;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    put(s.times[i], ',');
    put(s.energy[i], ',');
    put(s.infidelity[i], ',');
    put(s.s2[i], ',');
    put(s.multiplicity[i], ',');
    put(s.trace_err[i], '\n');
  }
  return out;
}

void emit_series(const ObservableSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << series_csv(series);
  if (!out) throw Error("write failed for " + path.string());
}

ObservableSeries read_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open series file " + path.string(), 0);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != "time,energy,infidelity,s2,multiplicity,trace_err")
    throw ParseError("unexpected series header", 1);
  ObservableSeries s;
  std::vector<double>* cols[] = {&s.times, &s.energy, &s.infidelity, &s.s2, &s.multiplicity, &s.trace_err};
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    for (int k = 0; k < 6; ++k) {
      if (!std::getline(row, cell, ',')) throw ParseError("expected 6 columns", lineno);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') throw ParseError("non-numeric cell '" + cell + "'", lineno);
      cols[k]->push_back(v);
    }
  }
  s.pos_err.assign(s.times.size(), 0.0);
  s.herm_err.assign(s.times.size(), 0.0);
  return s;
}

}  // namespace dsp
