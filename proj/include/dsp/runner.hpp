#pragma once

// End-to-end protocol runs driven by a JSON configuration.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsp/dynamics.hpp"
#include "dsp/hamiltonian_io.hpp"
#include "dsp/jumps.hpp"
#include "dsp/observables.hpp"

namespace dsp {

using json = nlohmann::json;

struct RunConfig {
  // system
  std::optional<std::filesystem::path> fcidump;
  int hubbard_sites = 0;
  double hubbard_t = 1.0;
  double hubbard_U = 0.0;
  // sector
  int n_alpha = 0;
  int n_beta = 0;
  // protocol
  ProtocolMode::Kind mode = ProtocolMode::Kind::plain;
  std::optional<double> mu;
  std::optional<int> target_level;  // distinct-level index used to place mu
  // couplings
  CouplingBase coupling_base = CouplingBase::S_II;
  std::vector<NamedTerms> extra_couplings;
  // engine
  bool trajectories = false;
  TrajectoryOptions traj;
  std::size_t max_superop_dim = 1024;
  // filter overrides
  std::optional<double> a, b, da, db, S;
  double safety = 1.0;
  double kappa = kDefaultKappa;
  JumpOptions jump;
  // schedule and noise
  double T = 30.0;
  double dt = 0.1;
  NoiseSpec noise;
  // initial state
  enum class Initial { hf_aufbau, high_spin_D, maximally_mixed, determinants } initial = Initial::maximally_mixed;
  std::vector<DeterminantSpec> determinants;
  // stopping detection
  std::optional<int> report_level;  // overrides the protocol's natural target level
  std::optional<double> e_ref;
  // diagnostics
  bool lindbladian_gap = false;
  int connectivity_ell = 2;
  // optional adiabatic-path baseline
  bool asp = false;
  double asp_T = 50.0;
  int asp_steps = 1000;

  json source;  // the document as parsed, for hashing and echo
};

/// Throws ConfigError on structural problems.
RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

struct RunResult {
  json report;
  ObservableSeries series;
  std::optional<ObservableSeries> asp_series;
  CMatrix final_rho;  // empty for the trajectory engine
};

RunResult run(const RunConfig& config);

/// 64-bit FNV-1a over the given bytes.
std::uint64_t fnv1a(std::string_view bytes);

/// CSV: time,energy,infidelity,s2,multiplicity,trace_err with 17 significant digits.
void emit_series(const ObservableSeries& series, const std::filesystem::path& path);
std::string series_csv(const ObservableSeries& series);
ObservableSeries read_series(const std::filesystem::path& path);

const char* version();

}  // namespace dsp
