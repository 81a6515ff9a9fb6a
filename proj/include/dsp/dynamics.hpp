#pragma once

// Lindblad propagation (vectorized exact or RK4), quantum-jump trajectories,
// the Lindbladian gap and the adiabatic-path baseline.

#include <cstdint>
#include <vector>

#include "dsp/fock_basis.hpp"
#include "dsp/jumps.hpp"
#include "dsp/observables.hpp"
#include "dsp/types.hpp"

namespace dsp {

struct NoiseSpec {
  double gamma = 0.0;  // depolarizing rate
};

/// L[rho] = -i[H, rho] + sum_k (K rho K^+ - 1/2 {K^+K, rho}) + gamma (Tr(rho) I/d - rho).
/// H is stored shifted by its mean diagonal, which leaves the commutator unchanged.
class Superoperator {
 public:
  Superoperator(CMatrix H, std::vector<CMatrix> ks, NoiseSpec noise);

  std::size_t dim() const { return static_cast<std::size_t>(H_.rows()); }
  const CMatrix& hamiltonian() const { return H_; }
  const std::vector<CMatrix>& jumps() const { return ks_; }
  const NoiseSpec& noise() const { return noise_; }
  bool dissipative() const;

  /// Column-parallel action; every column is computed the same way for any thread count.
  CMatrix apply(const CMatrix& rho) const;
  /// D^2 x D^2 matrix acting on column-major vec(rho).
  CMatrix materialize() const;
  /// Upper bound on the operator 2-norm of the action.
  double norm_estimate() const;

 private:
  CMatrix H_;
  std::vector<CMatrix> ks_;
  CMatrix G_;  // sum K^+ K
  NoiseSpec noise_;
};

namespace serial {
CMatrix apply(const Superoperator& L, const CMatrix& rho);
}  // namespace serial

Superoperator build_liouvillian(const OperatorMatrix& H, const JumpSet& jumps, const NoiseSpec& noise);

struct PropagationOptions {
  std::size_t max_superop_dim = 1024;  // materialize when D^2 <= this
  double trace_tolerance = 1e-6;
};

struct PropagationResult {
  ObservableSeries series;
  CMatrix final_rho;
  bool materialized = false;
  double internal_dt = 0.0;
};

/// Samples at t = 0, dt, ..., T. Throws NumericalError when the trace drifts beyond tolerance.
PropagationResult propagate_density(const Superoperator& L, const CMatrix& rho0, double T, double dt,
                                    const ObservableSet& obs, const PropagationOptions& options = {});

struct GapResult {
  double gap = 0.0;
  bool dissipative = false;
};

/// -max Re(lambda) over eigenvalues with |lambda| > 1e-10 max|L_ij|.
GapResult lindbladian_gap(const Superoperator& L, std::size_t max_superop_dim = 4096);

struct AspPath {
  OperatorMatrix H0;
  OperatorMatrix H1;
  double T = 0.0;
  int steps = 0;
};

/// Piecewise-constant sweep H(s) = (1 - s/T) H0 + (s/T) H1 evaluated at step midpoints.
/// With gamma > 0 each step applies the exact unitary-plus-depolarizing map.
ObservableSeries asp_propagate(const AspPath& path, const CVector& psi0, const NoiseSpec& noise,
                               const ObservableSet& obs);

/// Ground state of H0. A degenerate ground level is resolved by H1 at first order,
/// then at second order if the first-order block is still degenerate.
CVector adiabatic_initial_state(const OperatorMatrix& H0, const OperatorMatrix& H1);

struct TrajectoryOptions {
  int n_traj = 800;
  std::uint64_t seed = 1;
  bool improved_sampling = true;
  int substeps = 10;
};

struct TrajectoryEnsemble {
  std::vector<double> times;
  /// One entry per recorded trajectory; with improved sampling the first is the no-jump one.
  std::vector<double> weights;
  std::vector<std::vector<double>> energy;
  std::vector<std::vector<double>> fidelity;
  std::vector<int> jump_counts;
  double no_jump_weight = 0.0;
  bool improved_sampling = false;

  ObservableSeries mean;
  std::vector<double> energy_stderr;
};

/// Quantum-jump unraveling; aggregates are bit-identical for a fixed seed and any thread count.
TrajectoryEnsemble mc_trajectories(const OperatorMatrix& H, const JumpSet& jumps, const CVector& psi0, double T,
                                   double dt, const ObservableSet& obs, const TrajectoryOptions& options = {});

namespace serial {
TrajectoryEnsemble mc_trajectories(const OperatorMatrix& H, const JumpSet& jumps, const CVector& psi0, double T,
                                   double dt, const ObservableSet& obs, const TrajectoryOptions& options = {});
}  // namespace serial

/// Number of samples after t = 0 for a schedule; T must be a multiple of dt to 1e-9 relative.
int sample_count(double T, double dt);

}  // namespace dsp
