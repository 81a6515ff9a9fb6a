#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "dsp/diagnostics.hpp"
#include "dsp/dynamics.hpp"
#include "dsp/errors.hpp"

namespace dsp {

namespace {

struct Engine {
  CMatrix heff;  // H - i/2 sum K^+K
  CMatrix step;  // exp(-i heff delta)
  std::vector<CMatrix> ks;
  double delta = 0.0;
  int substeps = 1;
  double heff_norm = 0.0;  // 1-norm

  // exp(-i heff tau) psi by Taylor series, split so each piece has norm <= 1/2.
  CVector expmv(const CVector& psi, double tau) const {
    if (tau <= 0.0) return psi;
    const int pieces = std::max(1, static_cast<int>(std::ceil(2.0 * heff_norm * tau)));
    const double h = tau / pieces;
    CVector v = psi;
    for (int p = 0; p < pieces; ++p) {
      CVector term = v;
      CVector acc = v;
      for (int k = 1; k <= 40; ++k) {
        term = (-kI * h / static_cast<double>(k)) * (heff * term);
        acc += term;
        if (term.norm() <= 1e-17 * acc.norm()) break;
      }
      v = acc;
    }
    return v;
  }
};

Engine make_engine(const OperatorMatrix& H, const JumpSet& jumps, double dt, int substeps) {
  Engine e;
  e.heff = H.to_dense();
  for (const auto& k : jumps.ks) {
    e.ks.push_back(k.to_dense());
    e.heff -= 0.5 * kI * (e.ks.back().adjoint() * e.ks.back());
  }
  e.substeps = substeps;
  e.delta = dt / substeps;
  e.step = (-kI * e.delta * e.heff).exp();
  e.heff_norm = e.heff.cwiseAbs().colwise().sum().maxCoeff();
  return e;
}

struct Recorded {
  std::vector<double> energy;
  std::vector<double> fidelity;
  std::vector<double> s2;
  int jumps = 0;
};

void record_pure(Recorded& r, const CVector& psi, const ObservableSet& obs) {
  const CVector phi = psi.normalized();
  r.energy.push_back(expectation(phi, obs.H));
  r.fidelity.push_back(obs.targets.cols() ? fidelity_subspace_pure(phi, obs.targets) : 1.0);
  r.s2.push_back(obs.s2 ? expectation(phi, *obs.s2) : 0.0);
}

// Deterministic no-jump evolution on the sampling grid.
Recorded no_jump_run(const Engine& e, const CVector& psi0, int samples, const ObservableSet& obs, double& survival) {
  Recorded r;
  CVector psi = psi0;
  record_pure(r, psi, obs);
  for (int i = 1; i <= samples; ++i) {
    for (int s = 0; s < e.substeps; ++s) psi = e.step * psi;
    if (psi.squaredNorm() == 0.0) throw NumericalError("no-jump trajectory decayed to zero norm");
    record_pure(r, psi, obs);
  }
  survival = psi.squaredNorm();
  return r;
}

class Trajectory {
 public:
  Trajectory(const Engine& e, std::mt19937_64 rng) : e_(e), rng_(std::move(rng)) {}

  Recorded run(const CVector& psi0, int samples, const ObservableSet& obs, double first_r1_floor) {
    Recorded r;
    CVector psi = psi0;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double r1 = first_r1_floor + (1.0 - first_r1_floor) * u01(rng_);
    record_pure(r, psi, obs);
    for (int i = 1; i <= samples; ++i) {
      for (int s = 0; s < e_.substeps; ++s) {
        double remaining = e_.delta;
        while (remaining > 0.0) {
          CVector next = remaining == e_.delta ? CVector(e_.step * psi) : e_.expmv(psi, remaining);
          if (next.squaredNorm() > r1) {
            psi = std::move(next);
            break;
          }
          const double tau = crossing(psi, remaining, r1);
          psi = e_.expmv(psi, tau);
          remaining -= tau;
          if (remaining < 1e-15 * e_.delta) remaining = 0.0;
          if (jump(psi, u01)) ++r.jumps;
          r1 = u01(rng_);
        }
      }
      record_pure(r, psi, obs);
    }
    return r;
  }

 private:
  // Bisection for ||exp(-i heff t) psi||^2 = r1 on [0, width].
  double crossing(const CVector& psi, double width, double r1) const {
    double lo = 0.0, hi = width;
    const double tol = 1e-3 * e_.delta * e_.substeps;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (e_.expmv(psi, mid).squaredNorm() > r1)
        lo = mid;
      else
        hi = mid;
    }
    return hi;
  }

  // Applies a channel chosen by cumulative weights; returns false if every channel vanishes.
  bool jump(CVector& psi, std::uniform_real_distribution<double>& u01) {
    const CVector phi = psi.normalized();
    std::vector<double> w(e_.ks.size());
    std::vector<CVector> out(e_.ks.size());
    double total = 0.0;
    for (std::size_t k = 0; k < e_.ks.size(); ++k) {
      out[k] = e_.ks[k] * phi;
      w[k] = out[k].squaredNorm();
      total += w[k];
    }
    if (!(total > 0.0)) {
      warn("trajectory reached a jump with zero total rate; redrawing the threshold");
      psi = phi;
      return false;
    }
    const double r2 = u01(rng_) * total;
    double cum = 0.0;
    std::size_t pick = e_.ks.size() - 1;
    for (std::size_t k = 0; k < e_.ks.size(); ++k) {
      cum += w[k];
      if (r2 < cum && w[k] > 0.0) {
        pick = k;
        break;
      }
    }
    while (w[pick] == 0.0) --pick;
    psi = out[pick] / std::sqrt(w[pick]);
    return true;
  }

  const Engine& e_;
  std::mt19937_64 rng_;
};

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

TrajectoryEnsemble run_ensemble(const OperatorMatrix& H, const JumpSet& jumps, const CVector& psi0, double T,
                                double dt, const ObservableSet& obs, const TrajectoryOptions& opt, bool parallel) {
  if (opt.n_traj < 1) throw ParameterError("trajectory count must be >= 1");
  if (opt.substeps < 1) throw ParameterError("trajectory substeps must be >= 1");
  if (static_cast<std::size_t>(psi0.size()) != H.dim()) throw ParameterError("initial state dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-8) throw ParameterError("initial state must be normalized");
  const int samples = sample_count(T, dt);
  const Engine e = make_engine(H, jumps, dt, opt.substeps);

  double rate = 0.0;
  for (const auto& k : e.ks) rate += (k * psi0).squaredNorm();
  if (rate * dt > 0.1) {
    std::ostringstream msg;
    msg << "initial jump probability per sample interval is " << rate * dt << " (> 0.1); consider a smaller dt";
    warn(msg.str());
  }

  TrajectoryEnsemble ens;
  ens.improved_sampling = opt.improved_sampling;
  for (int i = 0; i <= samples; ++i) ens.times.push_back(i * dt);

  std::vector<Recorded> runs;
  std::vector<double> weights;
  double floor = 0.0;
  double jump_share = 1.0;
  if (opt.improved_sampling) {
    double p = 1.0;
    runs.push_back(no_jump_run(e, psi0, samples, obs, p));
    p = std::min(1.0, p);
    weights.push_back(p);
    ens.no_jump_weight = p;
    floor = p;
    jump_share = 1.0 - p;
  }

  const bool sample_jumps = !opt.improved_sampling || jump_share > 0.0;
  if (sample_jumps) {
    const std::size_t offset = runs.size();
    runs.resize(offset + static_cast<std::size_t>(opt.n_traj));
    const auto n = static_cast<std::int64_t>(opt.n_traj);
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
    for (std::int64_t t = 0; t < n; ++t) {
      try {
        Trajectory traj(e, stream_for(opt.seed, static_cast<std::uint64_t>(t)));
        runs[offset + static_cast<std::size_t>(t)] = traj.run(psi0, samples, obs, floor);
      } catch (...) {
#pragma omp critical(dsp_traj_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    for (int t = 0; t < opt.n_traj; ++t) weights.push_back(jump_share / opt.n_traj);
  }

  ens.weights = weights;
  for (const auto& r : runs) {
    ens.energy.push_back(r.energy);
    ens.fidelity.push_back(r.fidelity);
    ens.jump_counts.push_back(r.jumps);
  }

  // Weighted means in index order; stderr from the sampled (jumping) trajectories.
  const std::size_t first_sampled = opt.improved_sampling ? 1 : 0;
  const std::size_t n_sampled = runs.size() - first_sampled;
  auto& m = ens.mean;
  for (int i = 0; i <= samples; ++i) {
    const auto si = static_cast<std::size_t>(i);
    double E = 0.0, F = 0.0, S = 0.0, W = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      E += weights[r] * runs[r].energy[si];
      F += weights[r] * runs[r].fidelity[si];
      S += weights[r] * runs[r].s2[si];
      W += weights[r];
    }
    m.times.push_back(ens.times[si]);
    m.energy.push_back(E);
    m.infidelity.push_back(obs.targets.cols() ? 1.0 - F : 0.0);
    m.s2.push_back(S);
    m.multiplicity.push_back(obs.s2 ? multiplicity_from_s2(S) : 0.0);
    m.trace_err.push_back(std::abs(W - 1.0));
    m.pos_err.push_back(0.0);
    m.herm_err.push_back(0.0);

    double se = 0.0;
    if (n_sampled > 1) {
      double mean = 0.0;
      for (std::size_t r = first_sampled; r < runs.size(); ++r) mean += runs[r].energy[si];
      mean /= static_cast<double>(n_sampled);
      double var = 0.0;
      for (std::size_t r = first_sampled; r < runs.size(); ++r) var += std::pow(runs[r].energy[si] - mean, 2);
      var /= static_cast<double>(n_sampled - 1);
      se = std::sqrt(var / static_cast<double>(n_sampled));
      if (opt.improved_sampling) se *= jump_share;
    }
    ens.energy_stderr.push_back(se);
  }
  return ens;
}

}  // namespace

TrajectoryEnsemble mc_trajectories(const OperatorMatrix& H, const JumpSet& jumps, const CVector& psi0, double T,
                                   double dt, const ObservableSet& obs, const TrajectoryOptions& options) {
  return run_ensemble(H, jumps, psi0, T, dt, obs, options, true);
}

namespace serial {
TrajectoryEnsemble mc_trajectories(const OperatorMatrix& H, const JumpSet& jumps, const CVector& psi0, double T,
                                   double dt, const ObservableSet& obs, const TrajectoryOptions& options) {
  return run_ensemble(H, jumps, psi0, T, dt, obs, options, false);
}
}  // namespace serial

}  // namespace dsp
