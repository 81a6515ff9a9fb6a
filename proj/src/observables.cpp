#include "dsp/observables.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dsp/errors.hpp"

namespace dsp {

double expectation(const CMatrix& rho, const OperatorMatrix& op) {
  // Tr(O rho) = sum_ij O_ij rho_ji
  if (const CMatrix* d = op.dense_storage()) return (d->transpose().cwiseProduct(rho)).sum().real();
  return (op.to_dense().transpose().cwiseProduct(rho)).sum().real();
}

double expectation(const CVector& psi, const OperatorMatrix& op) { return psi.dot(op.apply(psi)).real(); }

namespace {
void check_orthonormal(const CMatrix& states) {
  if (states.cols() == 0) return;
  const auto m = states.cols();
  const double err = (states.adjoint() * states - CMatrix::Identity(m, m)).cwiseAbs().maxCoeff();
  if (err > 1e-8) {
    std::ostringstream msg;
    msg << "target states are not orthonormal (max deviation " << err << ")";
    throw ParameterError(msg.str());
  }
}
}  // namespace

double fidelity_subspace(const CMatrix& rho, const CMatrix& states) {
  check_orthonormal(states);
  if (states.cols() == 0) return 0.0;
  return (states.adjoint() * rho * states).trace().real();
}

double fidelity_subspace_pure(const CVector& psi, const CMatrix& states) {
  check_orthonormal(states);
  if (states.cols() == 0) return 0.0;
  return (states.adjoint() * psi).squaredNorm();
}

double multiplicity_from_s2(double s2) {
  const double r = 1.0 + 4.0 * s2;
  if (r < -1e-8) throw NumericalError("negative <S^2> radicand in multiplicity");
  return std::sqrt(std::max(0.0, r));
}

double multiplicity(const CMatrix& rho, const OperatorMatrix& s2op) {
  return multiplicity_from_s2(expectation(rho, s2op));
}

DensitySanity density_sanity(const CMatrix& rho) {
  DensitySanity s;
  s.trace_err = std::abs(rho.trace() - cplx{1.0, 0.0});
  s.herm_err = rho.size() ? (rho - rho.adjoint()).cwiseAbs().maxCoeff() : 0.0;
  const CMatrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  s.pos_err = h.size() ? std::max(0.0, -es.eigenvalues()(0)) : 0.0;
  return s;
}

void record_sample(ObservableSeries& series, double t, const CMatrix& rho, const ObservableSet& obs) {
  series.times.push_back(t);
  series.energy.push_back(expectation(rho, obs.H));
  series.infidelity.push_back(obs.targets.cols() ? 1.0 - fidelity_subspace(rho, obs.targets) : 0.0);
  if (obs.s2) {
    const double s2 = expectation(rho, *obs.s2);
    series.s2.push_back(s2);
    series.multiplicity.push_back(multiplicity_from_s2(s2));
  } else {
    series.s2.push_back(0.0);
    series.multiplicity.push_back(0.0);
  }
  const auto s = density_sanity(rho);
  series.trace_err.push_back(s.trace_err);
  series.pos_err.push_back(s.pos_err);
  series.herm_err.push_back(s.herm_err);
}

OneRdm one_rdm(const CMatrix& rho, const SectorBasis& basis, const std::optional<CMatrix>& phi) {
  const int L = basis.orbitals();
  const int n = 2 * L;
  if (static_cast<std::size_t>(rho.rows()) != basis.size()) throw ParameterError("density matrix does not match basis");
  OneRdm out;
  out.spin_orbital = CMatrix::Zero(n, n);
  // Tr(rho c+_j c_i) = sum_b sum_a rho_ba <a|c+_j c_i|b>
  for (std::size_t b = 0; b < basis.size(); ++b) {
    const Determinant db = basis.det(b);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Factor f[2] = {{true, SpinOrbital::from_flat(static_cast<std::size_t>(j))},
                             {false, SpinOrbital::from_flat(static_cast<std::size_t>(i))}};
        auto res = apply_factors(db, f);
        if (!res) continue;
        auto a = basis.index_of(res->det);
        if (!a) continue;
        out.spin_orbital(i, j) += static_cast<double>(res->sign) * rho(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(*a));
      }
  }
  out.spatial = CMatrix::Zero(L, L);
  for (int p = 0; p < L; ++p)
    for (int q = 0; q < L; ++q)
      out.spatial(p, q) = out.spin_orbital(2 * p, 2 * q) + out.spin_orbital(2 * p + 1, 2 * q + 1);
  if (phi) {
    if (phi->cols() != L) throw ParameterError("orbital coefficient matrix must have L columns");
    out.spatial = (*phi) * out.spatial * phi->adjoint();
  }
  return out;
}

std::optional<double> time_to_chemical_accuracy(const ObservableSeries& series, double e_ref, double threshold,
                                                int persistence) {
  const auto n = series.energy.size();
  const auto window = static_cast<std::size_t>(persistence) + 1;
  if (n < window) return std::nullopt;
  std::size_t run = 0;  // consecutive samples below threshold ending at k
  for (std::size_t k = 0; k < n; ++k) {
    run = std::abs(series.energy[k] - e_ref) < threshold ? run + 1 : 0;
    if (run >= window) return series.times[k + 1 - window];
  }
  return std::nullopt;
}

ResourceEstimate resource_estimate(const ProtocolMode& mode, const Spectrum& spec, const JumpSet& jumps,
                                   std::optional<double> T) {
  ResourceEstimate r;
  r.k_norms = jump_norm_sum(jumps);
  r.L_be_norm = spec.radius + 0.5 * r.k_norms;

  double gap = spec.gap;
  bool gap_ok = spec.gap_defined && spec.gap > 0.0;
  if (mode.kind == ProtocolMode::Kind::projected) {
    std::vector<double> above;
    for (double lv : spec.level_values)
      if (lv >= mode.mu - spec.degeneracy_tol) above.push_back(lv);
    gap_ok = above.size() >= 2;
    gap = gap_ok ? above[1] - above[0] : 0.0;
  }
  if (!gap_ok) {
    r.trivial_sector = true;
    return r;
  }
  const double ratio = spec.radius / gap;
  r.C_K = mode.kind == ProtocolMode::Kind::folded ? ratio * ratio : ratio;
  if (!T) return r;
  r.available = true;
  r.T = *T;
  r.total = r.T * r.C_K * r.k_norms;
  return r;
}

}  // namespace dsp
