#include "dsp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"

namespace dsp {

std::vector<int> Spectrum::indices_of_level(int level) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < level_of.size(); ++i)
    if (level_of[i] == level) out.push_back(static_cast<int>(i));
  return out;
}

CMatrix Spectrum::level_vectors(int level) const {
  const auto idx = indices_of_level(level);
  CMatrix out(eigenvectors.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = eigenvectors.col(idx[c]);
  return out;
}

Spectrum spectrum_from_pairs(RVector values, CMatrix vectors, double degeneracy_tol) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values(a) < values(b); });

  Spectrum s;
  s.eigenvalues.resize(n);
  s.eigenvectors.resize(vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.eigenvalues(i) = values(order[static_cast<std::size_t>(i)]);
    s.eigenvectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  s.radius = n ? s.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  s.degeneracy_tol = degeneracy_tol >= 0.0 ? degeneracy_tol : 1e-8 * std::max(1.0, s.radius);

  // Consecutive eigenvalues closer than the tolerance share a level.
  s.level_of.resize(static_cast<std::size_t>(n));
  std::vector<double> sums;
  std::vector<int> counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == 0 || s.eigenvalues(i) - s.eigenvalues(i - 1) > s.degeneracy_tol) {
      sums.push_back(0.0);
      counts.push_back(0);
    }
    sums.back() += s.eigenvalues(i);
    ++counts.back();
    s.level_of[static_cast<std::size_t>(i)] = static_cast<int>(sums.size()) - 1;
  }
  for (std::size_t l = 0; l < sums.size(); ++l) s.level_values.push_back(sums[l] / counts[l]);
  s.gap_defined = s.level_values.size() >= 2;
  s.gap = s.gap_defined ? s.level_values[1] - s.level_values[0] : 0.0;
  return s;
}

Spectrum eigendecompose(const OperatorMatrix& H, double degeneracy_tol, std::size_t dense_limit) {
  if (H.dim() > dense_limit) {
    std::ostringstream msg;
    msg << "dimension " << H.dim() << " exceeds the dense diagonalization limit " << dense_limit;
    throw CapacityError(msg.str());
  }
  if (!H.hermitian()) {
    std::ostringstream msg;
    msg << "eigendecompose needs a Hermitian operator (max |H - H^+| = " << H.hermiticity_error() << ")";
    throw ParameterError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(H.to_dense());
  if (solver.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
  return spectrum_from_pairs(solver.eigenvalues(), solver.eigenvectors(), degeneracy_tol);
}

OperatorMatrix folded_operator(const OperatorMatrix& H, double mu) {
  CMatrix shifted = H.to_dense();
  shifted.diagonal().array() -= mu;
  CMatrix sq = shifted * shifted;
  sq = 0.5 * (sq + sq.adjoint()).eval();
  return OperatorMatrix(H.basis(), std::move(sq));
}

Spectrum fold_spectrum(const Spectrum& spec, double mu) {
  RVector folded = (spec.eigenvalues.array() - mu).square().matrix();
  const double radius = folded.size() ? folded.cwiseAbs().maxCoeff() : 0.0;
  return spectrum_from_pairs(std::move(folded), spec.eigenvectors, 1e-8 * std::max(1.0, radius));
}

MuPlacement validate_mu(const Spectrum& spec, int target_level, double mu) {
  if (target_level < 0 || target_level >= spec.level_count())
    throw ParameterError("target level " + std::to_string(target_level) + " out of range (" +
                         std::to_string(spec.level_count()) + " distinct levels)");
  MuPlacement p;
  const double lt = spec.level_values[static_cast<std::size_t>(target_level)];
  if (target_level > 0) p.lower = 0.5 * (lt + spec.level_values[static_cast<std::size_t>(target_level) - 1]);
  if (target_level + 1 < spec.level_count())
    p.upper = 0.5 * (lt + spec.level_values[static_cast<std::size_t>(target_level) + 1]);
  p.valid = p.lower < mu && mu < p.upper;
  p.centre = (std::isinf(p.lower) || std::isinf(p.upper)) ? lt : 0.5 * (p.lower + p.upper);
  return p;
}

OperatorMatrix spectral_projector(const Spectrum& spec, const SectorBasis& basis, double mu) {
  const auto n = static_cast<Eigen::Index>(spec.dim());
  if (static_cast<std::size_t>(n) != basis.size()) throw ParameterError("projector basis does not match spectrum");
  CMatrix P = CMatrix::Zero(n, n);
  bool warned = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = spec.eigenvalues(i);
    if (!warned && std::abs(lam - mu) <= spec.degeneracy_tol) {
      warned = true;
      std::ostringstream msg;
      msg << "projector threshold mu = " << mu << " coincides with eigenvalue " << lam << "; the level is included";
      warn(msg.str());
    }
    if (lam >= mu - spec.degeneracy_tol) P.noalias() += spec.eigenvectors.col(i) * spec.eigenvectors.col(i).adjoint();
  }
  return OperatorMatrix(basis, std::move(P));
}

}  // namespace dsp
