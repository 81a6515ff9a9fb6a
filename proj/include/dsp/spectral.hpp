#pragma once

// Dense diagonalization and the spectral transforms used by the protocols.

#include <cstddef>
#include <limits>
#include <vector>

#include "dsp/fock_basis.hpp"
#include "dsp/types.hpp"

namespace dsp {

struct Spectrum {
  RVector eigenvalues;   // ascending
  CMatrix eigenvectors;  // columns
  double gap = 0.0;      // lowest two distinct levels
  bool gap_defined = false;
  double radius = 0.0;  // max |lambda|
  double degeneracy_tol = 0.0;
  std::vector<int> level_of;         // eigenvalue index -> distinct level
  std::vector<double> level_values;  // mean of each cluster

  std::size_t dim() const { return static_cast<std::size_t>(eigenvalues.size()); }
  int level_count() const { return static_cast<int>(level_values.size()); }
  std::vector<int> indices_of_level(int level) const;
  /// Orthonormal columns spanning one level.
  CMatrix level_vectors(int level) const;
};

inline constexpr std::size_t kDenseLimit = 5000;

/// degeneracy_tol < 0 selects 1e-8 * max(1, radius).
Spectrum eigendecompose(const OperatorMatrix& H, double degeneracy_tol = -1.0, std::size_t dense_limit = kDenseLimit);

/// Builds a Spectrum from eigenpairs in arbitrary order (sorted here).
Spectrum spectrum_from_pairs(RVector values, CMatrix vectors, double degeneracy_tol = -1.0);

/// (H - mu I)^2.
OperatorMatrix folded_operator(const OperatorMatrix& H, double mu);

/// Spectrum of (H - mu I)^2 obtained from that of H.
Spectrum fold_spectrum(const Spectrum& spec, double mu);

struct MuPlacement {
  bool valid = false;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  /// Window midpoint, or the target level itself when a side is unbounded.
  double centre = 0.0;
};

/// Strict test (lambda_t + lambda_<)/2 < mu < (lambda_> + lambda_t)/2 over distinct levels.
MuPlacement validate_mu(const Spectrum& spec, int target_level, double mu);

/// Sum of |psi_i><psi_i| over lambda_i >= mu (closed at mu).
OperatorMatrix spectral_projector(const Spectrum& spec, const SectorBasis& basis, double mu);

}  // namespace dsp
