#pragma once

// Determinant bases of fixed (N_alpha, N_beta) sectors and matrices of
// fermionic operator strings over them.
//
// Spin-orbitals are flattened alpha/beta interleaved by spatial index:
// (1,a)->0, (1,b)->1, (2,a)->2, ... A determinant is a bit pattern over these
// 2L modes and the canonical state is c+_{k1} c+_{k2} ... |0> with k1 < k2 < ...
// Applying c_k or c+_k therefore picks up (-1)^(number of occupied modes below k).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Sparse>

#include "dsp/types.hpp"

namespace dsp {

enum class Spin : std::uint8_t { alpha = 0, beta = 1 };

struct SpinOrbital {
  int p = 1;  // spatial orbital, 1-based
  Spin spin = Spin::alpha;

  std::size_t flat() const { return 2 * static_cast<std::size_t>(p - 1) + static_cast<std::size_t>(spin); }
  static SpinOrbital from_flat(std::size_t k) {
    return {static_cast<int>(k / 2) + 1, k % 2 == 0 ? Spin::alpha : Spin::beta};
  }
  friend bool operator==(const SpinOrbital&, const SpinOrbital&) = default;
};

/// Occupation bit pattern over the flattened spin-orbitals.
using Determinant = std::uint64_t;

struct Factor {
  bool dagger = false;
  SpinOrbital orb;
  friend bool operator==(const Factor&, const Factor&) = default;
};

/// coeff * F_1 F_2 ... F_n; factors act right-to-left on a ket.
struct FermionTerm {
  cplx coeff{1.0, 0.0};
  std::vector<Factor> factors;
};

using TermList = std::vector<FermionTerm>;

FermionTerm adjoint(const FermionTerm& term);

/// term + h.c. for every term in the list.
TermList with_hermitian_conjugate(const TermList& terms);

/// Symbolic product X*Y (all pairs, factors concatenated).
TermList multiply(const TermList& x, const TermList& y);

/// Parses "2a^ 3a^ 4a 5a" (1-based orbital, spin letter a/b, ^ marks a creation
/// operator) into factors. Throws ParseError on malformed tokens.
std::vector<Factor> parse_factors(std::string_view text);

/// Result of applying an operator string to one determinant.
struct Application {
  int sign;
  Determinant det;
};

/// Applies factors right-to-left. Returns nullopt when the result vanishes.
std::optional<Application> apply_factors(Determinant det, std::span<const Factor> factors);

/// True if the string is identically zero (e.g. c+_k c+_k with nothing in between
/// re-emptying mode k).
bool is_identically_zero(std::span<const Factor> factors);

/// Net change of (N_alpha, N_beta) produced by the string.
std::pair<int, int> particle_change(std::span<const Factor> factors);

/// Ordered determinant basis: either one (N_alpha, N_beta) sector or the full
/// Fock space of L orbitals (the latter is used for anticommutator checks).
/// Copies share the determinant table.
class SectorBasis {
 public:
  static SectorBasis sector(int orbitals, int n_alpha, int n_beta);
  static SectorBasis full_fock(int orbitals);

  int orbitals() const { return orbitals_; }
  int n_alpha() const { return n_alpha_; }
  int n_beta() const { return n_beta_; }
  bool is_full_fock() const { return full_; }
  std::size_t size() const { return dets_->size(); }
  Determinant det(std::size_t i) const { return (*dets_)[i]; }
  std::span<const Determinant> dets() const { return *dets_; }
  std::optional<std::size_t> index_of(Determinant d) const;

  bool same_space(const SectorBasis& other) const {
    return orbitals_ == other.orbitals_ && n_alpha_ == other.n_alpha_ && n_beta_ == other.n_beta_ &&
           full_ == other.full_;
  }

 private:
  SectorBasis() = default;
  int orbitals_ = 0;
  int n_alpha_ = 0;
  int n_beta_ = 0;
  bool full_ = false;
  std::shared_ptr<const std::vector<Determinant>> dets_;
};

SectorBasis enumerate_sector(int orbitals, int n_alpha, int n_beta);

/// Bit pattern of a determinant given 1-based occupied alpha and beta orbitals.
Determinant make_determinant(std::span<const int> alpha, std::span<const int> beta);

/// Occupation count of one spin channel.
int count_spin(Determinant det, Spin spin);

using SparseCMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

/// Matrix of an operator over a SectorBasis. Stored dense below
/// kSparseThreshold, sparse at or above it; jump operators are always dense.
class OperatorMatrix {
 public:
  static constexpr std::size_t kSparseThreshold = 512;

  OperatorMatrix(SectorBasis basis, SparseCMatrix matrix);
  OperatorMatrix(SectorBasis basis, CMatrix matrix);

  const SectorBasis& basis() const { return basis_; }
  std::size_t dim() const { return basis_.size(); }
  bool is_sparse() const { return std::holds_alternative<SparseCMatrix>(storage_); }
  /// Set at construction when max|A - A^+| < 1e-12.
  bool hermitian() const { return hermitian_; }

  CMatrix to_dense() const;
  /// Pointer to the dense storage, or nullptr when sparse.
  const CMatrix* dense_storage() const { return std::get_if<CMatrix>(&storage_); }
  CVector apply(const CVector& v) const;
  cplx element(std::size_t row, std::size_t col) const;
  double hermiticity_error() const;

 private:
  SectorBasis basis_;
  std::variant<CMatrix, SparseCMatrix> storage_;
  bool hermitian_ = false;
};

/// Builds <det_i| sum_t term_t |det_j>. Terms that leave a sector (or are
/// identically zero) are dropped with a warning; out-of-range orbitals throw
/// ParameterError. Columns are built in parallel.
OperatorMatrix operator_from_terms(const SectorBasis& basis, const TermList& terms);

namespace serial {
/// Single-threaded reference for operator_from_terms.
OperatorMatrix operator_from_terms(const SectorBasis& basis, const TermList& terms);
}  // namespace serial

/// Human-readable form, e.g. "2a^ 3a^ 4a 5a".
std::string to_string(std::span<const Factor> factors);

}  // namespace dsp
