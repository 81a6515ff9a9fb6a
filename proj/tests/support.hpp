#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "dsp/dynamics.hpp"
#include "dsp/hamiltonian_io.hpp"
#include "dsp/jumps.hpp"
#include "dsp/spectral.hpp"

namespace dsp::testing {

// Hubbard dimer, t = 1, U = 4.
inline const double kSqrt2 = std::sqrt(2.0);
inline const double kE0 = 2.0 - 2.0 * kSqrt2;
inline const double kE3 = 2.0 + 2.0 * kSqrt2;

struct Dimer {
  SectorBasis basis;
  OperatorMatrix H;
  OperatorMatrix S2;
  Spectrum spec;

  Dimer(int na = 1, int nb = 1)
      : basis(SectorBasis::sector(2, na, nb)),
        H(assemble_hamiltonian(hubbard_integrals(2, 1.0, 4.0), basis)),
        S2(spin_square_operator(basis, SpinOpsInput::restricted(2, na, nb))),
        spec(eigendecompose(H)) {}

  CMatrix ground() const { return spec.level_vectors(0); }
  CMatrix triplet() const { return spec.level_vectors(1); }
  ObservableSet obs(const CMatrix& targets) const { return {H, S2, targets}; }
};

/// (n1a - n1b) - (n2a - n2b): reflection-odd, breaks the dimer's site symmetry.
inline NamedTerms staggered_spin() {
  TermList t{{1.0, parse_factors("1a^ 1a")},
             {-1.0, parse_factors("1b^ 1b")},
             {-1.0, parse_factors("2a^ 2a")},
             {1.0, parse_factors("2b^ 2b")}};
  return {"staggered spin density", t};
}

inline CouplingSet dimer_couplings(const SectorBasis& basis) {
  const std::vector<NamedTerms> extra{staggered_spin()};
  return coupling_set(basis, CouplingBase::S_II, extra);
}

inline JumpSet dimer_jumps(const Dimer& d, const ProtocolMode& mode = ProtocolMode::plain(), JumpOptions o = {}) {
  const Spectrum eff = effective_spectrum(d.spec, mode);
  return build_jump_set(d.spec, dimer_couplings(d.basis), mode, default_filter_params(eff), o);
}

inline CMatrix mixed(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return CMatrix::Identity(n, n) / static_cast<double>(d);
}

inline CMatrix random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
  return 0.5 * (a + a.adjoint());
}

// ------------------------------------------------------------ Jordan-Wigner oracle
// Basis state index = occupation bit pattern; mode k is bit k. Built from
// Kronecker products, independently of the bit-twiddling in the library.

inline CMatrix jw_annihilator(int modes, int k) {
  CMatrix lower(2, 2), z(2, 2), id = CMatrix::Identity(2, 2);
  lower << 0, 1, 0, 0;  // |0><1|
  z << 1, 0, 0, -1;
  CMatrix out = CMatrix::Identity(1, 1);
  // kron(A_{n-1}, ..., A_0): the last factor acts on the least significant bit.
  for (int m = modes - 1; m >= 0; --m) {
    const CMatrix& f = m > k ? id : (m == k ? lower : z);
    out = Eigen::kroneckerProduct(out, f).eval();
  }
  return out;
}

inline CMatrix jw_string(int modes, const std::vector<Factor>& factors) {
  const auto dim = Eigen::Index{1} << modes;
  CMatrix out = CMatrix::Identity(dim, dim);
  for (const auto& f : factors) {
    const CMatrix c = jw_annihilator(modes, static_cast<int>(f.orb.flat()));
    out = out * (f.dagger ? CMatrix(c.adjoint()) : c);
  }
  return out;
}

inline CMatrix jw_terms(int modes, const TermList& terms) {
  const auto dim = Eigen::Index{1} << modes;
  CMatrix out = CMatrix::Zero(dim, dim);
  for (const auto& t : terms) out += t.coeff * jw_string(modes, t.factors);
  return out;
}

/// Restriction of a full-Fock JW matrix to a basis' determinants.
inline CMatrix restrict_to(const CMatrix& full, const SectorBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  CMatrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = full(static_cast<Eigen::Index>(basis.det(i)), static_cast<Eigen::Index>(basis.det(j)));
  return out;
}

/// Random real integrals with the 8-fold symmetry.
inline IntegralSet random_integrals(int L, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  auto s = IntegralSet::zeros(L);
  for (int p = 0; p < L; ++p)
    for (int q = 0; q <= p; ++q) s.set_h(p, q, u(rng) + (p == q ? -2.0 + 0.5 * p : 0.0));
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < L; ++k)
        for (int l = 0; l <= k; ++l)
          if (i * (i + 1) / 2 + j >= k * (k + 1) / 2 + l) s.set_chem(i, j, k, l, u(rng) + (i == j && k == l ? 0.6 : 0.0));
  s.e_core = u(rng);
  return s;
}

}  // namespace dsp::testing
