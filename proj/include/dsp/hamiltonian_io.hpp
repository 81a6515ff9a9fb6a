#pragma once

// Integral sets (FCIDUMP files or the built-in Hubbard chain), the
// second-quantized Hamiltonian, spin operators and reference states.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsp/fock_basis.hpp"
#include "dsp/types.hpp"

namespace dsp {

/// One- and two-electron integrals over L spatial orbitals. Two-electron
/// integrals are stored in physicists' order V_pqrs (0-based), i.e. the
/// coefficient of c+_p c+_q c_s c_r; the chemists' (pr|qs) is the same number.
struct IntegralSet {
  int norb = 0;
  int nelec = 0;  // hint from the file header
  int ms2 = 0;    // advisory
  int isym = 0;
  std::vector<int> orbsym;  // parsed, unused
  RMatrix h;
  std::vector<double> v;  // size L^4
  double e_core = 0.0;

  static IntegralSet zeros(int norb);

  std::size_t index(int p, int q, int r, int s) const {
    const auto L = static_cast<std::size_t>(norb);
    return ((static_cast<std::size_t>(p) * L + q) * L + r) * L + s;
  }
  double V(int p, int q, int r, int s) const { return v[index(p, q, r, s)]; }
  /// Chemists' (ij|kl), 0-based.
  double chem(int i, int j, int k, int l) const { return V(i, k, j, l); }
  /// Sets (ij|kl) and all eight symmetry-equivalent entries.
  void set_chem(int i, int j, int k, int l, double value);
  void set_h(int p, int q, double value);

  /// Largest violation of h = h^T and of the 8-fold (ij|kl) symmetry.
  double symmetry_error() const;
};

/// Parses Molpro-style FCIDUMP text. Throws ParseError with a line number.
IntegralSet parse_fcidump(std::istream& in);
IntegralSet parse_fcidump_text(std::string_view text);
IntegralSet load_fcidump(const std::filesystem::path& path);

/// Writes FCIDUMP text with 17 significant digits; only unique (i>=j, k>=l,
/// ij>=kl) records with nonzero values are emitted.
std::string write_fcidump(const IntegralSet& ints);

/// Open Hubbard chain: h_{p,p+1} = -t, V_pppp = U.
IntegralSet hubbard_integrals(int sites, double t, double U);

/// The full term list sum h_pq c+c + 1/2 sum V_pqrs c+c+cc (without E_core).
TermList hamiltonian_terms(const IntegralSet& ints);

/// H over a sector, parallel over determinant columns.
OperatorMatrix assemble_hamiltonian(const IntegralSet& ints, const SectorBasis& basis);

namespace serial {
/// Reference route: operator_from_terms over hamiltonian_terms plus E_core.
OperatorMatrix assemble_hamiltonian(const IntegralSet& ints, const SectorBasis& basis);
}  // namespace serial

struct SpinOpsInput {
  CMatrix overlap;  // M = Phi_alpha^+ Phi_beta
  int n_alpha = 0;
  int n_beta = 0;

  static SpinOpsInput restricted(int orbitals, int n_alpha, int n_beta);
};

OperatorMatrix spin_square_operator(const SectorBasis& basis, const SpinOpsInput& spin);
OperatorMatrix number_operator(const SectorBasis& basis, Spin spin);

struct ReferenceState {
  SectorBasis basis;
  CVector amplitudes;
};

struct DeterminantSpec {
  std::vector<int> alpha;  // 1-based occupied orbitals
  std::vector<int> beta;
  cplx coeff{1.0, 0.0};
};

enum class ReferencePreset { hf_aufbau, high_spin_D };

/// hf_aufbau fills the lowest orbitals. high_spin_D is the equal-weight
/// combination of the four double excitations (n-1,n -> n+1,n+2) out of a
/// closed shell with n = N_alpha = N_beta; for carbon (n=3) these are
///   2b3a->4b5a, 2a3b->4a5b, 2b3b->4b5b, 2a3a->4a5a.
/// The last one replaces the commonly quoted 2a3a->4a5b, which would leave
/// the (N_alpha, N_beta) sector.
ReferenceState build_reference_state(const SectorBasis& basis, ReferencePreset preset);
ReferenceState build_reference_state(const SectorBasis& basis, std::span<const DeterminantSpec> dets);

}  // namespace dsp
