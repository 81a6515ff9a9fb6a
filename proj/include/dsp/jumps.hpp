#pragma once

// Coupling operators, filtered jump operators for the three protocols, and the
// connectivity (dark-state) diagnostic.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsp/filter.hpp"
#include "dsp/fock_basis.hpp"
#include "dsp/spectral.hpp"

namespace dsp {

enum class CouplingKind { S_II, S_II_reduced, custom, augmented };
enum class CouplingBase { S_II, S_II_reduced, none };

struct NamedTerms {
  std::string label;
  TermList terms;
};

struct Coupling {
  std::string label;
  OperatorMatrix op;
};

struct CouplingSet {
  CouplingKind kind = CouplingKind::S_II;
  std::vector<Coupling> ops;
};

/// S_II: c+_{i s} c_{j s} + h.c. for all i < j and both spins.
/// S_II_reduced: the same restricted to j - i <= 2.
/// Extra term lists are appended after checking Hermiticity and (N_alpha, N_beta) conservation.
CouplingSet coupling_set(const SectorBasis& basis, CouplingBase base, std::span<const NamedTerms> extra = {});

/// Named quartic sets (each entry already includes its h.c.): carbon, h2o, benzene, ferrocene.
std::vector<NamedTerms> quartic_preset(std::string_view name);

std::string to_string(CouplingKind kind);

struct ProtocolMode {
  enum class Kind { plain, symmetry, folded, projected };
  Kind kind = Kind::plain;
  double mu = 0.0;

  static ProtocolMode plain() { return {Kind::plain, 0.0}; }
  static ProtocolMode symmetry() { return {Kind::symmetry, 0.0}; }
  static ProtocolMode folded(double mu) { return {Kind::folded, mu}; }
  static ProtocolMode projected(double mu) { return {Kind::projected, mu}; }

  bool uses_mu() const { return kind == Kind::folded || kind == Kind::projected; }
  std::string label() const;
};

enum class Construction { eigenbasis, quadrature };

struct JumpOptions {
  Construction construction = Construction::eigenbasis;
  bool hard_threshold = true;  // eigenbasis form only
  int M = 200;                 // quadrature form only
};

struct JumpSet {
  std::vector<OperatorMatrix> ks;
  std::vector<std::string> labels;
  ProtocolMode mode;
  JumpOptions options;
  FilterSpec filter;

  bool empty() const { return ks.empty(); }
  std::size_t size() const { return ks.size(); }
};

/// Spectrum whose ground level is the target: H itself, or (H - mu)^2 in folded mode.
Spectrum effective_spectrum(const Spectrum& spec, const ProtocolMode& mode);

/// K = sum_ij fhat(e_i - e_j) <psi_i|A|psi_j> |psi_i><psi_j| over the effective
/// energies e; hard_threshold zeroes entries whose effective level does not
/// decrease. Projected mode returns P K P with P = P_mu(H). spec is the spectrum of H.
OperatorMatrix jump_eigenbasis(const Spectrum& spec, const OperatorMatrix& A, const FilterSpec& f,
                               const ProtocolMode& mode, bool hard_threshold);

/// K = sum_j w_j f(s_j) e^{i Ht s_j} A e^{-i Ht s_j} with Ht = H or (H - mu)^2.
OperatorMatrix jump_quadrature(const Spectrum& spec, const OperatorMatrix& A, const FilterSpec& f,
                               const QuadratureRule& q, const ProtocolMode& mode);

/// One jump per coupling, built in parallel.
JumpSet build_jump_set(const Spectrum& spec, const CouplingSet& couplings, const ProtocolMode& mode,
                       const FilterSpec& f, const JumpOptions& options = {});

namespace serial {
JumpSet build_jump_set(const Spectrum& spec, const CouplingSet& couplings, const ProtocolMode& mode,
                       const FilterSpec& f, const JumpOptions& options = {});
}  // namespace serial

double spectral_norm(const CMatrix& m);
double spectral_norm(const OperatorMatrix& m);

/// Sum_k ||K_k||^2 with spectral norms.
double jump_norm_sum(const JumpSet& jumps);

struct ConnectivityReport {
  std::vector<double> gamma;
  std::vector<bool> dark;
  int ell = 1;
  double threshold = 0.0;
};

/// Gamma_i = sum_k sum_{l=1..ell} |<target|K_k^l|psi_i>|^2; dark when below
/// rel_threshold * sum_k ||K_k||^2.
ConnectivityReport connectivity_rates(const JumpSet& jumps, const CVector& target, std::span<const CVector> tests,
                                      int ell, double rel_threshold = 1e-12);

}  // namespace dsp
