#include "dsp/jumps.hpp"

#include <cmath>
#include <exception>
#include <optional>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dsp/errors.hpp"

namespace dsp {

namespace {

NamedTerms hopping_pair(int i, int j, Spin s) {
  const char sl = s == Spin::alpha ? 'a' : 'b';
  std::string label = "hop ";
  label += std::to_string(i) + sl + "<->" + std::to_string(j) + sl;
  TermList t{{1.0, {{true, {i, s}}, {false, {j, s}}}}};
  return {std::move(label), with_hermitian_conjugate(t)};
}

Coupling checked_coupling(const SectorBasis& basis, const NamedTerms& nt) {
  for (const auto& term : nt.terms) {
    if (is_identically_zero(term.factors)) continue;
    if (particle_change(term.factors) != std::pair{0, 0})
      throw ParameterError("coupling '" + nt.label + "' term " + to_string(term.factors) +
                           " does not conserve (N_alpha, N_beta)");
  }
  auto op = operator_from_terms(basis, nt.terms);
  if (!op.hermitian()) {
    std::ostringstream msg;
    msg << "coupling '" << nt.label << "' is not Hermitian (max |A - A^+| = " << op.hermiticity_error() << ")";
    throw ParameterError(msg.str());
  }
  return {nt.label, std::move(op)};
}

}  // namespace

CouplingSet coupling_set(const SectorBasis& basis, CouplingBase base, std::span<const NamedTerms> extra) {
  CouplingSet set;
  const int L = basis.orbitals();
  if (base != CouplingBase::none) {
    const int reach = base == CouplingBase::S_II_reduced ? 2 : L;
    for (auto s : {Spin::alpha, Spin::beta})
      for (int i = 1; i <= L; ++i)
        for (int j = i + 1; j <= L && j - i <= reach; ++j) set.ops.push_back(checked_coupling(basis, hopping_pair(i, j, s)));
  }
  for (const auto& nt : extra) set.ops.push_back(checked_coupling(basis, nt));

  if (extra.empty())
    set.kind = base == CouplingBase::S_II_reduced ? CouplingKind::S_II_reduced : CouplingKind::S_II;
  else
    set.kind = base == CouplingBase::none ? CouplingKind::custom : CouplingKind::augmented;
  if (base == CouplingBase::none && extra.empty()) set.kind = CouplingKind::custom;
  return set;
}

std::vector<NamedTerms> quartic_preset(std::string_view name) {
  std::vector<std::string> strings;
  if (name == "carbon")
    strings = {"2a^ 3a^ 4a 5a", "2a^ 3a 4a 5a^", "2b^ 3b^ 4b 5b", "2b^ 3b 4b 5b^", "2a^ 3a 4b^ 5b", "2a^ 3a 4b 5b^"};
  else if (name == "h2o")
    strings = {"4a^ 5a^ 6a 7a", "4a^ 5a 6a 7a^", "4b^ 5b^ 6b 7b", "4b^ 5b 6b 7b^", "4a^ 5a 6b^ 7b", "4a^ 5a 6b 7b^"};
  else if (name == "benzene")
    strings = {"2a^ 4a^ 4a 5a", "2a^ 4a 4a 5a^", "2b^ 2b^ 4b 4b", "2b^ 2b 4b 4b^", "2a^ 4a 4b^ 5b", "1a^ 3a 5b 5b^"};
  else if (name == "ferrocene")
    strings = {"3a^ 6a^ 7a 7a", "3a^ 6a 7a 7a^", "3b^ 6b^ 7b 7b", "3b^ 6b 7b 7b^", "3a^ 6a 7b^ 7b", "3a^ 6a 7b 7b^"};
  else
    throw ParameterError("unknown quartic preset '" + std::string(name) + "'");
  std::vector<NamedTerms> out;
  for (const auto& s : strings) {
    TermList t{{1.0, parse_factors(s)}};
    out.push_back({s + " + h.c.", with_hermitian_conjugate(t)});
  }
  return out;
}

std::string to_string(CouplingKind kind) {
  switch (kind) {
    case CouplingKind::S_II: return "S_II";
    case CouplingKind::S_II_reduced: return "S_II_reduced";
    case CouplingKind::custom: return "custom";
    case CouplingKind::augmented: return "augmented";
  }
  return "?";
}

std::string ProtocolMode::label() const {
  switch (kind) {
    case Kind::plain: return "plain";
    case Kind::symmetry: return "symmetry";
    case Kind::folded: return "folded";
    case Kind::projected: return "projected";
  }
  return "?";
}

Spectrum effective_spectrum(const Spectrum& spec, const ProtocolMode& mode) {
  if (mode.kind == ProtocolMode::Kind::folded) return fold_spectrum(spec, mode.mu);
  return spec;
}

namespace {

void check_dims(const Spectrum& spec, const OperatorMatrix& A) {
  if (A.dim() != spec.dim())
    throw ParameterError("coupling dimension " + std::to_string(A.dim()) + " does not match spectrum dimension " +
                         std::to_string(spec.dim()));
}

CMatrix project_both_sides(const Spectrum& spec, const CMatrix& K, double mu) {
  // P = V_>= V_>=^+, applied in the eigenbasis of H.
  const auto n = static_cast<Eigen::Index>(spec.dim());
  CMatrix Kt = spec.eigenvectors.adjoint() * K * spec.eigenvectors;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spec.eigenvalues(i) >= mu - spec.degeneracy_tol) continue;
    Kt.row(i).setZero();
    Kt.col(i).setZero();
  }
  return spec.eigenvectors * Kt * spec.eigenvectors.adjoint();
}

}  // namespace

OperatorMatrix jump_eigenbasis(const Spectrum& spec, const OperatorMatrix& A, const FilterSpec& f,
                               const ProtocolMode& mode, bool hard_threshold) {
  check_dims(spec, A);
  const Spectrum eff = effective_spectrum(spec, mode);
  const CMatrix& V = eff.eigenvectors;
  CMatrix X = V.adjoint() * A.to_dense() * V;
  const auto n = X.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const int li = eff.level_of[static_cast<std::size_t>(i)];
      const int lj = eff.level_of[static_cast<std::size_t>(j)];
      if (hard_threshold && li >= lj) {
        X(i, j) = 0.0;
        continue;
      }
      X(i, j) *= filter_freq(f, eff.level_values[static_cast<std::size_t>(li)] - eff.level_values[static_cast<std::size_t>(lj)]);
    }
  CMatrix K = V * X * V.adjoint();
  if (mode.kind == ProtocolMode::Kind::projected) K = project_both_sides(spec, K, mode.mu);
  return OperatorMatrix(A.basis(), std::move(K));
}

OperatorMatrix jump_quadrature(const Spectrum& spec, const OperatorMatrix& A, const FilterSpec& f,
                               const QuadratureRule& q, const ProtocolMode& mode) {
  check_dims(spec, A);
  const Spectrum eff = effective_spectrum(spec, mode);
  const CMatrix& V = eff.eigenvectors;
  CMatrix X = V.adjoint() * A.to_dense() * V;
  const auto n = X.rows();
  std::vector<cplx> fw(q.nodes.size());
  for (std::size_t j = 0; j < q.nodes.size(); ++j) fw[j] = q.weights[j] * filter_time(f, q.nodes[j]);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) {
      const double w = eff.eigenvalues(r) - eff.eigenvalues(c);
      cplx acc{0.0, 0.0};
      for (std::size_t j = 0; j < q.nodes.size(); ++j) acc += fw[j] * std::exp(cplx{0.0, w * q.nodes[j]});
      X(r, c) *= acc;
    }
  CMatrix K = V * X * V.adjoint();
  if (mode.kind == ProtocolMode::Kind::projected) K = project_both_sides(spec, K, mode.mu);
  return OperatorMatrix(A.basis(), std::move(K));
}

namespace {

OperatorMatrix build_one(const Spectrum& spec, const OperatorMatrix& A, const ProtocolMode& mode, const FilterSpec& f,
                         const JumpOptions& options, const QuadratureRule& q) {
  if (options.construction == Construction::quadrature) return jump_quadrature(spec, A, f, q, mode);
  return jump_eigenbasis(spec, A, f, mode, options.hard_threshold);
}

JumpSet empty_set(const CouplingSet& couplings, const ProtocolMode& mode, const FilterSpec& f,
                  const JumpOptions& options) {
  JumpSet js;
  js.mode = mode;
  js.options = options;
  js.filter = f;
  js.labels.reserve(couplings.ops.size());
  for (const auto& c : couplings.ops) js.labels.push_back(c.label);
  return js;
}

QuadratureRule rule_for(const FilterSpec& f, const JumpOptions& options) {
  f.validate();
  return options.construction == Construction::quadrature ? build_quadrature(f, options.M) : QuadratureRule{};
}

}  // namespace

JumpSet build_jump_set(const Spectrum& spec, const CouplingSet& couplings, const ProtocolMode& mode,
                       const FilterSpec& f, const JumpOptions& options) {
  auto js = empty_set(couplings, mode, f, options);
  const auto q = rule_for(f, options);
  const auto n = static_cast<std::int64_t>(couplings.ops.size());
  std::vector<std::optional<OperatorMatrix>> built(static_cast<std::size_t>(n));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < n; ++k) {
    try {
      built[static_cast<std::size_t>(k)] = build_one(spec, couplings.ops[static_cast<std::size_t>(k)].op, mode, f, options, q);
    } catch (...) {
#pragma omp critical(dsp_jump_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  for (auto& k : built) js.ks.push_back(std::move(*k));
  return js;
}

namespace serial {
JumpSet build_jump_set(const Spectrum& spec, const CouplingSet& couplings, const ProtocolMode& mode,
                       const FilterSpec& f, const JumpOptions& options) {
  auto js = empty_set(couplings, mode, f, options);
  const auto q = rule_for(f, options);
  for (const auto& c : couplings.ops) js.ks.push_back(build_one(spec, c.op, mode, f, options, q));
  return js;
}
}  // namespace serial

double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_norm(const OperatorMatrix& m) { return spectral_norm(m.to_dense()); }

double jump_norm_sum(const JumpSet& jumps) {
  double s = 0.0;
  for (const auto& k : jumps.ks) {
    const double n = spectral_norm(k);
    s += n * n;
  }
  return s;
}

ConnectivityReport connectivity_rates(const JumpSet& jumps, const CVector& target, std::span<const CVector> tests,
                                      int ell, double rel_threshold) {
  if (ell < 1) throw ParameterError("connectivity path length must be >= 1");
  ConnectivityReport rep;
  rep.ell = ell;
  rep.threshold = rel_threshold * jump_norm_sum(jumps);
  for (const auto& psi : tests) {
    if (psi.size() != target.size()) throw ParameterError("connectivity test state has the wrong dimension");
    double g = 0.0;
    for (const auto& K : jumps.ks) {
      CVector v = psi;
      for (int l = 1; l <= ell; ++l) {
        v = K.apply(v);
        g += std::norm(target.dot(v));
      }
    }
    rep.gamma.push_back(g);
    rep.dark.push_back(g < rep.threshold);
  }
  return rep;
}

}  // namespace dsp
