#include "dsp/fock_basis.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <sstream>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"

namespace dsp {
namespace {

constexpr int kMaxOrbitals = 32;

// All L-bit strings with n ones, ascending.
std::vector<std::uint32_t> strings_with(int orbitals, int n) {
  std::vector<std::uint32_t> out;
  const std::uint64_t end = std::uint64_t{1} << orbitals;
  for (std::uint64_t s = 0; s < end; ++s)
    if (std::popcount(s) == n) out.push_back(static_cast<std::uint32_t>(s));
  return out;
}

// Spreads spatial occupation bits of one spin channel into the interleaved layout.
Determinant interleave(std::uint32_t alpha, std::uint32_t beta) {
  Determinant d = 0;
  for (int p = 0; p < kMaxOrbitals; ++p) {
    if ((alpha >> p) & 1u) d |= Determinant{1} << (2 * p);
    if ((beta >> p) & 1u) d |= Determinant{1} << (2 * p + 1);
  }
  return d;
}

void check_range(const FermionTerm& term, int orbitals) {
  for (const auto& f : term.factors)
    if (f.orb.p < 1 || f.orb.p > orbitals)
      throw ParameterError("orbital index " + std::to_string(f.orb.p) + " out of range 1.." +
                           std::to_string(orbitals));
}

// Decides, once per term, whether it can contribute in this basis.
bool term_usable(const SectorBasis& basis, const FermionTerm& term) {
  if (term.coeff == cplx{0.0, 0.0}) return false;
  if (is_identically_zero(term.factors)) {
    warn("term " + to_string(term.factors) + " is identically zero (repeated operator); dropped");
    return false;
  }
  if (!basis.is_full_fock()) {
    auto [da, db] = particle_change(term.factors);
    if (da != 0 || db != 0) {
      warn("term " + to_string(term.factors) + " does not conserve (N_alpha, N_beta); dropped");
      return false;
    }
  }
  return true;
}

using Column = std::vector<Eigen::Triplet<cplx>>;

void fill_column(const SectorBasis& basis, const std::vector<const FermionTerm*>& terms, std::size_t j,
                 Column& col) {
  const Determinant ket = basis.det(j);
  for (const auto* term : terms) {
    auto res = apply_factors(ket, term->factors);
    if (!res) continue;
    auto i = basis.index_of(res->det);
    if (!i) continue;
    col.emplace_back(static_cast<int>(*i), static_cast<int>(j), term->coeff * static_cast<double>(res->sign));
  }
}

OperatorMatrix assemble(const SectorBasis& basis, std::vector<Column>& cols) {
  std::size_t nnz = 0;
  for (const auto& c : cols) nnz += c.size();
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(nnz);
  for (auto& c : cols) triplets.insert(triplets.end(), c.begin(), c.end());
  const auto n = static_cast<Eigen::Index>(basis.size());
  SparseCMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return OperatorMatrix(basis, std::move(m));
}

std::vector<const FermionTerm*> usable_terms(const SectorBasis& basis, const TermList& terms) {
  std::vector<const FermionTerm*> out;
  for (const auto& t : terms) {
    check_range(t, basis.orbitals());
    if (term_usable(basis, t)) out.push_back(&t);
  }
  return out;
}

}  // namespace

FermionTerm adjoint(const FermionTerm& term) {
  FermionTerm out{std::conj(term.coeff), {}};
  out.factors.reserve(term.factors.size());
  for (auto it = term.factors.rbegin(); it != term.factors.rend(); ++it)
    out.factors.push_back({!it->dagger, it->orb});
  return out;
}

TermList with_hermitian_conjugate(const TermList& terms) {
  TermList out;
  out.reserve(2 * terms.size());
  for (const auto& t : terms) {
    out.push_back(t);
    out.push_back(adjoint(t));
  }
  return out;
}

TermList multiply(const TermList& x, const TermList& y) {
  TermList out;
  out.reserve(x.size() * y.size());
  for (const auto& a : x)
    for (const auto& b : y) {
      FermionTerm t{a.coeff * b.coeff, a.factors};
      t.factors.insert(t.factors.end(), b.factors.begin(), b.factors.end());
      out.push_back(std::move(t));
    }
  return out;
}

std::vector<Factor> parse_factors(std::string_view text) {
  std::vector<Factor> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    while (pos < tok.size() && std::isdigit(static_cast<unsigned char>(tok[pos]))) ++pos;
    if (pos == 0 || pos > 4 || pos == tok.size()) throw ParseError("malformed operator token '" + tok + "'", 0);
    Factor f;
    f.orb.p = std::stoi(tok.substr(0, pos));
    if (f.orb.p < 1) throw ParseError("orbital indices are 1-based in operator token '" + tok + "'", 0);
    const char s = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[pos])));
    if (s == 'a')
      f.orb.spin = Spin::alpha;
    else if (s == 'b')
      f.orb.spin = Spin::beta;
    else
      throw ParseError("unknown spin label in operator token '" + tok + "'", 0);
    ++pos;
    if (pos < tok.size()) {
      if (tok.substr(pos) != "^") throw ParseError("malformed operator token '" + tok + "'", 0);
      f.dagger = true;
    }
    out.push_back(f);
  }
  return out;
}

std::optional<Application> apply_factors(Determinant det, std::span<const Factor> factors) {
  int sign = 1;
  for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
    const auto k = it->orb.flat();
    const Determinant bit = Determinant{1} << k;
    const bool occupied = (det & bit) != 0;
    if (it->dagger == occupied) return std::nullopt;
    if (std::popcount(det & (bit - 1)) & 1) sign = -sign;
    det ^= bit;
  }
  return Application{sign, det};
}

bool is_identically_zero(std::span<const Factor> factors) {
  // Mode k must alternate between being emptied and filled, read right-to-left.
  std::vector<std::pair<std::size_t, bool>> last;  // (mode, last op was dagger)
  for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
    const auto k = it->orb.flat();
    auto found = std::find_if(last.begin(), last.end(), [k](const auto& e) { return e.first == k; });
    if (found == last.end()) {
      last.emplace_back(k, it->dagger);
    } else {
      if (found->second == it->dagger) return true;
      found->second = it->dagger;
    }
  }
  return false;
}

std::pair<int, int> particle_change(std::span<const Factor> factors) {
  int da = 0, db = 0;
  for (const auto& f : factors) {
    int& d = f.orb.spin == Spin::alpha ? da : db;
    d += f.dagger ? 1 : -1;
  }
  return {da, db};
}

SectorBasis SectorBasis::sector(int orbitals, int n_alpha, int n_beta) {
  if (orbitals < 1 || orbitals > kMaxOrbitals)
    throw ParameterError("orbital count must lie in 1.." + std::to_string(kMaxOrbitals));
  if (n_alpha < 0 || n_beta < 0 || n_alpha > orbitals || n_beta > orbitals)
    throw ParameterError("electron counts (" + std::to_string(n_alpha) + "," + std::to_string(n_beta) +
                         ") invalid for " + std::to_string(orbitals) + " orbitals");
  if (orbitals > 20) throw CapacityError("sector enumeration limited to 20 orbitals");
  SectorBasis b;
  b.orbitals_ = orbitals;
  b.n_alpha_ = n_alpha;
  b.n_beta_ = n_beta;
  auto dets = std::make_shared<std::vector<Determinant>>();
  const auto as = strings_with(orbitals, n_alpha);
  const auto bs = strings_with(orbitals, n_beta);
  dets->reserve(as.size() * bs.size());
  for (auto a : as)
    for (auto bb : bs) dets->push_back(interleave(a, bb));
  std::sort(dets->begin(), dets->end());
  b.dets_ = std::move(dets);
  return b;
}

SectorBasis SectorBasis::full_fock(int orbitals) {
  if (orbitals < 1 || orbitals > 8) throw CapacityError("full Fock space limited to 8 orbitals");
  SectorBasis b;
  b.orbitals_ = orbitals;
  b.n_alpha_ = -1;
  b.n_beta_ = -1;
  b.full_ = true;
  auto dets = std::make_shared<std::vector<Determinant>>();
  const Determinant end = Determinant{1} << (2 * orbitals);
  dets->reserve(end);
  for (Determinant d = 0; d < end; ++d) dets->push_back(d);
  b.dets_ = std::move(dets);
  return b;
}

std::optional<std::size_t> SectorBasis::index_of(Determinant d) const {
  auto it = std::lower_bound(dets_->begin(), dets_->end(), d);
  if (it == dets_->end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dets_->begin());
}

SectorBasis enumerate_sector(int orbitals, int n_alpha, int n_beta) {
  return SectorBasis::sector(orbitals, n_alpha, n_beta);
}

Determinant make_determinant(std::span<const int> alpha, std::span<const int> beta) {
  Determinant d = 0;
  auto set = [&d](int p, Spin s) {
    if (p < 1 || p > kMaxOrbitals) throw ParameterError("orbital index out of range");
    const auto bit = Determinant{1} << SpinOrbital{p, s}.flat();
    if (d & bit) throw ParameterError("orbital listed twice in determinant");
    d |= bit;
  };
  for (int p : alpha) set(p, Spin::alpha);
  for (int p : beta) set(p, Spin::beta);
  return d;
}

int count_spin(Determinant det, Spin spin) {
  constexpr Determinant kAlphaMask = 0x5555555555555555ULL;
  return std::popcount(det & (spin == Spin::alpha ? kAlphaMask : ~kAlphaMask));
}

OperatorMatrix::OperatorMatrix(SectorBasis basis, SparseCMatrix matrix) : basis_(std::move(basis)) {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (matrix.rows() != n || matrix.cols() != n) throw ParameterError("operator dimension does not match basis");
  matrix.makeCompressed();
  if (basis_.size() < kSparseThreshold)
    storage_ = CMatrix(matrix);
  else
    storage_ = std::move(matrix);
  hermitian_ = hermiticity_error() < 1e-12;
}

OperatorMatrix::OperatorMatrix(SectorBasis basis, CMatrix matrix) : basis_(std::move(basis)) {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (matrix.rows() != n || matrix.cols() != n) throw ParameterError("operator dimension does not match basis");
  storage_ = std::move(matrix);
  hermitian_ = hermiticity_error() < 1e-12;
}

CMatrix OperatorMatrix::to_dense() const {
  if (auto* d = std::get_if<CMatrix>(&storage_)) return *d;
  return CMatrix(std::get<SparseCMatrix>(storage_));
}

CVector OperatorMatrix::apply(const CVector& v) const {
  if (auto* d = std::get_if<CMatrix>(&storage_)) return *d * v;
  return std::get<SparseCMatrix>(storage_) * v;
}

cplx OperatorMatrix::element(std::size_t row, std::size_t col) const {
  if (auto* d = std::get_if<CMatrix>(&storage_))
    return (*d)(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  return std::get<SparseCMatrix>(storage_).coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
}

double OperatorMatrix::hermiticity_error() const {
  if (auto* d = std::get_if<CMatrix>(&storage_)) {
    if (d->size() == 0) return 0.0;
    return (*d - d->adjoint()).cwiseAbs().maxCoeff();
  }
  const auto& s = std::get<SparseCMatrix>(storage_);
  SparseCMatrix diff = s - SparseCMatrix(s.adjoint());
  double m = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseCMatrix::InnerIterator it(diff, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

OperatorMatrix operator_from_terms(const SectorBasis& basis, const TermList& terms) {
  const auto use = usable_terms(basis, terms);
  std::vector<Column> cols(basis.size());
  const auto n = static_cast<std::int64_t>(basis.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t j = 0; j < n; ++j) fill_column(basis, use, static_cast<std::size_t>(j), cols[j]);
  return assemble(basis, cols);
}

namespace serial {
OperatorMatrix operator_from_terms(const SectorBasis& basis, const TermList& terms) {
  const auto use = usable_terms(basis, terms);
  std::vector<Column> cols(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) fill_column(basis, use, j, cols[j]);
  return assemble(basis, cols);
}
}  // namespace serial

std::string to_string(std::span<const Factor> factors) {
  std::string s;
  for (const auto& f : factors) {
    if (!s.empty()) s += ' ';
    s += std::to_string(f.orb.p);
    s += f.orb.spin == Spin::alpha ? 'a' : 'b';
    if (f.dagger) s += '^';
  }
  return s;
}

}  // namespace dsp
