#include "dsp/hamiltonian_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <sstream>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"

namespace dsp {

IntegralSet IntegralSet::zeros(int norb) {
  IntegralSet s;
  s.norb = norb;
  s.h = RMatrix::Zero(norb, norb);
  s.v.assign(static_cast<std::size_t>(norb) * norb * norb * norb, 0.0);
  return s;
}

void IntegralSet::set_chem(int i, int j, int k, int l, double value) {
  // (ij|kl) = (ji|kl) = (ij|lk) = (ji|lk) = (kl|ij) = ... ; V_pqrs = (pr|qs).
  const int perms[8][4] = {{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                           {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}};
  for (const auto& p : perms) v[index(p[0], p[2], p[1], p[3])] = value;
}

void IntegralSet::set_h(int p, int q, double value) {
  h(p, q) = value;
  h(q, p) = value;
}

double IntegralSet::symmetry_error() const {
  double err = (h - h.transpose()).cwiseAbs().maxCoeff();
  for (int i = 0; i < norb; ++i)
    for (int j = 0; j < norb; ++j)
      for (int k = 0; k < norb; ++k)
        for (int l = 0; l < norb; ++l) {
          const double x = chem(i, j, k, l);
          err = std::max({err, std::abs(x - chem(j, i, k, l)), std::abs(x - chem(i, j, l, k)),
                          std::abs(x - chem(k, l, i, j))});
        }
  return err;
}

namespace {

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

double parse_real(std::string tok, std::size_t line) {
  for (auto& c : tok)
    if (c == 'D' || c == 'd') c = 'E';
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw ParseError("non-numeric value '" + tok + "'", line);
  return value;
}

int parse_index(const std::string& tok, std::size_t line) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || value < 0)
    throw ParseError("invalid integral index '" + tok + "'", line);
  return value;
}

// Splits the namelist body into KEY=VALUE[,VALUE...] assignments.
void parse_namelist(const std::string& body, std::size_t line, IntegralSet& out, bool& have_norb) {
  std::string text = body;
  for (auto& c : text)
    if (c == ',' || c == '\n' || c == '\r' || c == '\t') c = ' ';
  std::istringstream in(text);
  std::string key;
  std::vector<std::string> pending;
  auto flush = [&]() {
    if (key.empty()) return;
    const auto k = upper(key);
    auto need_one = [&]() -> int {
      if (pending.size() != 1) throw ParseError("header field " + k + " expects one value", line);
      return static_cast<int>(parse_real(pending[0], line));
    };
    if (k == "NORB") {
      out.norb = need_one();
      have_norb = true;
    } else if (k == "NELEC") {
      out.nelec = need_one();
    } else if (k == "MS2") {
      out.ms2 = need_one();
    } else if (k == "ISYM") {
      out.isym = need_one();
    } else if (k == "ORBSYM") {
      for (const auto& p : pending) out.orbsym.push_back(static_cast<int>(parse_real(p, line)));
    }
    // Unknown keys (UHF, IUHF, ST, ...) are tolerated.
    key.clear();
    pending.clear();
  };
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq != std::string::npos) {
      flush();
      key = tok.substr(0, eq);
      if (key.empty()) throw ParseError("malformed header assignment '" + tok + "'", line);
      auto rest = tok.substr(eq + 1);
      if (!rest.empty()) pending.push_back(rest);
    } else {
      if (key.empty()) throw ParseError("malformed header token '" + tok + "'", line);
      pending.push_back(tok);
    }
  }
  flush();
}

}  // namespace

IntegralSet parse_fcidump(std::istream& in) {
  IntegralSet out;
  std::string line;
  std::size_t lineno = 0;
  std::string header;
  bool started = false, ended = false, have_norb = false;
  std::size_t header_line = 0;

  while (!ended && std::getline(in, line)) {
    ++lineno;
    std::string trimmed = line;
    if (!started) {
      auto pos = upper(trimmed).find("&FCI");
      if (pos == std::string::npos) {
        if (trimmed.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw ParseError("expected '&FCI' namelist header", lineno);
      }
      started = true;
      header_line = lineno;
      trimmed = trimmed.substr(pos + 4);
    }
    auto up = upper(trimmed);
    auto end_pos = up.find("&END");
    std::size_t cut = std::string::npos;
    if (end_pos != std::string::npos) cut = end_pos;
    auto slash = trimmed.find('/');
    if (slash != std::string::npos && (cut == std::string::npos || slash < cut)) cut = slash;
    if (cut != std::string::npos) {
      header += trimmed.substr(0, cut) + ' ';
      ended = true;
    } else {
      header += trimmed + ' ';
    }
  }
  if (!started) throw ParseError("missing '&FCI' namelist header", lineno);
  if (!ended) throw ParseError("unterminated namelist header (no &END or /)", header_line);
  parse_namelist(header, header_line, out, have_norb);
  if (!have_norb || out.norb < 1) throw ParseError("header lacks a positive NORB", header_line);

  const int L = out.norb;
  auto tmp = IntegralSet::zeros(L);
  out.h = std::move(tmp.h);
  out.v = std::move(tmp.v);

  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream rec(line);
    std::vector<std::string> toks;
    std::string t;
    while (rec >> t) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks.size() != 5) throw ParseError("record must have 5 fields (value i j k l)", lineno);
    const double value = parse_real(toks[0], lineno);
    int idx[4];
    for (int a = 0; a < 4; ++a) {
      idx[a] = parse_index(toks[a + 1], lineno);
      if (idx[a] > L) throw ParseError("index " + toks[a + 1] + " exceeds NORB", lineno);
    }
    const auto [i, j, k, l] = idx;
    if (i && j && k && l) {
      out.set_chem(i - 1, j - 1, k - 1, l - 1, value);
    } else if (i && j && !k && !l) {
      out.set_h(i - 1, j - 1, value);
    } else if (!i && !j && !k && !l) {
      out.e_core = value;
    } else if (i && !j && !k && !l) {
      // Orbital energies; not needed for the Hamiltonian.
    } else {
      throw ParseError("unrecognized index pattern", lineno);
    }
  }
  return out;
}

IntegralSet parse_fcidump_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_fcidump(in);
}

IntegralSet load_fcidump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open FCIDUMP file " + path.string(), 0);
  return parse_fcidump(in);
}

std::string write_fcidump(const IntegralSet& ints) {
  std::ostringstream out;
  out << std::setprecision(17) << std::scientific;
  out << " &FCI NORB=" << ints.norb << ",NELEC=" << ints.nelec << ",MS2=" << ints.ms2 << ",\n";
  if (!ints.orbsym.empty()) {
    out << "  ORBSYM=";
    for (int s : ints.orbsym) out << s << ',';
    out << '\n';
  }
  out << "  ISYM=" << ints.isym << ",\n &END\n";
  const int L = ints.norb;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < L; ++k)
        for (int l = 0; l <= k; ++l) {
          if (i * (i + 1) / 2 + j < k * (k + 1) / 2 + l) continue;
          const double x = ints.chem(i, j, k, l);
          if (x != 0.0) out << x << ' ' << i + 1 << ' ' << j + 1 << ' ' << k + 1 << ' ' << l + 1 << '\n';
        }
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j)
      if (ints.h(i, j) != 0.0) out << ints.h(i, j) << ' ' << i + 1 << ' ' << j + 1 << " 0 0\n";
  out << ints.e_core << " 0 0 0 0\n";
  return out.str();
}

IntegralSet hubbard_integrals(int sites, double t, double U) {
  if (sites < 1) throw ParameterError("Hubbard chain needs at least one site");
  auto s = IntegralSet::zeros(sites);
  s.nelec = sites;
  for (int p = 0; p + 1 < sites; ++p) s.set_h(p, p + 1, -t);
  for (int p = 0; p < sites; ++p) s.v[s.index(p, p, p, p)] = U;
  return s;
}

TermList hamiltonian_terms(const IntegralSet& ints) {
  const int L = ints.norb;
  TermList terms;
  const Spin spins[2] = {Spin::alpha, Spin::beta};
  for (int p = 0; p < L; ++p)
    for (int q = 0; q < L; ++q) {
      if (ints.h(p, q) == 0.0) continue;
      for (auto s : spins) terms.push_back({ints.h(p, q), {{true, {p + 1, s}}, {false, {q + 1, s}}}});
    }
  for (int p = 0; p < L; ++p)
    for (int q = 0; q < L; ++q)
      for (int r = 0; r < L; ++r)
        for (int s = 0; s < L; ++s) {
          const double x = ints.V(p, q, r, s);
          if (x == 0.0) continue;
          for (auto sg : spins)
            for (auto tau : spins) {
              if (p == q && sg == tau) continue;  // c+_p c+_p = 0
              if (r == s && sg == tau) continue;
              terms.push_back({0.5 * x,
                               {{true, {p + 1, sg}}, {true, {q + 1, tau}}, {false, {s + 1, tau}}, {false, {r + 1, sg}}}});
            }
        }
  return terms;
}

namespace {

inline int parity_below(Determinant d, std::size_t k) { return std::popcount(d & ((Determinant{1} << k) - 1)) & 1; }

// Applies c_k to d in place; returns false if mode empty. Updates sign.
inline bool annihilate(Determinant& d, std::size_t k, int& sign) {
  const Determinant bit = Determinant{1} << k;
  if (!(d & bit)) return false;
  if (parity_below(d, k)) sign = -sign;
  d ^= bit;
  return true;
}

inline bool create(Determinant& d, std::size_t k, int& sign) {
  const Determinant bit = Determinant{1} << k;
  if (d & bit) return false;
  if (parity_below(d, k)) sign = -sign;
  d ^= bit;
  return true;
}

using Column = std::vector<Eigen::Triplet<cplx>>;

// Column j of H: annihilators first, so most index combinations exit early.
void hamiltonian_column(const IntegralSet& ints, const SectorBasis& basis, std::size_t j, Column& col) {
  const int L = ints.norb;
  const Determinant ket = basis.det(j);
  auto emit = [&](Determinant d, double value) {
    auto i = basis.index_of(d);
    if (i) col.emplace_back(static_cast<int>(*i), static_cast<int>(j), cplx{value, 0.0});
  };
  if (ints.e_core != 0.0) emit(ket, ints.e_core);
  for (int sp = 0; sp < 2; ++sp)
    for (int q = 0; q < L; ++q) {
      Determinant d1 = ket;
      int s1 = 1;
      if (!annihilate(d1, 2 * q + sp, s1)) continue;
      for (int p = 0; p < L; ++p) {
        const double x = ints.h(p, q);
        if (x == 0.0) continue;
        Determinant d2 = d1;
        int s2 = s1;
        if (!create(d2, 2 * p + sp, s2)) continue;
        emit(d2, x * s2);
      }
    }
  // 1/2 V_pqrs c+_{p sg} c+_{q tau} c_{s tau} c_{r sg}
  for (int sg = 0; sg < 2; ++sg)
    for (int tau = 0; tau < 2; ++tau)
      for (int r = 0; r < L; ++r) {
        Determinant d1 = ket;
        int s1 = 1;
        if (!annihilate(d1, 2 * r + sg, s1)) continue;
        for (int s = 0; s < L; ++s) {
          Determinant d2 = d1;
          int s2 = s1;
          if (!annihilate(d2, 2 * s + tau, s2)) continue;
          for (int q = 0; q < L; ++q) {
            Determinant d3 = d2;
            int s3 = s2;
            if (!create(d3, 2 * q + tau, s3)) continue;
            for (int p = 0; p < L; ++p) {
              const double x = ints.V(p, q, r, s);
              if (x == 0.0) continue;
              Determinant d4 = d3;
              int s4 = s3;
              if (!create(d4, 2 * p + sg, s4)) continue;
              emit(d4, 0.5 * x * s4);
            }
          }
        }
      }
}

OperatorMatrix from_columns(const SectorBasis& basis, std::vector<Column>& cols) {
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (auto& c : cols) triplets.insert(triplets.end(), c.begin(), c.end());
  const auto n = static_cast<Eigen::Index>(basis.size());
  SparseCMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return OperatorMatrix(basis, std::move(m));
}

void check_match(const IntegralSet& ints, const SectorBasis& basis) {
  if (ints.norb != basis.orbitals())
    throw ParameterError("integral set has " + std::to_string(ints.norb) + " orbitals but basis has " +
                         std::to_string(basis.orbitals()));
}

}  // namespace

OperatorMatrix assemble_hamiltonian(const IntegralSet& ints, const SectorBasis& basis) {
  check_match(ints, basis);
  std::vector<Column> cols(basis.size());
  const auto n = static_cast<std::int64_t>(basis.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t j = 0; j < n; ++j) hamiltonian_column(ints, basis, static_cast<std::size_t>(j), cols[j]);
  return from_columns(basis, cols);
}

namespace serial {
OperatorMatrix assemble_hamiltonian(const IntegralSet& ints, const SectorBasis& basis) {
  check_match(ints, basis);
  auto terms = hamiltonian_terms(ints);
  if (ints.e_core != 0.0) terms.push_back({ints.e_core, {}});
  return dsp::serial::operator_from_terms(basis, terms);
}
}  // namespace serial

SpinOpsInput SpinOpsInput::restricted(int orbitals, int n_alpha, int n_beta) {
  return {CMatrix::Identity(orbitals, orbitals), n_alpha, n_beta};
}

OperatorMatrix spin_square_operator(const SectorBasis& basis, const SpinOpsInput& spin) {
  const int L = basis.orbitals();
  if (spin.overlap.rows() != L || spin.overlap.cols() != L)
    throw ParameterError("overlap matrix must be L x L");
  if (!basis.is_full_fock() && (basis.n_alpha() != spin.n_alpha || basis.n_beta() != spin.n_beta))
    throw ParameterError("spin input electron counts do not match the sector");
  const double unitarity = (spin.overlap.adjoint() * spin.overlap - CMatrix::Identity(L, L)).cwiseAbs().maxCoeff();
  if (unitarity > 1e-8) throw ParameterError("alpha/beta MO overlap matrix is not unitary");

  const CMatrix& M = spin.overlap;
  const CMatrix Md = M.adjoint();
  // -sum_{ijkl} M_ij (M^+)_kl c+_{i a} c_{l a} c+_{k b} c_{j b}
  TermList terms;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      if (M(i, j) == cplx{}) continue;
      for (int k = 0; k < L; ++k)
        for (int l = 0; l < L; ++l) {
          const cplx c = -M(i, j) * Md(k, l);
          if (c == cplx{}) continue;
          terms.push_back({c,
                           {{true, {i + 1, Spin::alpha}},
                            {false, {l + 1, Spin::alpha}},
                            {true, {k + 1, Spin::beta}},
                            {false, {j + 1, Spin::beta}}}});
        }
    }
  const double na = spin.n_alpha, nb = spin.n_beta;
  terms.push_back({(na + nb) / 2.0 + (na - nb) * (na - nb) / 4.0, {}});
  return operator_from_terms(basis, terms);
}

OperatorMatrix number_operator(const SectorBasis& basis, Spin spin) {
  TermList terms;
  for (int p = 1; p <= basis.orbitals(); ++p) terms.push_back({1.0, {{true, {p, spin}}, {false, {p, spin}}}});
  return operator_from_terms(basis, terms);
}

namespace {

ReferenceState from_amplitudes(const SectorBasis& basis, CVector amp) {
  const double n = amp.norm();
  if (n == 0.0) throw ParameterError("reference state has zero norm in this sector");
  amp /= n;
  return {basis, std::move(amp)};
}

}  // namespace

ReferenceState build_reference_state(const SectorBasis& basis, ReferencePreset preset) {
  if (basis.is_full_fock()) throw ParameterError("reference states require a sector basis");
  const int na = basis.n_alpha(), nb = basis.n_beta(), L = basis.orbitals();
  std::vector<int> alpha(na), beta(nb);
  for (int i = 0; i < na; ++i) alpha[i] = i + 1;
  for (int i = 0; i < nb; ++i) beta[i] = i + 1;
  const Determinant hf = make_determinant(alpha, beta);
  CVector amp = CVector::Zero(static_cast<Eigen::Index>(basis.size()));

  if (preset == ReferencePreset::hf_aufbau) {
    amp(static_cast<Eigen::Index>(*basis.index_of(hf))) = 1.0;
    return {basis, amp};
  }

  const int n = na;
  if (na != nb || n < 2 || L < n + 2)
    throw ParameterError("high_spin_D needs a closed-shell sector N_alpha = N_beta >= 2 with two virtual orbitals");
  const int i = n - 1, j = n, a = n + 1, b = n + 2;
  const Spin A = Spin::alpha, B = Spin::beta;
  struct Excitation {
    Spin si, sj, sa, sb;
  };
  // |Psi_{i si, j sj}^{a sa, b sb}> = c+_{a sa} c+_{b sb} c_{i si} c_{j sj} |HF>
  const Excitation ex[4] = {{B, A, B, A}, {A, B, A, B}, {B, B, B, B}, {A, A, A, A}};
  for (const auto& e : ex) {
    const Factor f[4] = {{true, {a, e.sa}}, {true, {b, e.sb}}, {false, {i, e.si}}, {false, {j, e.sj}}};
    auto res = apply_factors(hf, f);
    if (!res) throw ParameterError("high_spin_D excitation vanished");
    auto idx = basis.index_of(res->det);
    if (!idx) throw ParameterError("high_spin_D determinant outside the sector");
    amp(static_cast<Eigen::Index>(*idx)) += 0.5 * res->sign;
  }
  return from_amplitudes(basis, amp);
}

ReferenceState build_reference_state(const SectorBasis& basis, std::span<const DeterminantSpec> dets) {
  if (dets.empty()) throw ParameterError("empty determinant list");
  CVector amp = CVector::Zero(static_cast<Eigen::Index>(basis.size()));
  for (const auto& d : dets) {
    for (int p : d.alpha)
      if (p < 1 || p > basis.orbitals()) throw ParameterError("determinant orbital out of range");
    for (int p : d.beta)
      if (p < 1 || p > basis.orbitals()) throw ParameterError("determinant orbital out of range");
    if (static_cast<int>(d.alpha.size()) != basis.n_alpha() || static_cast<int>(d.beta.size()) != basis.n_beta())
      throw ParameterError("determinant occupation does not match the sector");
    // Orbitals may be listed in any order; the sign follows the written creation order.
    std::vector<Factor> creators;
    for (int p : d.alpha) creators.push_back({true, {p, Spin::alpha}});
    for (int p : d.beta) creators.push_back({true, {p, Spin::beta}});
    auto res = apply_factors(Determinant{0}, creators);
    if (!res) throw ParameterError("orbital listed twice in determinant");
    amp(static_cast<Eigen::Index>(*basis.index_of(res->det))) += d.coeff * static_cast<double>(res->sign);
  }
  return from_amplitudes(basis, amp);
}

}  // namespace dsp
