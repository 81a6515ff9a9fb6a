#include "doctest.h"

#include <random>

#include "dsp/diagnostics.hpp"
#include "dsp/dynamics.hpp"
#include "dsp/errors.hpp"
#include "dsp/jumps.hpp"
#include "support.hpp"

using namespace dsp;
using dsp::testing::Dimer;

namespace {

// Eigenbasis matrix elements of K in the (ascending) eigenbasis of spec.
CMatrix in_eigenbasis(const Spectrum& spec, const OperatorMatrix& K) {
  return spec.eigenvectors.adjoint() * K.to_dense() * spec.eigenvectors;
}

double rel_err(const CMatrix& x, const CMatrix& ref) { return (x - ref).norm() / ref.norm(); }

}  // namespace

TEST_CASE("coupling set sizes and labels") {
  const auto b5 = SectorBasis::sector(5, 3, 3);
  const auto full = coupling_set(b5, CouplingBase::S_II);
  CHECK(full.ops.size() == 20);
  CHECK(full.kind == CouplingKind::S_II);
  CHECK(full.ops.front().label == "hop 1a<->2a");
  const auto reduced = coupling_set(b5, CouplingBase::S_II_reduced);
  CHECK(reduced.ops.size() == 14);
  CHECK(reduced.kind == CouplingKind::S_II_reduced);
  const auto carbon = quartic_preset("carbon");
  const auto aug = coupling_set(b5, CouplingBase::S_II_reduced, carbon);
  CHECK(aug.ops.size() == 20);
  CHECK(aug.kind == CouplingKind::augmented);
  CHECK(to_string(aug.kind) == "augmented");
  CHECK(coupling_set(b5, CouplingBase::none, carbon).kind == CouplingKind::custom);
  for (const auto& c : aug.ops) CHECK(c.op.hermitian());
  CHECK_THROWS_AS(quartic_preset("argon"), ParameterError);
  for (const char* p : {"carbon", "h2o", "benzene", "ferrocene"}) CHECK(quartic_preset(p).size() == 6);
}

TEST_CASE("quartic preset with identically zero strings warns") {
  const auto b = SectorBasis::sector(6, 3, 3);
  ScopedWarningCapture w;
  const auto set = coupling_set(b, CouplingBase::none, quartic_preset("benzene"));
  CHECK(set.ops.size() == 6);
  CHECK(w.contains("identically zero"));
}

TEST_CASE("coupling validation rejects non-Hermitian and non-conserving terms") {
  const auto b = SectorBasis::sector(3, 1, 1);
  const std::vector<NamedTerms> nonherm{{"x", {{1.0, parse_factors("1a^ 2a")}}}};
  CHECK_THROWS_AS(coupling_set(b, CouplingBase::none, nonherm), ParameterError);
  const std::vector<NamedTerms> flip{{"y", with_hermitian_conjugate({{1.0, parse_factors("1a^ 2b")}})}};
  CHECK_THROWS_AS(coupling_set(b, CouplingBase::none, flip), ParameterError);
  const std::vector<NamedTerms> imag{{"z", with_hermitian_conjugate({{cplx{0, 1}, parse_factors("1a^ 2a")}})}};
  CHECK(coupling_set(b, CouplingBase::none, imag).ops.size() == 1);
}

TEST_CASE("hard-threshold jumps only lower the effective level") {
  const Dimer d;
  const auto js = dsp::testing::dimer_jumps(d);
  REQUIRE(js.size() == 3);
  for (const auto& K : js.ks) {
    const CMatrix X = in_eigenbasis(d.spec, K);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (d.spec.level_of[static_cast<std::size_t>(i)] >= d.spec.level_of[static_cast<std::size_t>(j)])
          CHECK(std::abs(X(i, j)) < 1e-13);
    CHECK(K.apply(CVector(d.spec.eigenvectors.col(0))).norm() < 1e-13);
  }
}

TEST_CASE("soft eigenbasis matrix elements carry fhat of the transition") {
  const Dimer d;
  const auto f = default_filter_params(d.spec);
  const auto A = dsp::testing::dimer_couplings(d.basis).ops[0].op;
  const CMatrix X = in_eigenbasis(d.spec, jump_eigenbasis(d.spec, A, f, ProtocolMode::plain(), false));
  const CMatrix Ae = in_eigenbasis(d.spec, A);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      CHECK(std::abs(X(i, j) - filter_freq(f, d.spec.eigenvalues(i) - d.spec.eigenvalues(j)) * Ae(i, j)) < 1e-12);
}

TEST_CASE("identity coupling produces a zero jump and M = 0 reduces to 2 S f(0) A") {
  const Dimer d;
  const auto f = default_filter_params(d.spec);
  const OperatorMatrix I(d.basis, CMatrix(CMatrix::Identity(4, 4)));
  CHECK(jump_eigenbasis(d.spec, I, f, ProtocolMode::plain(), false).to_dense().norm() < 1e-14);
  CHECK(jump_eigenbasis(d.spec, I, f, ProtocolMode::plain(), true).to_dense().norm() < 1e-14);
  const auto A = dsp::testing::dimer_couplings(d.basis).ops[1].op;
  const CMatrix K0 = jump_quadrature(d.spec, A, f, build_quadrature(f, 0), ProtocolMode::plain()).to_dense();
  CHECK((K0 - 2.0 * f.S * filter_time(f, 0.0) * A.to_dense()).norm() < 1e-12);
}

TEST_CASE("quadrature converges to the soft eigenbasis form") {
  const Dimer d;
  const auto f = default_filter_params(d.spec);
  for (const auto& c : dsp::testing::dimer_couplings(d.basis).ops) {
    const CMatrix ref = jump_eigenbasis(d.spec, c.op, f, ProtocolMode::plain(), false).to_dense();
    if (ref.norm() < 1e-12) continue;
    const auto q = [&](int M) {
      return jump_quadrature(d.spec, c.op, f, build_quadrature(f, M), ProtocolMode::plain()).to_dense();
    };
    const double e50 = rel_err(q(50), ref), e100 = rel_err(q(100), ref), e200 = rel_err(q(200), ref),
                 e400 = rel_err(q(400), ref);
    CHECK(e200 < 1e-2);
    CHECK(e100 < 1e-3 * e50);
    // Beyond M = 100 the error sits on the floor set by truncating f at |s| = S.
    CHECK(std::abs(e400 - e200) < 0.05 * e200);
    CHECK((q(200) - q(400)).norm() < 1e-3 * ref.norm());
  }
}

TEST_CASE("folded jumps annihilate the state nearest mu") {
  const Dimer d;
  const auto js = dsp::testing::dimer_jumps(d, ProtocolMode::folded(-0.2));
  const CVector trip = d.spec.eigenvectors.col(1);
  double reach_ground = 0.0;
  for (const auto& K : js.ks) {
    CHECK(K.apply(trip).norm() < 1e-13);
    reach_ground += K.apply(CVector(d.spec.eigenvectors.col(0))).norm();
  }
  CHECK(reach_ground > 1e-3);
}

TEST_CASE("projected jumps satisfy P K = K P = K") {
  const Dimer d;
  const double mu = -0.4;
  const CMatrix P = spectral_projector(d.spec, d.basis, mu).to_dense();
  for (auto c : {Construction::eigenbasis, Construction::quadrature}) {
    JumpOptions o;
    o.construction = c;
    const auto js = dsp::testing::dimer_jumps(d, ProtocolMode::projected(mu), o);
    double total = 0.0;
    for (const auto& K : js.ks) {
      const CMatrix k = K.to_dense();
      CHECK((P * k - k).norm() < 1e-12);
      CHECK((k * P - k).norm() < 1e-12);
      total += k.norm();
    }
    CHECK(total > 1e-3);
  }
}

TEST_CASE("jump operators preserve particle-number sectors on the full Fock space") {
  const auto fock = SectorBasis::full_fock(2);
  const auto H = assemble_hamiltonian(hubbard_integrals(2, 1.0, 4.0), fock);
  const auto spec = eigendecompose(H);
  const auto js = build_jump_set(spec, coupling_set(fock, CouplingBase::S_II), ProtocolMode::plain(),
                                 default_filter_params(spec));
  const CMatrix Na = number_operator(fock, Spin::alpha).to_dense(), Nb = number_operator(fock, Spin::beta).to_dense();
  for (const auto& K : js.ks) {
    const CMatrix k = K.to_dense();
    CHECK((k * Na - Na * k).norm() < 1e-11);
    CHECK((k * Nb - Nb * k).norm() < 1e-11);
  }
}

TEST_CASE("parallel and serial jump builds are identical") {
  const auto b = SectorBasis::sector(4, 2, 2);
  const auto spec = eigendecompose(assemble_hamiltonian(hubbard_integrals(4, 1.0, 4.0), b));
  const auto cs = coupling_set(b, CouplingBase::S_II);
  const auto f = default_filter_params(spec);
  for (auto c : {Construction::eigenbasis, Construction::quadrature}) {
    JumpOptions o;
    o.construction = c;
    o.M = 50;
    const auto p = build_jump_set(spec, cs, ProtocolMode::plain(), f, o);
    const auto s = serial::build_jump_set(spec, cs, ProtocolMode::plain(), f, o);
    REQUIRE(p.size() == s.size());
    for (std::size_t k = 0; k < p.size(); ++k) CHECK((p.ks[k].to_dense() - s.ks[k].to_dense()).norm() == 0.0);
    CHECK(p.labels == s.labels);
  }
  CHECK_THROWS_AS(build_jump_set(spec, cs, ProtocolMode::plain(), FilterSpec{}), ParameterError);
}

TEST_CASE("site-reflection symmetry makes the dimer triplet dark under hopping-only couplings") {
  const Dimer d;
  const auto f = default_filter_params(d.spec);
  const auto only_hops = build_jump_set(d.spec, coupling_set(d.basis, CouplingBase::S_II), ProtocolMode::plain(), f);
  const auto augmented = dsp::testing::dimer_jumps(d);
  const CVector target = d.spec.eigenvectors.col(0);
  const std::vector<CVector> tests{d.spec.eigenvectors.col(1), d.spec.eigenvectors.col(2), d.spec.eigenvectors.col(3)};
  for (int ell = 1; ell <= 3; ++ell) {
    const auto dark = connectivity_rates(only_hops, target, tests, ell);
    CHECK(dark.gamma[0] < 1e-24);
    CHECK(dark.dark[0]);
    CHECK(dark.gamma[1] < 1e-24);  // the ionic antisymmetric level is reflection-odd as well
    CHECK_FALSE(dark.dark[2]);
  }
  const auto lit = connectivity_rates(augmented, target, tests, 2);
  CHECK_FALSE(lit.dark[0]);
  CHECK_FALSE(lit.dark[2]);
  // The ionic odd level reaches the target only through a product of two different jumps.
  CHECK(lit.dark[1]);

  // The dark pair keeps half the weight of the maximally mixed state.
  const auto L = build_liouvillian(d.H, only_hops, {});
  const auto res = propagate_density(L, dsp::testing::mixed(4), 30.0, 0.5, d.obs(d.ground()));
  CHECK(res.series.infidelity.back() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(connectivity_rates(augmented, target, tests, 0), ParameterError);
}

TEST_CASE("jump norm sum") {
  const Dimer d;
  const auto js = dsp::testing::dimer_jumps(d);
  double s = 0.0;
  for (const auto& K : js.ks) {
    const Eigen::JacobiSVD<CMatrix> svd(K.to_dense());
    s += svd.singularValues()(0) * svd.singularValues()(0);
  }
  CHECK(jump_norm_sum(js) == doctest::Approx(s).epsilon(1e-12));
}
