#include "dsp/dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "dsp/diagnostics.hpp"
#include "dsp/errors.hpp"

namespace dsp {

int sample_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw ParameterError("schedule needs T > 0 and dt > 0");
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(n - ratio) > 1e-9 * std::max(1.0, ratio))
    throw ParameterError("T must be a positive integer multiple of dt");
  return static_cast<int>(n);
}

Superoperator::Superoperator(CMatrix H, std::vector<CMatrix> ks, NoiseSpec noise)
    : H_(std::move(H)), ks_(std::move(ks)), noise_(noise) {
  const auto d = H_.rows();
  if (H_.cols() != d) throw ParameterError("Hamiltonian must be square");
  for (const auto& k : ks_)
    if (k.rows() != d || k.cols() != d) throw ParameterError("jump operator dimension does not match H");
  if (noise_.gamma < 0.0) throw ParameterError("depolarizing rate must be >= 0");
  if (d > 0) H_.diagonal().array() -= H_.trace() / static_cast<double>(d);
  G_ = CMatrix::Zero(d, d);
  for (const auto& k : ks_) G_.noalias() += k.adjoint() * k;
}

bool Superoperator::dissipative() const {
  if (noise_.gamma > 0.0) return true;
  for (const auto& k : ks_)
    if (k.size() && k.cwiseAbs().maxCoeff() > 0.0) return true;
  return false;
}

CMatrix Superoperator::apply(const CMatrix& rho) const {
  const auto d = static_cast<Eigen::Index>(dim());
  CMatrix out(d, d);
  CMatrix tmp(d, d);
  // out = -i(H rho - rho H) - 1/2 (G rho + rho G)
  const CMatrix A = -kI * H_ - 0.5 * G_;
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < d; ++c) out.col(c) = A * rho.col(c) + rho * A.adjoint().col(c);
  for (const auto& k : ks_) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < d; ++c) tmp.col(c) = k * rho.col(c);
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < d; ++c) out.col(c) += tmp * k.adjoint().col(c);
  }
  if (noise_.gamma > 0.0) {
    out -= noise_.gamma * rho;
    out.diagonal().array() += noise_.gamma * rho.trace() / static_cast<double>(d);
  }
  return out;
}

namespace serial {
CMatrix apply(const Superoperator& L, const CMatrix& rho) {
  const CMatrix& H = L.hamiltonian();
  const auto d = H.rows();
  CMatrix G = CMatrix::Zero(d, d);
  CMatrix out = -kI * (H * rho - rho * H);
  for (const auto& k : L.jumps()) {
    out += k * rho * k.adjoint();
    G += k.adjoint() * k;
  }
  out -= 0.5 * (G * rho + rho * G);
  const double g = L.noise().gamma;
  if (g > 0.0) out += g * (rho.trace() / static_cast<double>(d) * CMatrix::Identity(d, d) - rho);
  return out;
}
}  // namespace serial

CMatrix Superoperator::materialize() const {
  const auto d = static_cast<Eigen::Index>(dim());
  const CMatrix I = CMatrix::Identity(d, d);
  CMatrix M = -kI * (Eigen::kroneckerProduct(I, H_).eval() - Eigen::kroneckerProduct(H_.transpose(), I).eval());
  for (const auto& k : ks_) M += Eigen::kroneckerProduct(k.conjugate(), k).eval();
  M -= 0.5 * (Eigen::kroneckerProduct(I, G_).eval() + Eigen::kroneckerProduct(G_.transpose(), I).eval());
  if (noise_.gamma > 0.0) {
    // gamma (vec(I) vec(I)^T / d - 1)
    M.diagonal().array() -= noise_.gamma;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) M(i + d * i, j + d * j) += noise_.gamma / static_cast<double>(d);
  }
  return M;
}

double Superoperator::norm_estimate() const {
  double hn = 0.0;
  if (H_.size()) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (H_ + H_.adjoint()), Eigen::EigenvaluesOnly);
    hn = es.eigenvalues().cwiseAbs().maxCoeff();
  }
  double kn = 0.0;
  for (const auto& k : ks_) {
    const double n = spectral_norm(k);
    kn += n * n;
  }
  return 2.0 * hn + 2.0 * kn + 2.0 * noise_.gamma;
}

Superoperator build_liouvillian(const OperatorMatrix& H, const JumpSet& jumps, const NoiseSpec& noise) {
  std::vector<CMatrix> ks;
  ks.reserve(jumps.size());
  for (const auto& k : jumps.ks) {
    if (k.dim() != H.dim()) throw ParameterError("jump operator dimension does not match H");
    ks.push_back(k.to_dense());
  }
  return Superoperator(H.to_dense(), std::move(ks), noise);
}

namespace {

void check_trace(const ObservableSeries& s, double tol) {
  if (s.trace_err.back() > tol) {
    std::ostringstream msg;
    msg << "trace drift " << s.trace_err.back() << " at t = " << s.times.back() << " exceeds " << tol;
    throw NumericalError(msg.str());
  }
}

}  // namespace

PropagationResult propagate_density(const Superoperator& L, const CMatrix& rho0, double T, double dt,
                                    const ObservableSet& obs, const PropagationOptions& options) {
  const auto d = static_cast<Eigen::Index>(L.dim());
  if (rho0.rows() != d || rho0.cols() != d) throw ParameterError("initial density matrix has the wrong dimension");
  const int n = sample_count(T, dt);
  PropagationResult res;
  CMatrix rho = rho0;
  record_sample(res.series, 0.0, rho, obs);
  check_trace(res.series, options.trace_tolerance);

  const auto d2 = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
  if (d2 <= options.max_superop_dim) {
    res.materialized = true;
    res.internal_dt = dt;
    const CMatrix P = (dt * L.materialize()).exp();
    CVector v = Eigen::Map<const CVector>(rho.data(), d * d);
    for (int i = 1; i <= n; ++i) {
      v = P * v;
      rho = Eigen::Map<const CMatrix>(v.data(), d, d);
      record_sample(res.series, i * dt, rho, obs);
      check_trace(res.series, options.trace_tolerance);
    }
  } else {
    std::ostringstream msg;
    msg << "superoperator of size " << d2 << " exceeds " << options.max_superop_dim << "; using RK4";
    warn(msg.str());
    const double norm = L.norm_estimate();
    const int m = norm > 0.0 ? std::max(1, static_cast<int>(std::ceil(dt * norm / 0.01))) : 1;
    const double h = dt / m;
    res.internal_dt = h;
    for (int i = 1; i <= n; ++i) {
      for (int s = 0; s < m; ++s) {
        const CMatrix k1 = L.apply(rho);
        const CMatrix k2 = L.apply(rho + 0.5 * h * k1);
        const CMatrix k3 = L.apply(rho + 0.5 * h * k2);
        const CMatrix k4 = L.apply(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      record_sample(res.series, i * dt, rho, obs);
      check_trace(res.series, options.trace_tolerance);
    }
  }
  res.final_rho = rho;
  return res;
}

GapResult lindbladian_gap(const Superoperator& L, std::size_t max_superop_dim) {
  const auto d2 = L.dim() * L.dim();
  if (d2 > max_superop_dim)
    throw CapacityError("Lindbladian of size " + std::to_string(d2) + " exceeds the gap limit " +
                        std::to_string(max_superop_dim));
  if (!L.dissipative()) return {0.0, false};
  const CMatrix M = L.materialize();
  Eigen::ComplexEigenSolver<CMatrix> es(M, false);
  if (es.info() != Eigen::Success) throw NumericalError("Lindbladian eigensolver did not converge");
  const double zero_tol = 1e-10 * M.cwiseAbs().maxCoeff();
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx lam = es.eigenvalues()(i);
    if (std::abs(lam) <= zero_tol) continue;
    best = std::max(best, lam.real());
  }
  if (!std::isfinite(best)) return {0.0, false};
  return {-best, true};
}

namespace {

CMatrix unitary_step(const CMatrix& H, double dt) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(H);
  const CVector phases = (-kI * dt * es.eigenvalues().cast<cplx>()).array().exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

ObservableSeries asp_propagate(const AspPath& path, const CVector& psi0, const NoiseSpec& noise,
                               const ObservableSet& obs) {
  if (path.H0.dim() != path.H1.dim()) throw ParameterError("ASP endpoints differ in dimension");
  if (static_cast<std::size_t>(psi0.size()) != path.H0.dim()) throw ParameterError("ASP initial state dimension");
  if (path.steps < 1 || !(path.T > 0.0)) throw ParameterError("ASP needs T > 0 and steps >= 1");
  if (noise.gamma < 0.0) throw ParameterError("depolarizing rate must be >= 0");
  const CMatrix H0 = path.H0.to_dense(), H1 = path.H1.to_dense();
  const auto d = H0.rows();
  const double dt = path.T / path.steps;
  ObservableSeries series;
  CVector psi = psi0.normalized();
  CMatrix rho = psi * psi.adjoint();
  record_sample(series, 0.0, rho, obs);
  const double keep = std::exp(-noise.gamma * dt);
  for (int k = 0; k < path.steps; ++k) {
    const double s = (k + 0.5) / path.steps;
    const CMatrix H = (1.0 - s) * H0 + s * H1;
    const CMatrix U = unitary_step(0.5 * (H + H.adjoint()), dt);
    if (noise.gamma > 0.0) {
      // Depolarizing commutes with unitary conjugation, so the step is exact.
      rho = keep * (U * rho * U.adjoint());
      rho.diagonal().array() += (1.0 - keep) / static_cast<double>(d);
    } else {
      psi = U * psi;
      rho = psi * psi.adjoint();
    }
    record_sample(series, (k + 1) * dt, rho, obs);
  }
  return series;
}

CVector adiabatic_initial_state(const OperatorMatrix& H0, const OperatorMatrix& H1) {
  if (H0.dim() != H1.dim()) throw ParameterError("ASP endpoints differ in dimension");
  const Spectrum s0 = eigendecompose(H0);
  const CMatrix V0 = s0.level_vectors(0);
  if (V0.cols() == 1) return V0.col(0);
  const CMatrix h1 = H1.to_dense();
  const double tol = 1e-10 * std::max(1.0, s0.radius);

  // First order: diagonalize H1 inside the degenerate ground level of H0.
  const CMatrix sub = V0.adjoint() * h1 * V0;
  Eigen::SelfAdjointEigenSolver<CMatrix> first(0.5 * (sub + sub.adjoint()));
  Eigen::Index m = 1;
  while (m < first.eigenvalues().size() && first.eigenvalues()(m) - first.eigenvalues()(0) < tol) ++m;
  const CMatrix W = V0 * first.eigenvectors().leftCols(m);
  if (m == 1) return W.col(0).normalized();

  // Second order: W^+ H1 Q (E0 - H0)^-1 Q H1 W over the excited levels of H0.
  const double e0 = s0.level_values[0];
  const CMatrix X = s0.eigenvectors.adjoint() * h1 * W;
  CMatrix second = CMatrix::Zero(m, m);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (s0.level_of[static_cast<std::size_t>(i)] == 0) continue;
    second += X.row(i).adjoint() * X.row(i) / (e0 - s0.eigenvalues(i));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (second + second.adjoint()));
  if (es.eigenvalues().size() > 1 && es.eigenvalues()(1) - es.eigenvalues()(0) < tol)
    warn("ASP initial state: ground level of H0 stays degenerate to second order in H1; picking the first vector");
  return (W * es.eigenvectors().col(0)).normalized();
}

}  // namespace dsp
