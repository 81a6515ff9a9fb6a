#include "dsp/filter.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dsp/errors.hpp"

namespace dsp {

void FilterSpec::validate() const {
  if (!(a > b && b > 0.0 && da > 0.0 && db > 0.0 && S > 0.0)) {
    std::ostringstream msg;
    msg << "invalid filter (need a > b > 0, da, db, S > 0): a=" << a << " b=" << b << " da=" << da << " db=" << db
        << " S=" << S;
    throw ParameterError(msg.str());
  }
}

double filter_freq(const FilterSpec& f, double w) {
  return 0.5 * (std::erf((w + f.a) / f.da) - std::erf((w + f.b) / f.db));
}

cplx filter_time(const FilterSpec& f, double s) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (std::abs(s) < 1e-6 / f.a) {
    // Expansion of the bracket to O(s^3), divided by s.
    const double a = f.a, b = f.b, a2 = f.da * f.da, b2 = f.db * f.db;
    const cplx c1{0.0, a - b};
    const cplx c2{0.5 * (b * b - a * a) - 0.25 * (a2 - b2), 0.0};
    const cplx c3{0.0, -(a * a * a - b * b * b) / 6.0 - 0.25 * (a * a2 - b * b2)};
    return (c1 + c2 * s + c3 * s * s) / cplx{0.0, two_pi};
  }
  const cplx ea = std::exp(cplx{-0.25 * f.da * f.da * s * s, f.a * s});
  const cplx eb = std::exp(cplx{-0.25 * f.db * f.db * s * s, f.b * s});
  return (ea - eb) / cplx{0.0, two_pi * s};
}

FilterSpec default_filter_params(const Spectrum& spec, double safety, double kappa) {
  if (safety < 1.0) throw ParameterError("filter safety factor must be >= 1");
  if (!spec.gap_defined || spec.gap <= 0.0)
    throw ParameterError("spectrum has no gap; supply the filter parameter b explicitly");
  FilterSpec f;
  f.b = spec.gap;
  f.a = 2.0 * spec.radius * safety + f.b;
  f.da = 0.5 * f.a;
  f.db = 0.5 * f.b;
  f.S = kappa / spec.gap;
  return f;
}

QuadratureRule build_quadrature(const FilterSpec& f, int M) {
  if (M < 0) throw ParameterError("quadrature node count must be >= 0");
  if (!(f.S > 0.0)) throw ParameterError("quadrature needs S > 0");
  QuadratureRule q;
  q.M = M;
  if (M == 0) {
    q.nodes = {0.0};
    q.weights = {2.0 * f.S};
    return q;
  }
  const double h = f.S / M;
  for (int j = -M; j <= M; ++j) {
    q.nodes.push_back(j * h);
    q.weights.push_back(std::abs(j) == M ? 0.5 * h : h);
  }
  return q;
}

}  // namespace dsp
