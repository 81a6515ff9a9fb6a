#pragma once

// erf-window filter: frequency form, time form, defaults and the trapezoid rule.

#include <vector>

#include "dsp/spectral.hpp"
#include "dsp/types.hpp"

namespace dsp {

struct FilterSpec {
  double a = 0.0;
  double b = 0.0;
  double da = 0.0;
  double db = 0.0;
  double S = 0.0;  // time-domain half-width

  void validate() const;
};

/// 1/2 [erf((w + a)/da) - erf((w + b)/db)]
double filter_freq(const FilterSpec& f, double w);

/// (e^{ias - da^2 s^2/4} - e^{ibs - db^2 s^2/4}) / (2 pi i s), with f(0) = (a - b)/(2 pi).
cplx filter_time(const FilterSpec& f, double s);

inline constexpr double kDefaultKappa = 12.0;

/// a = 2 radius safety + b, b = gap, da = a/2, db = b/2, S = kappa/gap.
FilterSpec default_filter_params(const Spectrum& spec, double safety = 1.0, double kappa = kDefaultKappa);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int M = 0;
};

/// Trapezoid on s_j = j S/M, j = -M..M. M = 0 gives the single node s = 0 with weight 2S.
QuadratureRule build_quadrature(const FilterSpec& f, int M);

}  // namespace dsp
