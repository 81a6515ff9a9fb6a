#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace dsp {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

}  // namespace dsp
