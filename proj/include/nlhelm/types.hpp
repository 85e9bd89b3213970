#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

namespace nlhelm {

using cplx = std::complex<double>;
using Point2 = std::array<double, 2>;
using CPoint2 = std::array<cplx, 2>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Inconsistent or out-of-range configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature could not meet its tolerance.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular factorization, stagnation or residual above tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlhelm
