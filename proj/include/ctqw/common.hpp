#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctqw {

inline constexpr const char* kVersion = "ctqw 0.1.0";

/// Numerical tolerances used across the library. Construction-time checks
/// default to 1e-12, spectral checks to 1e-10. Pass a modified copy to the
/// few entry points that accept one to loosen or tighten globally.
struct Tolerances {
  double row_sum = 1e-12;           // stochasticity at construction
  double unit_norm = 1e-12;         // quantum state norms
  double hermitian = 1e-12;         // ||A - A^dag||_max
  double detailed_balance = 1e-10;  // reversibility
  double spectral = 1e-10;          // eigenvalue range / fixed-point residuals
  double eig_residual = 1e-9;       // ||AV - V Lambda||_max
  double projector = 1e-10;         // ||P^2 - P||_max
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tols{};
  return tols;
}

/// Raised when a numerical invariant fails (solver residual, broken
/// construction-time check). Rejected inputs use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Least-squares slope of y against x.
template <typename VecA, typename VecB>
double regression_slope(const VecA& x, const VecB& y) {
  const auto m = static_cast<std::ptrdiff_t>(x.size());
  if (m != static_cast<std::ptrdiff_t>(y.size()) || m < 2)
    throw std::invalid_argument("regression_slope: need two or more paired points");
  double mx = 0, my = 0;
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("regression_slope: x values are all equal");
  return sxy / sxx;
}

inline double log2_ceil(double x) {
  if (x <= 0) throw std::invalid_argument("log2_ceil: positive argument required");
  return std::ceil(std::log2(x));
}

}  // namespace ctqw
