#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "pgc/error.hpp"

namespace pgc {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

inline double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x) without cancellation for large x.
inline double std_normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

namespace detail {

// Lower half only (p <= 1/2): rational approximation with relative error about
// 1.15e-9, then one Newton step against erfc. Phi(x) for x <= 0 is computed
// without cancellation, so the step is accurate down to the smallest doubles.
inline double normal_lower_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double density = std_normal_pdf(x);
  if (density > 0.0) x -= (std_normal_cdf(x) - p) / density;
  return x;
}

}  // namespace detail

inline double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorCode::DomainError, "std_normal_quantile: p = " + std::to_string(p) + " not in (0,1)");
  }
  if (p <= 0.5) return detail::normal_lower_quantile(p);
  // 1 - p is exact for p in [1/2, 1).
  return -detail::normal_lower_quantile(1.0 - p);
}

/// x with 1 - Phi(x) = q; keeps full relative precision for tiny q.
inline double std_normal_upper_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    fail(ErrorCode::DomainError,
         "std_normal_upper_quantile: q = " + std::to_string(q) + " not in (0,1)");
  }
  return -std_normal_quantile(q);
}

}  // namespace pgc
