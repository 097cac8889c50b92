#pragma once

// Univariate special functions used by the copula kernels and marginals.
// Normal CDF goes through std::erfc. Student-t with small integer nu (every
// nu a fit can use) has closed-form series; other nu and the remaining
// functions are Boost.Math with double-precision evaluation.

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "factorcop/errors.hpp"

namespace factorcop::special {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>,
                                             boost::math::policies::promote_float<false>>;
using StudentT = boost::math::students_t_distribution<double, Policy>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// 1 - Phi(x), accurate in the upper tail.
inline double normal_sf(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_logpdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Phi^{-1}(p); p = 0 and p = 1 map to -inf and +inf.
inline double normal_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p, Policy());
}

/// Phi^{-1}(1 - q) computed from the upper-tail mass q.
inline double normal_quantile_upper(double q) { return -normal_quantile(q); }

/// Phi(hi) - Phi(lo) for lo <= hi, evaluated on whichever tail keeps precision.
inline double normal_prob_between(double lo, double hi) {
  if (lo > 0.0) return normal_sf(lo) - normal_sf(hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

namespace detail {

inline constexpr int kMaxIntNu = 64;

inline bool small_integer_nu(double nu) {
  return nu >= 1.0 && nu <= kMaxIntNu && nu == std::floor(nu);
}

/// log B(nu/2, 1/2) and the log density constant for integer nu.
struct TConstants {
  double lbeta[kMaxIntNu + 1];
  double logpdf_c[kMaxIntNu + 1];
  TConstants() {
    for (int n = 1; n <= kMaxIntNu; ++n) {
      const double a = 0.5 * n;
      lbeta[n] = std::lgamma(a) + std::lgamma(0.5) - std::lgamma(a + 0.5);
      logpdf_c[n] = std::lgamma(a + 0.5) - std::lgamma(a) - 0.5 * std::log(n * std::numbers::pi);
    }
  }
};

inline const TConstants& t_constants() {
  static const TConstants c;
  return c;
}

/// P(T_nu > t) for t >= 0 and integer nu. Tails use the positive series
/// I_x(a,1/2) = x^a (1-x)^{1/2} / (a B(a,1/2)) 2F1(a+1/2, 1; a+1; x) with
/// x = nu/(nu+t^2); the body uses the finite trigonometric sums.
inline double t_upper_series(double t2, int nu, double x) {
  const double a = 0.5 * nu;
  const double one_m_x = t2 / (nu + t2);
  const double log_pref = a * std::log(x) + 0.5 * std::log(one_m_x) - std::log(a) - t_constants().lbeta[nu];
  double term = 1.0, sum = 1.0;
  for (int n = 0; n < 5000; ++n) {
    term *= (a + 0.5 + n) / (a + 1.0 + n) * x;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return 0.5 * std::exp(log_pref) * sum;
}

inline double t_upper_int(double t, int nu) {
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double x = nu / (nu + t2);
  if (x < 0.5) return t_upper_series(t2, nu, x);
  const double s = t / std::sqrt(nu + t2);  // sin(theta)
  double a;
  if (nu % 2 == 1) {
    const double theta = std::atan(t / std::sqrt(static_cast<double>(nu)));
    double term = 1.0, sum = 1.0;
    for (int k = 2; k <= nu - 3; k += 2) {
      term *= static_cast<double>(k) / (k + 1.0) * x;
      sum += term;
    }
    a = nu == 1 ? 2.0 * theta / std::numbers::pi : 2.0 / std::numbers::pi * (theta + s * std::sqrt(x) * sum);
  } else {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= nu - 3; k += 2) {
      term *= static_cast<double>(k) / (k + 1.0) * x;
      sum += term;
    }
    a = s * sum;
  }
  const double upper = 0.5 * (1.0 - a);
  // 1 - a cancels for large nu; the series is still fast enough there.
  if (upper < 0.01 && x < 0.95) return t_upper_series(t2, nu, x);
  return upper;
}

inline double t_logpdf_int(double x, int nu) {
  return t_constants().logpdf_c[nu] - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

/// Lower-tail quantile (p <= 0.5) for integer nu >= 3: Hill's (1970)
/// approximation refined by Halley steps on the series CDF above.
inline double t_quantile_lower_int(double p, int nu) {
  const double ndf = nu;
  const double P = 2.0 * p;
  const double a = 1.0 / (ndf - 0.5);
  const double b = 48.0 / (a * a);
  double c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
  const double d = ((94.5 / (b + c) - 3.0) / b + 1.0) * std::sqrt(a * std::numbers::pi / 2.0) * ndf;
  double y = std::pow(d * P, 2.0 / ndf);
  double q;
  if (y > 0.05 + a) {
    const double x = -std::numbers::sqrt2 * boost::math::erfc_inv(P, Policy());
    y = x * x;
    if (ndf < 5) c += 0.3 * (ndf - 4.5) * (x + 0.6);
    c = (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b + c;
    y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
    y = std::expm1(a * y * y);
    q = std::sqrt(ndf * y);
  } else {
    y = ((1.0 / (((ndf + 6.0) / (ndf * y) - 0.089 * d - 0.822) * (ndf + 2.0) * 3.0) + 0.5 / (ndf + 4.0)) * y - 1.0) *
            (ndf + 1.0) / (ndf + 2.0) +
        1.0 / y;
    q = std::sqrt(ndf * y);
  }
  double x = -q;
  for (int it = 0; it < 8; ++it) {
    const double f = std::exp(t_logpdf_int(x, nu));
    if (!(f > 0.0) || !std::isfinite(x)) return std::numeric_limits<double>::quiet_NaN();
    const double step = (t_upper_int(-x, nu) - p) / f;
    const double dlogf = -(ndf + 1.0) * x / (ndf + x * x);
    const double delta = step / (1.0 - 0.5 * step * dlogf);
    x -= delta;
    if (std::abs(delta) <= 4e-16 * std::abs(x)) break;
  }
  return x;
}

}  // namespace detail

inline double t_cdf(double x, double nu) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  if (std::isinf(nu)) return normal_cdf(x);
  if (detail::small_integer_nu(nu)) {
    const int n = static_cast<int>(nu);
    return x < 0.0 ? detail::t_upper_int(-x, n) : 1.0 - detail::t_upper_int(x, n);
  }
  return boost::math::cdf(StudentT(nu), x);
}

inline double t_sf(double x, double nu) { return t_cdf(-x, nu); }

inline double t_quantile(double p, double nu) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  if (std::isinf(nu)) return normal_quantile(p);
  if (p == 0.5) return 0.0;
  if (detail::small_integer_nu(nu)) {
    const int n = static_cast<int>(nu);
    const bool lower = p < 0.5;
    const double pp = lower ? p : 1.0 - p;
    double x;
    if (n == 1)
      x = -1.0 / std::tan(std::numbers::pi * pp);
    else if (n == 2)
      x = (2.0 * pp - 1.0) / std::sqrt(2.0 * pp * (1.0 - pp));
    else
      x = pp > 1e-280 ? detail::t_quantile_lower_int(pp, n) : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(x)) return lower ? x : -x;
  }
  return boost::math::quantile(StudentT(nu), p);
}

inline double t_logpdf(double x, double nu) {
  if (detail::small_integer_nu(nu)) return detail::t_logpdf_int(x, static_cast<int>(nu));
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

/// T_nu(hi) - T_nu(lo) with tail-aware evaluation.
inline double t_prob_between(double lo, double hi, double nu) {
  if (lo > 0.0) return t_sf(lo, nu) - t_sf(hi, nu);
  return t_cdf(hi, nu) - t_cdf(lo, nu);
}

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(a, x, Policy());
}

inline double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(a, x, Policy());
}

inline double gamma_p_inv(double a, double p) { return boost::math::gamma_p_inv(a, p, Policy()); }

inline double digamma(double x) { return boost::math::digamma(x, Policy()); }

}  // namespace factorcop::special
