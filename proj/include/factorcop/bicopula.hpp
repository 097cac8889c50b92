#pragma once

// Bivariate linking copulas (Gaussian and Student-t).
//
// Kernels work on the quantile ("score") scale: x = F^{-1}(u) where F is the
// standard normal or standard t_nu CDF. The likelihood code precomputes
// scores once and then only calls the cheap kernel members. The free
// functions at the bottom are the u-scale API.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "factorcop/errors.hpp"
#include "factorcop/special.hpp"

namespace factorcop {

enum class CopulaFamily { gaussian, student_t };

inline std::string_view to_string(CopulaFamily f) {
  return f == CopulaFamily::gaussian ? "gaussian" : "student_t";
}

inline CopulaFamily copula_family_from_string(std::string_view s) {
  if (s == "gaussian" || s == "gauss" || s == "normal") return CopulaFamily::gaussian;
  if (s == "t" || s == "student_t" || s == "student-t") return CopulaFamily::student_t;
  throw DomainError("unknown copula family '" + std::string(s) + "'");
}

struct BicopParam {
  CopulaFamily family = CopulaFamily::gaussian;
  double rho = 0.0;
  std::optional<double> nu;

  static BicopParam gaussian(double rho) { return {CopulaFamily::gaussian, rho, std::nullopt}; }
  static BicopParam student_t(double rho, double nu) { return {CopulaFamily::student_t, rho, nu}; }

  void validate() const {
    if (!(std::abs(rho) < 1.0)) throw DomainError("copula correlation must satisfy |rho| < 1");
    if (family == CopulaFamily::student_t && !(nu && *nu >= 2.0))
      throw DomainError("Student-t copula needs nu >= 2");
  }
};

inline constexpr double kPitEps = 1e-12;

inline double clamp_unit(double u, bool* clamped = nullptr) {
  const double c = std::fmin(std::fmax(u, kPitEps), 1.0 - kPitEps);
  if (clamped && c != u) *clamped = true;
  return c;
}

/// Gaussian link on the normal-score scale.
class GaussianKernel {
 public:
  explicit GaussianKernel(double rho)
      : rho_(rho), one_m_r2_(1.0 - rho * rho), s_(std::sqrt(one_m_r2_)),
        log_det_half_(-0.5 * std::log(one_m_r2_)) {}

  double rho() const { return rho_; }

  static double score(double u) { return special::normal_quantile(u); }
  /// Score from the upper-tail mass 1-u (keeps precision near u = 1).
  static double score_upper(double q) { return special::normal_quantile_upper(q); }
  static double cdf(double x) { return special::normal_cdf(x); }

  double log_pdf(double x1, double x2) const {
    return log_det_half_ - (rho_ * rho_ * (x1 * x1 + x2 * x2) - 2.0 * rho_ * x1 * x2) / (2.0 * one_m_r2_);
  }
  /// log_pdf = log_pdf_joint + log_margin(x1) + log_margin(x2).
  double log_pdf_joint(double x1, double x2) const { return log_pdf(x1, x2); }
  static double log_margin(double) { return 0.0; }

  /// Argument of the outer CDF in C_{1|2}(u1|u2).
  double h_arg(double x1, double x2) const { return (x1 - rho_ * x2) / s_; }
  static double h_cdf(double a) { return special::normal_cdf(a); }
  static double h_prob_between(double lo, double hi) { return special::normal_prob_between(lo, hi); }
  /// Score of the h-value, F^{-1}(h_cdf(a)); exact identity for the Gaussian.
  static double h_score(double a) { return a; }

  /// Score of C_{1|2}^{-1}(w|u2) given the h-scale quantile of w.
  double inverse_h(double w, double x2) const {
    if (rho_ == 0.0) return score(w);
    return special::normal_quantile(w) * s_ + rho_ * x2;
  }

 private:
  double rho_;
  double one_m_r2_;
  double s_;
  double log_det_half_;
};

/// Student-t link with nu degrees of freedom on the t_nu-score scale.
class StudentKernel {
 public:
  StudentKernel(double rho, double nu)
      : rho_(rho), nu_(nu), one_m_r2_(1.0 - rho * rho),
        log_const_(std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
                   2.0 * std::lgamma(0.5 * (nu + 1.0)) - 0.5 * std::log(one_m_r2_)) {}

  double rho() const { return rho_; }
  double nu() const { return nu_; }

  double score(double u) const { return special::t_quantile(u, nu_); }
  double score_upper(double q) const { return -special::t_quantile(q, nu_); }
  double cdf(double x) const { return special::t_cdf(x, nu_); }

  double log_pdf(double x1, double x2) const {
    return log_pdf_joint(x1, x2) + log_margin(x1) + log_margin(x2);
  }
  /// log_pdf = log_pdf_joint + log_margin(x1) + log_margin(x2); the margin
  /// terms do not depend on rho.
  double log_pdf_joint(double x1, double x2) const {
    const double q = (x1 * x1 - 2.0 * rho_ * x1 * x2 + x2 * x2) / (nu_ * one_m_r2_);
    return log_const_ - 0.5 * (nu_ + 2.0) * std::log1p(q);
  }
  double log_margin(double x) const { return 0.5 * (nu_ + 1.0) * std::log1p(x * x / nu_); }

  double h_arg(double x1, double x2) const {
    if (std::isinf(x1)) return x1;
    return (x1 - rho_ * x2) / std::sqrt((nu_ + x2 * x2) * one_m_r2_ / (nu_ + 1.0));
  }
  double h_cdf(double a) const { return special::t_cdf(a, nu_ + 1.0); }
  double h_prob_between(double lo, double hi) const {
    return special::t_prob_between(lo, hi, nu_ + 1.0);
  }
  /// T_nu^{-1}(T_{nu+1}(a)), evaluated on the lower tail for symmetry/precision.
  double h_score(double a) const {
    if (std::isinf(a)) return a;
    if (a > 0.0) return -special::t_quantile(special::t_cdf(-a, nu_ + 1.0), nu_);
    return special::t_quantile(special::t_cdf(a, nu_ + 1.0), nu_);
  }

  double inverse_h(double w, double x2) const {
    if (rho_ == 0.0) return score(w);
    const double a = special::t_quantile(w, nu_ + 1.0);
    return a * std::sqrt((nu_ + x2 * x2) * one_m_r2_ / (nu_ + 1.0)) + rho_ * x2;
  }

 private:
  double rho_;
  double nu_;
  double one_m_r2_;
  double log_const_;
};

/// Calls fn(kernel) with the concrete kernel for p.
template <class Fn>
decltype(auto) with_kernel(const BicopParam& p, Fn&& fn) {
  if (p.family == CopulaFamily::gaussian) return fn(GaussianKernel(p.rho));
  return fn(StudentKernel(p.rho, p.nu.value_or(4.0)));
}

// ---------------------------------------------------------------------------
// u-scale API

enum class UniFamily { normal, student_t };

inline double uni_cdf(UniFamily family, double x, std::optional<double> nu = std::nullopt) {
  if (family == UniFamily::normal) return special::normal_cdf(x);
  if (!nu || *nu <= 0.0) throw DomainError("uni_cdf: student_t needs nu > 0");
  return special::t_cdf(x, *nu);
}

inline double uni_quantile(UniFamily family, double p, std::optional<double> nu = std::nullopt) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("uni_quantile: p must lie in (0,1)");
  if (family == UniFamily::normal) return special::normal_quantile(p);
  if (!nu || *nu <= 0.0) throw DomainError("uni_quantile: student_t needs nu > 0");
  return special::t_quantile(p, *nu);
}

/// Copula density c(u1, u2). Boundary inputs are clamped to [eps, 1-eps]
/// and reported through `clamped`.
inline double bicop_pdf(double u1, double u2, const BicopParam& p, bool* clamped = nullptr) {
  p.validate();
  u1 = clamp_unit(u1, clamped);
  u2 = clamp_unit(u2, clamped);
  if (p.rho == 0.0) return 1.0;
  return with_kernel(p, [&](const auto& k) { return std::exp(k.log_pdf(k.score(u1), k.score(u2))); });
}

/// h-function C_{1|2}(u1 | u2).
inline double hfun(double u1, double u2, const BicopParam& p, bool* clamped = nullptr) {
  p.validate();
  u1 = clamp_unit(u1, clamped);
  u2 = clamp_unit(u2, clamped);
  if (p.rho == 0.0) return u1;
  return with_kernel(p, [&](const auto& k) { return k.h_cdf(k.h_arg(k.score(u1), k.score(u2))); });
}

/// Inverse of hfun in its first argument: hfun(hinv(w, u2), u2) = w.
inline double hinv(double w, double u2, const BicopParam& p) {
  p.validate();
  if (p.rho == 0.0) return w;
  w = clamp_unit(w);
  u2 = clamp_unit(u2);
  return with_kernel(p, [&](const auto& k) { return k.cdf(k.inverse_h(w, k.score(u2))); });
}

}  // namespace factorcop
