#pragma once

// Fixed quadrature rules on (0,1) for integrating over uniform latent factors.
//
// legendre:        Gauss-Legendre on [-1,1] mapped affinely to (0,1).
// hermite_probit:  Gauss-Hermite (probabilists') nodes z_q mapped through
//                  v = Phi(z); the integral over v becomes E[g(Phi(Z))].
//
// Besides the node v, each rule keeps 1-v and Phi^{-1}(v) computed directly
// from the generating variable, so kernels never round-trip through v near
// the boundaries.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "factorcop/errors.hpp"
#include "factorcop/special.hpp"

namespace factorcop {

enum class QuadMode { legendre, hermite_probit };

inline std::string_view to_string(QuadMode m) {
  return m == QuadMode::legendre ? "legendre" : "hermite-probit";
}

inline QuadMode quad_mode_from_string(std::string_view s) {
  if (s == "legendre") return QuadMode::legendre;
  if (s == "hermite-probit" || s == "hermite" || s == "hermite_probit") return QuadMode::hermite_probit;
  throw DomainError("unknown quadrature mode '" + std::string(s) + "'");
}

inline constexpr int kDefaultQuadNodes = 15;

struct QuadratureRule {
  QuadMode mode = QuadMode::hermite_probit;
  std::vector<double> nodes;    // v_q in (0,1), increasing
  std::vector<double> upper;    // 1 - v_q
  std::vector<double> scores;   // Phi^{-1}(v_q)
  std::vector<double> weights;  // sum to 1
  std::vector<double> log_weights;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) s += weights[q] * f(nodes[q]);
    return s;
  }

  /// Node positions on the score scale of a kernel (t_nu quantiles for Student-t).
  template <class Kernel>
  std::vector<double> kernel_scores(const Kernel& k) const {
    std::vector<double> out(nodes.size());
    for (std::size_t q = 0; q < nodes.size(); ++q)
      out[q] = nodes[q] < 0.5 ? k.score(nodes[q]) : k.score_upper(upper[q]);
    return out;
  }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1], ascending. Newton on the
/// three-term recurrence.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

/// Gauss-Hermite for weight exp(-x^2), descending roots. Starting values are
/// the eigenvalues of the Jacobi matrix; each is then polished by Newton on
/// the orthonormal recurrence, which also gives weights with full relative
/// accuracy in the tails.
inline void gauss_hermite_phys(int n, std::vector<double>& x, std::vector<double>& w) {
  constexpr double kPiM4 = 0.7511255444649425;  // pi^{-1/4}
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n), sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();  // ascending
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = n % 2 == 1 && i == half - 1 ? 0.0 : ev[n - 1 - i];
    double pp = 0.0;
    for (int it = 0; it < 10; ++it) {
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
}

}  // namespace detail

/// Probabilists' Gauss-Hermite rule: nodes z_q ascending, weights summing to
/// one, so sum_q w_q g(z_q) approximates E[g(Z)] for Z ~ N(0,1).
inline void gauss_hermite_normal(int n, std::vector<double>& z, std::vector<double>& w) {
  if (n < 1) throw DomainError("Gauss-Hermite rule needs n >= 1");
  std::vector<double> x, wp;
  detail::gauss_hermite_phys(n, x, wp);
  z.resize(n);
  w.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    z[i] = std::numbers::sqrt2 * x[n - 1 - i];
    w[i] = wp[n - 1 - i];
    total += w[i];
  }
  for (double& wi : w) wi /= total;
}

inline QuadratureRule make_quadrature(int n = kDefaultQuadNodes, QuadMode mode = QuadMode::hermite_probit) {
  if (n < 2) throw DomainError("quadrature needs n >= 2 nodes");
  QuadratureRule r;
  r.mode = mode;
  r.nodes.resize(n);
  r.upper.resize(n);
  r.scores.resize(n);
  r.log_weights.resize(n);
  if (mode == QuadMode::legendre) {
    std::vector<double> x, w;
    detail::gauss_legendre(n, x, w);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
      r.nodes[i] = 0.5 * (1.0 + x[i]);
      r.upper[i] = 0.5 * (1.0 - x[i]);
      r.weights[i] = 0.5 * w[i];
      r.scores[i] = r.nodes[i] < 0.5 ? special::normal_quantile(r.nodes[i])
                                     : special::normal_quantile_upper(r.upper[i]);
    }
  } else {
    gauss_hermite_normal(n, r.scores, r.weights);
    for (int i = 0; i < n; ++i) {
      r.nodes[i] = special::normal_cdf(r.scores[i]);
      r.upper[i] = special::normal_sf(r.scores[i]);
    }
  }
  for (int i = 0; i < n; ++i) r.log_weights[i] = std::log(r.weights[i]);
  return r;
}

}  // namespace factorcop
