#pragma once

// Stage-1 marginal models.
//
//   gamma_log        Y ~ Gamma(shape kappa, mean exp(x beta))
//   normal_identity  Y ~ N(x beta, phi), phi the error variance
//   binary_probit    Y = 1{Z > 0},  Z = x beta + eps
//   ordinal_probit   Y = k if gamma_{k-1} <= Z < gamma_k, no intercept in x
//
// Parameters travel in "natural" order: beta, then the dispersion (continuous)
// or the free thresholds (ordinal). Fitting happens on an unconstrained scale:
// log kappa / log phi, and gamma_1 followed by log threshold increments.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/optim.hpp"
#include "factorcop/special.hpp"

namespace factorcop {

struct MarginalParams {
  Eigen::VectorXd beta;
  std::optional<double> dispersion;  // gamma shape kappa or normal variance phi
  std::vector<double> thresholds;    // ordinal gamma_1 < ... < gamma_{K-1}
};

struct MarginalFit {
  ResponseKind kind;
  MarginalParams params;
  std::vector<std::string> names;
  std::vector<double> se;  // inverse observed information, natural scale
  double loglik = 0.0;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

struct PitSample {
  double u = 0.5;
  double u_minus = 0.5;
};

/// Per-observation PIT pairs grouped by subject.
struct PitData {
  bool discrete = false;
  std::vector<std::size_t> offsets;
  std::vector<double> u;
  std::vector<double> u_minus;

  std::size_t n_subjects() const { return offsets.size() - 1; }
  std::size_t size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  PitSample at(std::size_t k) const { return {u[k], u_minus[k]}; }
};

inline constexpr double kLogFloor = -690.7755278982137;  // log(1e-300)

namespace marginal {

inline int n_params(const ResponseKind& kind, Eigen::Index n_cov) {
  return static_cast<int>(n_cov) + (kind.has_dispersion() ? 1 : 0) + kind.n_thresholds();
}

inline std::vector<std::string> param_names(const ResponseKind& kind, Eigen::Index n_cov) {
  std::vector<std::string> out;
  const int first = kind.has_intercept() ? 0 : 1;
  for (Eigen::Index j = 0; j < n_cov; ++j) out.push_back("beta" + std::to_string(first + j));
  if (kind.family == ResponseFamily::gamma_log) out.push_back("kappa");
  if (kind.family == ResponseFamily::normal_identity) out.push_back("phi");
  for (int k = 1; k <= kind.n_thresholds(); ++k) out.push_back("gamma" + std::to_string(k));
  return out;
}

inline Eigen::VectorXd pack(const MarginalParams& p, const ResponseKind& kind) {
  Eigen::VectorXd v(n_params(kind, p.beta.size()));
  v.head(p.beta.size()) = p.beta;
  Eigen::Index k = p.beta.size();
  if (kind.has_dispersion()) v[k++] = p.dispersion.value_or(1.0);
  for (double g : p.thresholds) v[k++] = g;
  return v;
}

inline MarginalParams unpack(const Eigen::VectorXd& v, const ResponseKind& kind, Eigen::Index n_cov) {
  MarginalParams p;
  p.beta = v.head(n_cov);
  Eigen::Index k = n_cov;
  if (kind.has_dispersion()) p.dispersion = v[k++];
  for (int t = 0; t < kind.n_thresholds(); ++t) p.thresholds.push_back(v[k++]);
  return p;
}

inline void validate(const MarginalParams& p, const ResponseKind& kind, Eigen::Index n_cov) {
  if (p.beta.size() != n_cov) throw DomainError("beta length does not match the covariate count");
  if (kind.has_dispersion()) {
    if (!p.dispersion) throw DomainError("continuous marginal needs a dispersion parameter");
    if (!(*p.dispersion > 0.0)) throw DomainError("dispersion must be positive");
  }
  if (static_cast<int>(p.thresholds.size()) != kind.n_thresholds())
    throw DomainError("wrong number of thresholds for the ordinal model");
  for (std::size_t k = 1; k < p.thresholds.size(); ++k)
    if (!(p.thresholds[k] > p.thresholds[k - 1])) throw DomainError("thresholds must be strictly increasing");
}

/// Cut points gamma(0..K) with gamma(0) = -inf, gamma(K) = +inf.
inline std::vector<double> cut_points(const ResponseKind& kind, const MarginalParams& p) {
  std::vector<double> c;
  c.push_back(-special::kInf);
  if (kind.family == ResponseFamily::binary_probit) c.push_back(0.0);
  for (double g : p.thresholds) c.push_back(g);
  c.push_back(special::kInf);
  return c;
}

/// log f(y | eta) for one observation. `cuts` only matters for discrete kinds.
inline double obs_logdens(const ResponseKind& kind, double y, double eta, double disp,
                          const std::vector<double>& cuts) {
  switch (kind.family) {
    case ResponseFamily::gamma_log:
      return disp * std::log(disp) - disp * eta - std::lgamma(disp) + (disp - 1.0) * std::log(y) -
             disp * y * std::exp(-eta);
    case ResponseFamily::normal_identity: {
      const double r = y - eta;
      return -0.5 * std::log(2.0 * std::numbers::pi * disp) - 0.5 * r * r / disp;
    }
    default: {
      const int c = kind.category(y);
      const double p = special::normal_prob_between(cuts[c - 1] - eta, cuts[c] - eta);
      return p > 1e-300 ? std::log(p) : kLogFloor;
    }
  }
}

/// (F(y-), F(y)) for one observation; continuous kinds return u_minus = u.
inline PitSample obs_pit(const ResponseKind& kind, double y, double eta, double disp,
                         const std::vector<double>& cuts) {
  static constexpr double eps = 1e-12;
  auto clamp = [](double u) { return std::clamp(u, eps, 1.0 - eps); };
  switch (kind.family) {
    case ResponseFamily::gamma_log: {
      const double u = clamp(special::gamma_p(disp, disp * y * std::exp(-eta)));
      return {u, u};
    }
    case ResponseFamily::normal_identity: {
      const double u = clamp(special::normal_cdf((y - eta) / std::sqrt(disp)));
      return {u, u};
    }
    default: {
      const int c = kind.category(y);
      const double lo = cuts[c - 1], hi = cuts[c];
      const double u = std::isinf(hi) ? 1.0 : clamp(special::normal_cdf(hi - eta));
      const double um = std::isinf(lo) ? 0.0 : clamp(special::normal_cdf(lo - eta));
      return {u, um};
    }
  }
}

/// Inverse CDF F^{-1}(u | eta), used by the simulators.
inline double obs_quantile(const ResponseKind& kind, double u, double eta, double disp,
                           const std::vector<double>& cuts) {
  switch (kind.family) {
    case ResponseFamily::gamma_log:
      return std::exp(eta) * special::gamma_p_inv(disp, u) / disp;
    case ResponseFamily::normal_identity:
      return eta + std::sqrt(disp) * special::normal_quantile(u);
    default: {
      int c = 1;
      const int k = static_cast<int>(cuts.size()) - 1;
      while (c < k && !(u < special::normal_cdf(cuts[c] - eta))) ++c;
      return kind.family == ResponseFamily::binary_probit ? c - 1.0 : static_cast<double>(c);
    }
  }
}

/// Per-subject log-likelihood contributions under independence.
inline Eigen::VectorXd loglik_terms(const Panel& d, const MarginalParams& p) {
  validate(p, d.kind, d.n_cov());
  const auto cuts = cut_points(d.kind, p);
  const double disp = p.dispersion.value_or(1.0);
  const Eigen::VectorXd eta = d.x * p.beta;
  Eigen::VectorXd out(static_cast<Eigen::Index>(d.n_subjects()));
  for (std::size_t i = 0; i < d.n_subjects(); ++i) {
    double s = 0.0;
    for (std::size_t r = d.offsets[i]; r < d.offsets[i + 1]; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      s += obs_logdens(d.kind, d.y[ri], eta[ri], disp, cuts);
    }
    out[static_cast<Eigen::Index>(i)] = s;
  }
  return out;
}

/// Per-subject score vectors (rows) in natural parameter order.
inline Eigen::MatrixXd scores(const Panel& d, const MarginalParams& p) {
  validate(p, d.kind, d.n_cov());
  const auto kind = d.kind;
  const Eigen::Index pc = d.n_cov();
  const int np = n_params(kind, pc);
  const auto cuts = cut_points(kind, p);
  const double disp = p.dispersion.value_or(1.0);
  const Eigen::VectorXd eta = d.x * p.beta;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n_subjects()), np);
  const double dig = kind.family == ResponseFamily::gamma_log ? special::digamma(disp) : 0.0;
  for (std::size_t i = 0; i < d.n_subjects(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t r = d.offsets[i]; r < d.offsets[i + 1]; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double y = d.y[ri];
      const double e = eta[ri];
      switch (kind.family) {
        case ResponseFamily::gamma_log: {
          const double ratio = y * std::exp(-e);
          s.row(ii).head(pc) += disp * (ratio - 1.0) * d.x.row(ri);
          s(ii, pc) += std::log(disp) + 1.0 - e - dig + std::log(y) - ratio;
          break;
        }
        case ResponseFamily::normal_identity: {
          const double res = y - e;
          s.row(ii).head(pc) += (res / disp) * d.x.row(ri);
          s(ii, pc) += -0.5 / disp + 0.5 * res * res / (disp * disp);
          break;
        }
        default: {
          const int c = kind.category(y);
          const double a_lo = cuts[c - 1] - e, a_hi = cuts[c] - e;
          const double prob = std::max(special::normal_prob_between(a_lo, a_hi), 1e-300);
          const double d_hi = std::isinf(a_hi) ? 0.0 : special::normal_pdf(a_hi);
          const double d_lo = std::isinf(a_lo) ? 0.0 : special::normal_pdf(a_lo);
          s.row(ii).head(pc) += (-(d_hi - d_lo) / prob) * d.x.row(ri);
          if (kind.family == ResponseFamily::ordinal_probit) {
            // cuts[k] is threshold gamma_k, parameter index pc + k - 1.
            if (c < kind.categories) s(ii, pc + c - 1) += d_hi / prob;
            if (c > 1) s(ii, pc + c - 2) -= d_lo / prob;
          }
          break;
        }
      }
    }
  }
  return s;
}

inline double loglik(const Panel& d, const MarginalParams& p) {
  const Eigen::VectorXd t = loglik_terms(d, p);
  double s = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) s += t[i];
  return s;
}

// Unconstrained transform ----------------------------------------------------

inline Eigen::VectorXd to_unconstrained(const MarginalParams& p, const ResponseKind& kind) {
  Eigen::VectorXd v = pack(p, kind);
  Eigen::Index k = p.beta.size();
  if (kind.has_dispersion()) {
    v[k] = std::log(v[k]);
    ++k;
  }
  for (std::size_t t = 1; t < p.thresholds.size(); ++t)
    v[k + static_cast<Eigen::Index>(t)] = std::log(p.thresholds[t] - p.thresholds[t - 1]);
  return v;
}

inline MarginalParams from_unconstrained(const Eigen::VectorXd& v, const ResponseKind& kind, Eigen::Index n_cov) {
  MarginalParams p;
  p.beta = v.head(n_cov);
  Eigen::Index k = n_cov;
  if (kind.has_dispersion()) p.dispersion = std::exp(v[k++]);
  double g = 0.0;
  for (int t = 0; t < kind.n_thresholds(); ++t) {
    g = t == 0 ? v[k] : g + std::exp(v[k]);
    p.thresholds.push_back(g);
    ++k;
  }
  return p;
}

/// Chain rule from natural-scale gradient to unconstrained-scale gradient.
inline Eigen::VectorXd gradient_to_unconstrained(const Eigen::VectorXd& g_nat, const Eigen::VectorXd& v,
                                                 const ResponseKind& kind, Eigen::Index n_cov) {
  Eigen::VectorXd g = g_nat;
  Eigen::Index k = n_cov;
  if (kind.has_dispersion()) {
    g[k] = g_nat[k] * std::exp(v[k]);
    ++k;
  }
  const int nt = kind.n_thresholds();
  // gamma_t = v_0 + sum_{l=1..t} exp(v_l), so d/dv_l = exp(v_l) * sum_{t >= l} dL/dgamma_t.
  double tail = 0.0;
  for (int t = nt - 1; t >= 0; --t) {
    tail += g_nat[k + t];
    g[k + t] = t == 0 ? tail : tail * std::exp(v[k + t]);
  }
  return g;
}

}  // namespace marginal

inline double marginal_loglik(const LongitudinalDataset& data, const MarginalParams& params) {
  return marginal::loglik(make_panel(data), params);
}

inline PitData pit(const Panel& d, const MarginalParams& p) {
  marginal::validate(p, d.kind, d.n_cov());
  PitData out;
  out.discrete = d.kind.discrete();
  out.offsets = d.offsets;
  out.u.resize(d.n_obs());
  out.u_minus.resize(d.n_obs());
  const auto cuts = marginal::cut_points(d.kind, p);
  const double disp = p.dispersion.value_or(1.0);
  const Eigen::VectorXd eta = d.x * p.beta;
  for (std::size_t r = 0; r < d.n_obs(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const PitSample s = marginal::obs_pit(d.kind, d.y[ri], eta[ri], disp, cuts);
    out.u[r] = s.u;
    out.u_minus[r] = s.u_minus;
  }
  return out;
}

inline PitData pit(const LongitudinalDataset& data, const MarginalParams& params) {
  return pit(make_panel(data), params);
}

struct MarginalFitOptions {
  optim::Options optim{1e-12, 1e-8, 0, 1e-6};
  double separation_bound = 10.0;  // |beta| beyond this on the probit scale flags separation
};

namespace marginal {

inline MarginalParams start_values(const Panel& d) {
  const ResponseKind kind = d.kind;
  const Eigen::Index pc = d.n_cov();
  MarginalParams p;
  p.beta = Eigen::VectorXd::Zero(pc);
  const double n = static_cast<double>(d.n_obs());
  auto ols = [&](const Eigen::VectorXd& target) -> Eigen::VectorXd {
    return (d.x.transpose() * d.x).ldlt().solve(d.x.transpose() * target);
  };
  switch (kind.family) {
    case ResponseFamily::normal_identity: {
      p.beta = ols(d.y);
      const Eigen::VectorXd r = d.y - d.x * p.beta;
      p.dispersion = std::max(r.squaredNorm() / n, 1e-8);
      break;
    }
    case ResponseFamily::gamma_log: {
      p.beta = ols(d.y.array().log().matrix());
      const Eigen::ArrayXd ratio = d.y.array() / (d.x * p.beta).array().exp();
      const double mean = ratio.mean();
      const double var = (ratio - mean).square().mean();
      p.dispersion = std::clamp(mean * mean / std::max(var, 1e-12), 0.05, 1e3);
      if (kind.has_intercept()) p.beta[0] += std::log(mean);
      break;
    }
    case ResponseFamily::binary_probit: {
      const double ybar = std::clamp(d.y.mean(), 0.01, 0.99);
      if (pc > 0) p.beta[0] = special::normal_quantile(ybar);
      break;
    }
    case ResponseFamily::ordinal_probit: {
      std::vector<double> counts(static_cast<std::size_t>(kind.categories) + 1, 0.0);
      for (Eigen::Index r = 0; r < d.y.size(); ++r) counts[static_cast<std::size_t>(d.y[r])] += 1.0;
      double cum = 0.0;
      double prev = -special::kInf;
      for (int k = 1; k < kind.categories; ++k) {
        cum += counts[static_cast<std::size_t>(k)];
        double g = special::normal_quantile(std::clamp(cum / n, 0.01, 0.99));
        if (g <= prev + 0.05) g = prev + 0.05;
        p.thresholds.push_back(g);
        prev = g;
      }
      break;
    }
  }
  return p;
}

}  // namespace marginal

inline MarginalFit fit_marginal(const Panel& d, const std::optional<MarginalParams>& init = std::nullopt,
                                const MarginalFitOptions& options = {}) {
  const ResponseKind kind = d.kind;
  const Eigen::Index pc = d.n_cov();
  const int np = marginal::n_params(kind, pc);
  if (d.n_subjects() == 0 || d.n_obs() == 0) throw DataError("empty dataset");
  if (static_cast<int>(d.n_obs()) < np)
    throw DataError("fewer observations (" + std::to_string(d.n_obs()) + ") than parameters (" +
                    std::to_string(np) + ")");

  if (kind.discrete()) {
    std::vector<int> counts(static_cast<std::size_t>(kind.categories) + 1, 0);
    for (Eigen::Index r = 0; r < d.y.size(); ++r) ++counts[static_cast<std::size_t>(kind.category(d.y[r]))];
    for (int k = 1; k <= kind.categories; ++k)
      if (counts[static_cast<std::size_t>(k)] == 0) {
        const MarginalParams s = marginal::start_values(d);
        const Eigen::VectorXd best = marginal::pack(s, kind);
        throw ConvergenceError("marginal fit did not converge: category " + std::to_string(k) +
                                   " is never observed, so a threshold or the intercept diverges",
                               std::vector<double>(best.data(), best.data() + best.size()));
      }
  }

  const MarginalParams start = init ? *init : marginal::start_values(d);
  marginal::validate(start, kind, pc);
  const double scale = 1.0 / static_cast<double>(d.n_obs());

  auto objective = [&](const Eigen::VectorXd& v) {
    return -scale * marginal::loglik(d, marginal::from_unconstrained(v, kind, pc));
  };
  auto gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const MarginalParams p = marginal::from_unconstrained(v, kind, pc);
    const Eigen::VectorXd g_nat = marginal::scores(d, p).colwise().sum().transpose();
    return -scale * marginal::gradient_to_unconstrained(g_nat, v, kind, pc);
  };

  optim::Result res = optim::minimize(objective, marginal::to_unconstrained(start, kind), options.optim, gradient);
  if (!std::isfinite(res.value) || !res.converged) {
    throw ConvergenceError("marginal fit did not converge: " + res.message,
                           std::vector<double>(res.x.data(), res.x.data() + res.x.size()));
  }

  MarginalFit fit;
  fit.kind = kind;
  fit.params = marginal::from_unconstrained(res.x, kind, pc);
  fit.names = marginal::param_names(kind, pc);
  fit.loglik = marginal::loglik(d, fit.params);
  fit.converged = true;
  fit.iterations = res.iterations;
  if (kind.discrete()) {
    // Either a coefficient has run off, or the optimizer stalled on the flat
    // tail with some fitted probabilities numerically 0 or 1.
    bool saturated = false;
    const PitData u = pit(d, fit.params);
    for (std::size_t r = 0; r < u.u.size(); ++r) saturated = saturated || u.u[r] - u.u_minus[r] > 1.0 - 1e-8;
    if (saturated || fit.params.beta.cwiseAbs().maxCoeff() > options.separation_bound) {
      fit.separation = true;
      fit.warnings.push_back("regression coefficients diverge: possible (quasi-)separation");
    }
  }

  const Eigen::VectorXd theta = marginal::pack(fit.params, kind);
  auto grad_nat = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    return marginal::scores(d, marginal::unpack(t, kind, pc)).colwise().sum().transpose();
  };
  const Eigen::MatrixXd hess = optim::fd_hessian(grad_nat, theta, 1e-5);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
  fit.se.assign(static_cast<std::size_t>(np), std::nan(""));
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(np, np));
    for (int k = 0; k < np; ++k) fit.se[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
  } else {
    fit.warnings.push_back("observed information is not positive definite");
  }
  return fit;
}

inline MarginalFit fit_marginal(const LongitudinalDataset& data, const std::optional<MarginalParams>& init = std::nullopt,
                                const MarginalFitOptions& options = {}) {
  data.validate();
  return fit_marginal(make_panel(data), init, options);
}

}  // namespace factorcop
