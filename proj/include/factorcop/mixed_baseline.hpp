#pragma once

// Random-intercept (RI) and random-intercept-and-slope (RIS) baselines.
// Conditional on b_i the responses follow the same marginal families as
// stage 1 with linear predictor x_ij beta + d_ij b_i, d_ij = (1, s * t_ij).
// The marginal likelihood integrates b_i ~ N(0, diag(V)) with a fixed
// Gauss-Hermite rule (tensor grid for RIS).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/factor_model.hpp"
#include "factorcop/marginals.hpp"
#include "factorcop/optim.hpp"
#include "factorcop/quadrature.hpp"
#include "factorcop/sim_design.hpp"
#include "factorcop/special.hpp"

namespace factorcop {

struct MixedSpec {
  ResponseKind kind;
  int n_random = 1;           // 1: RI, 2: RIS
  double slope_scale = 1.0;   // d_ij = (1, slope_scale * t_ij); the simulation study uses 0.1
  int quad_n = kDefaultQuadNodes;

  void validate() const {
    if (n_random != 1 && n_random != 2) throw DomainError("mixed model needs 1 or 2 random effects");
    if (quad_n < 1) throw DomainError("mixed model quadrature needs at least one node");
  }
};

inline std::string model_name(const MixedSpec& s) { return s.n_random == 1 ? "RI" : "RIS"; }

struct MixedParams {
  MarginalParams marginal;
  std::vector<double> variances;  // V[b0] (, V[b1])
};

struct MixedFit {
  MixedSpec spec;
  MixedParams params;
  std::vector<std::string> names;
  std::vector<double> se;
  double loglik = 0.0;
  int dim = 0;
  double aic = 0.0;
  double bic = 0.0;
  long long m = 0;
  bool converged = false;
  int n_eval = 0;
  std::vector<std::string> warnings;
};

namespace mixed {

inline std::vector<std::string> param_names(const MixedSpec& spec, Eigen::Index n_cov) {
  auto names = marginal::param_names(spec.kind, n_cov);
  names.push_back("var_b0");
  if (spec.n_random == 2) names.push_back("var_b1");
  return names;
}

inline Eigen::VectorXd pack(const MixedParams& p, const MixedSpec& spec) {
  const Eigen::VectorXd m = marginal::pack(p.marginal, spec.kind);
  Eigen::VectorXd v(m.size() + spec.n_random);
  v.head(m.size()) = m;
  for (int k = 0; k < spec.n_random; ++k) v[m.size() + k] = p.variances[static_cast<std::size_t>(k)];
  return v;
}

inline MixedParams unpack(const Eigen::VectorXd& v, const MixedSpec& spec, Eigen::Index n_cov) {
  const int k1 = marginal::n_params(spec.kind, n_cov);
  MixedParams p;
  p.marginal = marginal::unpack(v.head(k1), spec.kind, n_cov);
  for (int k = 0; k < spec.n_random; ++k) p.variances.push_back(v[k1 + k]);
  return p;
}

}  // namespace mixed

/// Marginal likelihood of a mixed model for one panel; nodes are built once.
class MixedLikelihood {
 public:
  MixedLikelihood(const Panel& panel, const MixedSpec& spec) : panel_(&panel), spec_(spec) {
    spec.validate();
    if (!(panel.kind == spec.kind)) throw DomainError("mixed model family does not match the data");
    std::vector<double> z, w;
    gauss_hermite_normal(spec.quad_n, z, w);
    if (spec.n_random == 1) {
      z0_ = z;
      z1_.assign(z.size(), 0.0);
      for (double wi : w) logw_.push_back(std::log(wi));
    } else {
      for (std::size_t a = 0; a < z.size(); ++a)
        for (std::size_t b = 0; b < z.size(); ++b) {
          z0_.push_back(z[a]);
          z1_.push_back(z[b]);
          logw_.push_back(std::log(w[a]) + std::log(w[b]));
        }
    }
  }

  Eigen::VectorXd terms(const MixedParams& p) const {
    const Panel& d = *panel_;
    const ResponseKind kind = d.kind;
    marginal::validate(p.marginal, kind, d.n_cov());
    if (static_cast<int>(p.variances.size()) != spec_.n_random)
      throw DomainError("wrong number of random-effect variances");
    for (double v : p.variances)
      if (!(v > 0.0)) throw DomainError("random-effect variances must be positive");
    const double sd0 = std::sqrt(p.variances[0]);
    const double sd1 = spec_.n_random == 2 ? std::sqrt(p.variances[1]) : 0.0;
    const Eigen::VectorXd eta = d.x * p.marginal.beta;
    const auto cuts = marginal::cut_points(kind, p.marginal);
    const double disp = p.marginal.dispersion.value_or(1.0);

    // Node-independent parts of the continuous log densities.
    std::vector<double> c0(d.n_obs(), 0.0);
    if (kind.family == ResponseFamily::gamma_log) {
      const double base = disp * std::log(disp) - std::lgamma(disp);
      for (std::size_t r = 0; r < d.n_obs(); ++r)
        c0[r] = base + (disp - 1.0) * std::log(d.y[static_cast<Eigen::Index>(r)]);
    }
    const double norm_c = -0.5 * std::log(2.0 * std::numbers::pi * disp);

    const std::size_t nq = logw_.size();
    std::vector<double> buf(nq);
    Eigen::VectorXd out(static_cast<Eigen::Index>(d.n_subjects()));
    for (std::size_t i = 0; i < d.n_subjects(); ++i) {
      const std::size_t lo = d.offsets[i], hi = d.offsets[i + 1];
      for (std::size_t q = 0; q < nq; ++q) {
        const double b0 = sd0 * z0_[q], b1 = sd1 * z1_[q];
        double s = logw_[q];
        for (std::size_t r = lo; r < hi; ++r) {
          const auto ri = static_cast<Eigen::Index>(r);
          const double e = eta[ri] + b0 + (spec_.n_random == 2 ? spec_.slope_scale * d.time[ri] * b1 : 0.0);
          const double y = d.y[ri];
          switch (kind.family) {
            case ResponseFamily::gamma_log: s += c0[r] - disp * (e + y * std::exp(-e)); break;
            case ResponseFamily::normal_identity: s += norm_c - 0.5 * (y - e) * (y - e) / disp; break;
            default: s += marginal::obs_logdens(kind, y, e, disp, cuts); break;
          }
        }
        buf[q] = std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
      }
      double v = log_sum_exp(buf.data(), nq);
      if (!std::isfinite(v)) v = kLogFloor;
      out[static_cast<Eigen::Index>(i)] = v;
    }
    return out;
  }

  double total(const MixedParams& p) const { return terms(p).sum(); }

 private:
  const Panel* panel_;
  MixedSpec spec_;
  std::vector<double> z0_, z1_, logw_;
};

inline double mixed_loglik(const Panel& panel, const MixedSpec& spec, const MixedParams& params) {
  return MixedLikelihood(panel, spec).total(params);
}

inline double mixed_loglik(const LongitudinalDataset& data, const MixedSpec& spec, const MixedParams& params) {
  data.validate();
  return mixed_loglik(make_panel(data), spec, params);
}

struct MixedFitOptions {
  optim::Options optim{1e-11, 1e-6, 0, 1e-6};
  double start_variance = 0.5;
  bool compute_se = true;
};

inline MixedFit fit_mixed(const Panel& panel, const MixedSpec& spec, const MixedFitOptions& opt = {}) {
  spec.validate();
  const ResponseKind kind = panel.kind;
  const Eigen::Index pc = panel.n_cov();
  const int k1 = marginal::n_params(kind, pc);

  // Independence fit for start values; it also rejects degenerate discrete data.
  const MarginalFit indep = fit_marginal(panel);
  MixedParams start{indep.params, std::vector<double>(static_cast<std::size_t>(spec.n_random), opt.start_variance)};
  if (kind.family == ResponseFamily::normal_identity) {
    const double phi = *start.marginal.dispersion;
    start.marginal.dispersion = 0.5 * phi;
    for (double& v : start.variances) v = 0.5 * phi / spec.n_random;
  } else if (kind.discrete()) {
    // Marginal probit coefficients are attenuated by sqrt(1 + V).
    const double f = std::sqrt(1.0 + opt.start_variance);
    start.marginal.beta *= f;
    for (double& g : start.marginal.thresholds) g *= f;
  }

  const MixedLikelihood lik(panel, spec);
  const double scale = 1.0 / static_cast<double>(panel.n_subjects());
  auto to_params = [&](const Eigen::VectorXd& v) {
    MixedParams p;
    p.marginal = marginal::from_unconstrained(v.head(k1), kind, pc);
    for (int k = 0; k < spec.n_random; ++k) p.variances.push_back(std::exp(v[k1 + k]));
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    for (int k = 0; k < spec.n_random; ++k)
      if (std::abs(v[k1 + k]) > 50.0) return std::numeric_limits<double>::infinity();
    return -scale * lik.total(to_params(v));
  };
  Eigen::VectorXd x0(k1 + spec.n_random);
  x0.head(k1) = marginal::to_unconstrained(start.marginal, kind);
  for (int k = 0; k < spec.n_random; ++k) x0[k1 + k] = std::log(start.variances[static_cast<std::size_t>(k)]);

  const optim::Result res = optim::minimize(objective, x0, opt.optim);
  if (!res.converged || !std::isfinite(res.value))
    throw ConvergenceError("mixed model fit did not converge: " + res.message,
                           std::vector<double>(res.x.data(), res.x.data() + res.x.size()));

  MixedFit fit;
  fit.spec = spec;
  fit.params = to_params(res.x);
  fit.names = mixed::param_names(spec, pc);
  fit.loglik = lik.total(fit.params);
  fit.converged = true;
  fit.n_eval = res.evaluations;
  fit.m = static_cast<long long>(panel.n_subjects());
  fit.dim = k1 + spec.n_random;
  const auto ic = aic_bic(fit.loglik, fit.dim, fit.m);
  fit.aic = ic.aic;
  fit.bic = ic.bic;
  for (double v : fit.params.variances)
    if (v < 1e-6) fit.warnings.push_back("a random-effect variance collapsed towards zero");

  fit.se.assign(static_cast<std::size_t>(fit.dim), std::nan(""));
  if (opt.compute_se) {
    const Eigen::VectorXd theta = mixed::pack(fit.params, spec);
    auto negll = [&](const Eigen::VectorXd& t) {
      try {
        return -lik.total(mixed::unpack(t, spec, pc));
      } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    const Eigen::MatrixXd h = optim::fd_hessian(optim::Objective(negll), theta, 1e-4);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
      for (Eigen::Index k = 0; k < cov.rows(); ++k)
        fit.se[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
    } else {
      fit.warnings.push_back("observed information is not positive definite");
    }
  }
  return fit;
}

inline MixedFit fit_mixed(const LongitudinalDataset& data, const MixedSpec& spec, const MixedFitOptions& opt = {}) {
  data.validate();
  return fit_mixed(make_panel(data), spec, opt);
}

/// Random effects for subject i come from their own stream (tag 1), so the
/// remaining draws coincide with the factor-copula generator.
inline LongitudinalDataset simulate_mixed(const MixedSpec& spec, const MixedParams& truth, const SimDesign& design) {
  spec.validate();
  if (static_cast<int>(truth.variances.size()) != spec.n_random)
    throw DomainError("wrong number of random-effect variances");
  for (double v : truth.variances)
    if (!(v >= 0.0)) throw DomainError("random-effect variances must be nonnegative");
  const double sd0 = std::sqrt(truth.variances[0]);
  const double sd1 = spec.n_random == 2 ? std::sqrt(truth.variances[1]) : 0.0;
  std::size_t cached_i = static_cast<std::size_t>(-1);
  double b0 = 0.0, b1 = 0.0;
  auto shift = [&](std::size_t i, const SubjectDraw&, int j) {
    if (i != cached_i) {
      Stream s(design.seed, static_cast<std::uint64_t>(i), 1);
      b0 = sd0 * special::normal_quantile(s.uniform());
      b1 = sd1 * special::normal_quantile(s.uniform());
      cached_i = i;
    }
    return b0 + (spec.n_random == 2 ? spec.slope_scale * (j + 1.0) * b1 : 0.0);
  };
  auto uniforms = [](std::size_t, const SubjectDraw& d) { return d.w; };
  return simulate_design(design, spec.kind, truth.marginal, uniforms, shift);
}

}  // namespace factorcop
