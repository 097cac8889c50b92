#pragma once

// Stage 2 of IFM: 1- and 2-factor copula likelihoods over PIT samples,
// dependence-parameter fitting, Godambe (sandwich) standard errors, AIC/BIC.
//
// With exchangeable links every observation shares one copula per factor.
// Integrals over the latent factors use a fixed rule on (0,1); per-subject
// sums over nodes are done in log space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorcop/bicopula.hpp"
#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/marginals.hpp"
#include "factorcop/optim.hpp"
#include "factorcop/quadrature.hpp"
#include "factorcop/rng.hpp"

namespace factorcop {

struct FactorCopulaSpec {
  int n_factors = 1;
  CopulaFamily family = CopulaFamily::gaussian;
  bool exchangeable = true;

  int n_dependence() const { return n_factors; }
  void validate() const {
    if (n_factors != 1 && n_factors != 2) throw DomainError("only 1- and 2-factor models are supported");
    if (!exchangeable) throw DomainError("only exchangeable link parameters are supported");
  }
};

inline std::string model_name(const FactorCopulaSpec& s) {
  return std::string(s.family == CopulaFamily::gaussian ? "gaussian" : "t") + "-" + std::to_string(s.n_factors) + "f";
}

struct LoglikDiagnostics {
  std::size_t underflows = 0;
};

inline double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (v[i] > mx) mx = v[i];
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

namespace detail {

inline double safe_log_prob(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

inline double nan_to_neg_inf(double v) { return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v; }

/// Pre-transformed inputs for one subject: scores of the PIT bounds and the
/// rho-free margin terms of the continuous kernel density.
struct SubjectView {
  const double* hi;
  const double* lo;
  std::size_t n;
  bool discrete;
  double margin_sum;  // sum_j log_margin(hi_j)
};

struct NodeView {
  const std::vector<double>& z;
  const std::vector<double>& logw;
  const std::vector<double>& margin;  // log_margin(z_q)
};

template <class K>
double subject_1f(const K& k, const SubjectView& s, const NodeView& nodes, std::vector<double>& buf) {
  const std::size_t nq = nodes.z.size();
  buf.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    const double zq = nodes.z[q];
    double v = nodes.logw[q];
    if (s.discrete) {
      for (std::size_t j = 0; j < s.n; ++j)
        v += safe_log_prob(k.h_prob_between(k.h_arg(s.lo[j], zq), k.h_arg(s.hi[j], zq)));
    } else {
      v += s.margin_sum + static_cast<double>(s.n) * nodes.margin[q];
      for (std::size_t j = 0; j < s.n; ++j) v += k.log_pdf_joint(s.hi[j], zq);
    }
    buf[q] = nan_to_neg_inf(v);
  }
  return log_sum_exp(buf.data(), nq);
}

template <class K>
double subject_2f(const K& k1, const K& k2, const SubjectView& s, const NodeView& nodes, std::vector<double>& buf,
                  std::vector<double>& s_hi, std::vector<double>& s_lo) {
  const std::size_t nq = nodes.z.size();
  const double n = static_cast<double>(s.n);
  buf.resize(nq * nq);
  s_hi.resize(s.n);
  s_lo.resize(s.n);
  for (std::size_t q1 = 0; q1 < nq; ++q1) {
    const double z1 = nodes.z[q1];
    double base = nodes.logw[q1];
    if (!s.discrete) base += s.margin_sum + n * nodes.margin[q1];
    for (std::size_t j = 0; j < s.n; ++j) {
      s_hi[j] = k1.h_score(k1.h_arg(s.hi[j], z1));
      if (s.discrete) {
        s_lo[j] = k1.h_score(k1.h_arg(s.lo[j], z1));
      } else {
        base += k1.log_pdf_joint(s.hi[j], z1) + k2.log_margin(s_hi[j]);
      }
    }
    for (std::size_t q2 = 0; q2 < nq; ++q2) {
      const double z2 = nodes.z[q2];
      double v = base + nodes.logw[q2];
      if (s.discrete) {
        for (std::size_t j = 0; j < s.n; ++j)
          v += safe_log_prob(k2.h_prob_between(k2.h_arg(s_lo[j], z2), k2.h_arg(s_hi[j], z2)));
      } else {
        v += n * nodes.margin[q2];
        for (std::size_t j = 0; j < s.n; ++j) v += k2.log_pdf_joint(s_hi[j], z2);
      }
      buf[q1 * nq + q2] = nan_to_neg_inf(v);
    }
  }
  return log_sum_exp(buf.data(), nq * nq);
}

}  // namespace detail

/// Stage-2 likelihood for fixed PITs, family, nu and rule. Scores of the PIT
/// values and of the quadrature nodes are computed once on construction.
/// Holds references: `pits` and `rule` must outlive the object.
class FactorLikelihood {
 public:
  FactorLikelihood(const PitData&, CopulaFamily, std::optional<double>, QuadratureRule&&) = delete;
  FactorLikelihood(PitData&&, CopulaFamily, std::optional<double>, const QuadratureRule&) = delete;

  FactorLikelihood(const PitData& pits, CopulaFamily family, std::optional<double> nu, const QuadratureRule& rule)
      : pits_(&pits), family_(family), nu_(nu.value_or(std::numeric_limits<double>::infinity())), rule_(&rule) {
    if (family == CopulaFamily::student_t && !(nu && *nu > 0.0))
      throw DomainError("Student-t factor copula needs nu > 0");
    const std::size_t n = pits.u.size();
    hi_.resize(n);
    lo_.resize(n);
    margin_sum_.assign(pits.n_subjects(), 0.0);
    if (family == CopulaFamily::gaussian) {
      for (std::size_t r = 0; r < n; ++r) {
        hi_[r] = GaussianKernel::score(pits.u[r]);
        lo_[r] = pits.discrete ? GaussianKernel::score(pits.u_minus[r]) : hi_[r];
      }
      nodes_ = rule.scores;
      node_margin_.assign(nodes_.size(), 0.0);
    } else {
      const StudentKernel k(0.0, nu_);
      for (std::size_t r = 0; r < n; ++r) {
        hi_[r] = k.score(pits.u[r]);
        lo_[r] = pits.discrete ? k.score(pits.u_minus[r]) : hi_[r];
      }
      nodes_ = rule.kernel_scores(k);
      for (double z : nodes_) node_margin_.push_back(k.log_margin(z));
      if (!pits.discrete)
        for (std::size_t i = 0; i < pits.n_subjects(); ++i)
          for (std::size_t r = pits.offsets[i]; r < pits.offsets[i + 1]; ++r) margin_sum_[i] += k.log_margin(hi_[r]);
    }
  }

  std::size_t n_subjects() const { return pits_->n_subjects(); }
  bool discrete() const { return pits_->discrete; }

  /// Per-subject log-likelihood terms; rho2 absent means the 1-factor model.
  Eigen::VectorXd terms(double rho1, std::optional<double> rho2 = std::nullopt,
                        LoglikDiagnostics* diag = nullptr) const {
    if (!(std::abs(rho1) < 1.0) || (rho2 && !(std::abs(*rho2) < 1.0)))
      throw DomainError("copula correlations must satisfy |rho| < 1");
    if (family_ == CopulaFamily::gaussian)
      return terms_impl(GaussianKernel(rho1), GaussianKernel(rho2.value_or(0.0)), rho1, rho2, diag);
    return terms_impl(StudentKernel(rho1, nu_), StudentKernel(rho2.value_or(0.0), nu_), rho1, rho2, diag);
  }

  double total(double rho1, std::optional<double> rho2 = std::nullopt, LoglikDiagnostics* diag = nullptr) const {
    const Eigen::VectorXd t = terms(rho1, rho2, diag);
    double s = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) s += t[i];
    return s;
  }

 private:
  template <class K>
  Eigen::VectorXd terms_impl(const K& k1, const K& k2, double rho1, std::optional<double> rho2,
                             LoglikDiagnostics* diag) const {
    const PitData& p = *pits_;
    const std::size_t m = p.n_subjects();
    Eigen::VectorXd out(static_cast<Eigen::Index>(m));
    const bool two = rho2.has_value() && *rho2 != 0.0;
    std::vector<double> buf, s_hi, s_lo;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t off = p.offsets[i], n = p.size(i);
      double v;
      if (rho1 == 0.0 && !two) {
        v = 0.0;
        if (p.discrete)
          for (std::size_t r = off; r < off + n; ++r) v += detail::safe_log_prob(p.u[r] - p.u_minus[r]);
      } else {
        const detail::SubjectView sv{hi_.data() + off, lo_.data() + off, n, p.discrete, margin_sum_[i]};
        const detail::NodeView nv{nodes_, rule_->log_weights, node_margin_};
        v = two ? detail::subject_2f(k1, k2, sv, nv, buf, s_hi, s_lo) : detail::subject_1f(k1, sv, nv, buf);
      }
      if (!std::isfinite(v)) {
        v = kLogFloor;
        if (diag) ++diag->underflows;
      }
      out[static_cast<Eigen::Index>(i)] = v;
    }
    return out;
  }

  const PitData* pits_;
  CopulaFamily family_;
  double nu_;
  const QuadratureRule* rule_;
  std::vector<double> hi_, lo_, nodes_, node_margin_, margin_sum_;
};

inline double loglik_1f(const PitData& pits, double rho1, CopulaFamily family, std::optional<double> nu,
                        const QuadratureRule& quad, LoglikDiagnostics* diag = nullptr) {
  return FactorLikelihood(pits, family, nu, quad).total(rho1, std::nullopt, diag);
}

inline double loglik_2f(const PitData& pits, double rho1, double rho2, CopulaFamily family, std::optional<double> nu,
                        const QuadratureRule& quad, LoglikDiagnostics* diag = nullptr) {
  return FactorLikelihood(pits, family, nu, quad).total(rho1, rho2, diag);
}

// ---------------------------------------------------------------------------
// Model selection

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

inline InformationCriteria aic_bic(double loglik, int dim, long long m) {
  if (m < 1) throw DomainError("aic_bic: sample size must be >= 1");
  if (dim < 0) throw DomainError("aic_bic: dim must be >= 0");
  return {-2.0 * loglik + 2.0 * dim, -2.0 * loglik + std::log(static_cast<double>(m)) * dim};
}

struct CandidateScore {
  std::string name;
  double criterion = 0.0;
  int dim = 0;
};

/// Index of the candidate with the smallest criterion; ties go to fewer
/// parameters, then to the lexicographically smaller name.
inline std::size_t select_model(const std::vector<CandidateScore>& c) {
  if (c.empty()) throw DomainError("select_model: empty candidate set");
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    const auto& a = c[k];
    const auto& b = c[best];
    if (a.criterion < b.criterion || (a.criterion == b.criterion &&
                                      (a.dim < b.dim || (a.dim == b.dim && a.name < b.name))))
      best = k;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Fitting

struct Stage1Info {
  double loglik = 0.0;
  int dim = 0;
};

struct FactorFitOptions {
  optim::Options optim{1e-11, 1e-7, 0, 1e-6};
  double start_rho = 0.3;
  int random_restarts = 3;
  std::uint64_t restart_seed = 20240601;
};

struct NuProfilePoint {
  int nu = 0;
  double loglik = 0.0;
};

struct FactorFit {
  FactorCopulaSpec spec;
  double rho1 = 0.0;
  std::optional<double> rho2;
  std::optional<int> nu;
  bool nu_estimated = false;  // profiled over a grid with more than one value
  std::vector<double> se;     // dependence parameters; Godambe SEs when available
  bool se_godambe = false;
  double copula_loglik = 0.0;
  double marginal_loglik = 0.0;
  double loglik = 0.0;  // marginal + copula density (continuous); joint pmf (discrete)
  int dim = 0;
  double aic = 0.0;
  double bic = 0.0;
  int n_eval = 0;
  long long m = 0;
  QuadMode quad_mode = QuadMode::hermite_probit;
  int quad_n = kDefaultQuadNodes;
  std::vector<NuProfilePoint> nu_profile;
  std::vector<std::string> warnings;
};

inline std::vector<int> default_nu_grid() {
  std::vector<int> g;
  for (int nu = 3; nu <= 30; ++nu) g.push_back(nu);
  return g;
}

namespace detail {

struct StageTwoResult {
  double rho1 = 0.0;
  std::optional<double> rho2;
  double loglik = -std::numeric_limits<double>::infinity();
  int evals = 0;
};

inline StageTwoResult optimize_dependence(const FactorLikelihood& lik, int n_factors, const FactorFitOptions& opt,
                                          std::uint64_t stream_id) {
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(lik.n_subjects(), 1));
  const Eigen::Index dim = n_factors;
  auto objective = [&](const Eigen::VectorXd& v) {
    const double r1 = std::tanh(v[0]);
    if (!(std::abs(r1) < 1.0)) return std::numeric_limits<double>::infinity();
    std::optional<double> r2;
    if (dim == 2) {
      r2 = std::tanh(v[1]);
      if (!(std::abs(*r2) < 1.0)) return std::numeric_limits<double>::infinity();
    }
    return -scale * lik.total(r1, r2);
  };

  std::vector<Eigen::VectorXd> starts;
  StageTwoResult out;
  Eigen::VectorXd s0 = Eigen::VectorXd::Constant(dim, std::atanh(opt.start_rho));
  starts.push_back(s0);
  if (dim == 2) {
    // The 2-factor model contains the 1-factor model as its rho2 = 0 slice.
    const StageTwoResult one = optimize_dependence(lik, 1, opt, stream_id);
    out.evals += one.evals;
    Eigen::VectorXd s1(2);
    s1 << std::atanh(std::clamp(one.rho1, -0.999, 0.999)), 0.0;
    starts.push_back(s1);
  }

  Stream rng(opt.restart_seed, stream_id);
  bool any_converged = false;
  optim::Result best;
  auto run = [&](const Eigen::VectorXd& x0) {
    optim::Result r = optim::minimize(objective, x0, opt.optim);
    out.evals += r.evaluations;
    if (r.converged) any_converged = true;
    if (r.value < best.value) best = r;
  };
  for (const auto& s : starts) run(s);
  for (int k = 0; k < opt.random_restarts && !any_converged; ++k) {
    Eigen::VectorXd x0(dim);
    for (Eigen::Index j = 0; j < dim; ++j) x0[j] = std::atanh(rng.uniform(-0.9, 0.9));
    run(x0);
  }
  if (!any_converged || !std::isfinite(best.value))
    throw ConvergenceError("stage-2 optimizer did not converge: " + best.message,
                           std::vector<double>(best.x.data(), best.x.data() + best.x.size()));
  out.rho1 = std::tanh(best.x[0]);
  if (dim == 2) out.rho2 = std::tanh(best.x[1]);
  out.loglik = -best.value / scale;
  return out;
}

}  // namespace detail

inline FactorFit fit_factor(const PitData& pits, const FactorCopulaSpec& spec, const QuadratureRule& quad,
                            std::vector<int> nu_grid = {}, const Stage1Info& stage1 = {},
                            const FactorFitOptions& opt = {}) {
  spec.validate();
  if (pits.n_subjects() == 0) throw DataError("empty dataset");
  FactorFit fit;
  fit.spec = spec;
  fit.m = static_cast<long long>(pits.n_subjects());
  fit.quad_mode = quad.mode;
  fit.quad_n = static_cast<int>(quad.size());
  fit.marginal_loglik = stage1.loglik;

  std::vector<std::optional<int>> grid;
  if (spec.family == CopulaFamily::gaussian) {
    grid.push_back(std::nullopt);
  } else {
    if (nu_grid.empty()) nu_grid = default_nu_grid();
    for (int nu : nu_grid) {
      if (nu < 2) throw DomainError("nu grid values must be >= 2");
      grid.push_back(nu);
    }
    fit.nu_estimated = nu_grid.size() > 1;
  }

  std::optional<detail::StageTwoResult> best;
  std::optional<int> best_nu;
  std::optional<ConvergenceError> last_error;
  for (const auto& nu : grid) {
    try {
      const FactorLikelihood lik(pits, spec.family, nu ? std::optional<double>(*nu) : std::nullopt, quad);
      const auto res = detail::optimize_dependence(lik, spec.n_factors, opt, static_cast<std::uint64_t>(nu.value_or(0)));
      fit.n_eval += res.evals;
      if (nu) fit.nu_profile.push_back({*nu, res.loglik});
      if (!best || res.loglik > best->loglik) {
        best = res;
        best_nu = nu;
      }
    } catch (const ConvergenceError& e) {
      last_error = e;
      if (nu) fit.warnings.push_back("nu=" + std::to_string(*nu) + ": " + e.what());
    }
  }
  if (!best) throw last_error ? *last_error : ConvergenceError("stage-2 fit failed for every nu");

  // Both link families are radially symmetric, so (rho) and (-rho) give the
  // same likelihood (v -> 1 - v). Report the nonnegative representative.
  fit.rho1 = std::abs(best->rho1);
  if (best->rho2) fit.rho2 = std::abs(*best->rho2);
  fit.nu = best_nu;
  fit.copula_loglik = best->loglik;
  // The discrete stage-2 integral is already the joint pmf of the subject.
  fit.loglik = pits.discrete ? best->loglik : stage1.loglik + best->loglik;
  fit.dim = stage1.dim + spec.n_factors + (fit.nu_estimated ? 1 : 0);
  const auto ic = aic_bic(fit.loglik, fit.dim, fit.m);
  fit.aic = ic.aic;
  fit.bic = ic.bic;

  // Naive stage-2 SEs (marginals treated as known); replaced by Godambe SEs
  // when the caller computes them.
  const FactorLikelihood lik(pits, spec.family, best_nu ? std::optional<double>(*best_nu) : std::nullopt, quad);
  LoglikDiagnostics diag;
  lik.total(fit.rho1, fit.rho2, &diag);
  if (diag.underflows > 0)
    fit.warnings.push_back(std::to_string(diag.underflows) + " subject integrals underflowed to the 1e-300 floor");
  Eigen::VectorXd theta(spec.n_factors);
  theta[0] = fit.rho1;
  if (fit.rho2) theta[1] = *fit.rho2;
  auto negll = [&](const Eigen::VectorXd& t) {
    for (Eigen::Index k = 0; k < t.size(); ++k)
      if (!(std::abs(t[k]) < 1.0)) return std::numeric_limits<double>::infinity();
    return -lik.total(t[0], t.size() > 1 ? std::optional<double>(t[1]) : std::nullopt);
  };
  fit.se.assign(static_cast<std::size_t>(spec.n_factors), std::nan(""));
  if ((theta.array().abs() < 0.999).all()) {
    const Eigen::MatrixXd h = optim::fd_hessian(optim::Objective(negll), theta, 1e-4);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) {
      const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
      for (Eigen::Index k = 0; k < cov.rows(); ++k)
        fit.se[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Godambe information

struct GodambeResult {
  std::vector<std::string> names;
  Eigen::MatrixXd D;  // Jacobian of the mean estimating function
  Eigen::MatrixXd M;  // mean outer product of per-subject estimating functions
  Eigen::MatrixXd J;  // D^T M^{-1} D
  Eigen::MatrixXd cov;  // J^{-1} / m
  std::vector<double> se;
};

struct GodambeOptions {
  double jacobian_step = 1e-5;  // relative
  double score_step = 1e-4;     // absolute step for the stage-2 score in rho
};

namespace detail {

/// Stacked per-subject estimating functions psi_i(theta), theta = (marginal, rho...).
inline Eigen::MatrixXd stacked_scores(const Panel& panel, const FactorCopulaSpec& spec, std::optional<double> nu,
                                      const QuadratureRule& quad, const Eigen::VectorXd& theta, double h) {
  const Eigen::Index n_cov = panel.n_cov();
  const int k1 = marginal::n_params(panel.kind, n_cov);
  const int k2 = spec.n_factors;
  const MarginalParams mp = marginal::unpack(theta.head(k1), panel.kind, n_cov);
  const Eigen::MatrixXd s1 = marginal::scores(panel, mp);
  const PitData pits = pit(panel, mp);
  const FactorLikelihood lik(pits, spec.family, nu, quad);
  Eigen::MatrixXd psi(s1.rows(), k1 + k2);
  psi.leftCols(k1) = s1;
  const double r1 = theta[k1];
  const std::optional<double> r2 = k2 == 2 ? std::optional<double>(theta[k1 + 1]) : std::nullopt;
  auto step_for = [&](double r) { return std::min(h, 0.5 * (1.0 - std::abs(r))); };
  {
    const double e = step_for(r1);
    psi.col(k1) = (lik.terms(r1 + e, r2) - lik.terms(r1 - e, r2)) / (2.0 * e);
  }
  if (r2) {
    const double e = step_for(*r2);
    psi.col(k1 + 1) = (lik.terms(r1, *r2 + e) - lik.terms(r1, *r2 - e)) / (2.0 * e);
  }
  return psi;
}

}  // namespace detail

inline GodambeResult godambe_se(const Panel& panel, const MarginalFit& mfit, const FactorFit& ffit,
                                const QuadratureRule& quad, const GodambeOptions& opt = {}) {
  const FactorCopulaSpec& spec = ffit.spec;
  const Eigen::Index n_cov = panel.n_cov();
  const int k1 = marginal::n_params(panel.kind, n_cov);
  const int k = k1 + spec.n_factors;
  const std::optional<double> nu = ffit.nu ? std::optional<double>(*ffit.nu) : std::nullopt;
  Eigen::VectorXd theta(k);
  theta.head(k1) = marginal::pack(mfit.params, panel.kind);
  theta[k1] = ffit.rho1;
  if (spec.n_factors == 2) theta[k1 + 1] = ffit.rho2.value_or(0.0);
  const double m = static_cast<double>(panel.n_subjects());

  GodambeResult g;
  g.names = marginal::param_names(panel.kind, n_cov);
  g.names.push_back("rho1");
  if (spec.n_factors == 2) g.names.push_back("rho2");

  const Eigen::MatrixXd psi = detail::stacked_scores(panel, spec, nu, quad, theta, opt.score_step);
  g.M = psi.transpose() * psi / m;
  auto mean_psi = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    return detail::stacked_scores(panel, spec, nu, quad, t, opt.score_step).colwise().mean().transpose();
  };
  g.D = optim::fd_jacobian(mean_psi, theta, opt.jacobian_step);

  Eigen::FullPivLU<Eigen::MatrixXd> lu_m(g.M);
  if (!lu_m.isInvertible() || lu_m.rcond() < 1e-14)
    throw SingularMatrixError("Godambe: score covariance M is singular; more data or a simpler model is needed");
  g.J = g.D.transpose() * lu_m.solve(g.D);
  g.J = 0.5 * (g.J + g.J.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu_j(g.J);
  if (!lu_j.isInvertible() || lu_j.rcond() < 1e-14)
    throw SingularMatrixError("Godambe: information J is singular; more data or a simpler model is needed");
  g.cov = lu_j.inverse() / m;
  g.se.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) g.se[static_cast<std::size_t>(j)] = std::sqrt(std::max(g.cov(j, j), 0.0));
  return g;
}

// ---------------------------------------------------------------------------
// Two-stage driver

struct TwoStageOptions {
  QuadMode quad_mode = QuadMode::hermite_probit;
  int quad_n = kDefaultQuadNodes;
  std::vector<int> nu_grid;
  bool godambe = true;
  MarginalFitOptions marginal;
  FactorFitOptions factor;
};

struct TwoStageFit {
  MarginalFit marginal;
  FactorFit factor;
  std::optional<GodambeResult> godambe;
};

inline TwoStageFit fit_two_stage(const Panel& panel, const FactorCopulaSpec& spec, const TwoStageOptions& opt = {}) {
  TwoStageFit out;
  out.marginal = fit_marginal(panel, std::nullopt, opt.marginal);
  const PitData pits = pit(panel, out.marginal.params);
  const QuadratureRule quad = make_quadrature(opt.quad_n, opt.quad_mode);
  const int dim1 = marginal::n_params(panel.kind, panel.n_cov());
  out.factor = fit_factor(pits, spec, quad, opt.nu_grid, {out.marginal.loglik, dim1}, opt.factor);
  if (opt.godambe) {
    try {
      out.godambe = godambe_se(panel, out.marginal, out.factor, quad);
      out.factor.se.assign(out.godambe->se.end() - spec.n_factors, out.godambe->se.end());
      out.factor.se_godambe = true;
    } catch (const SingularMatrixError& e) {
      out.factor.warnings.push_back(e.what());
    }
  }
  return out;
}

inline TwoStageFit fit_two_stage(const LongitudinalDataset& data, const FactorCopulaSpec& spec,
                                 const TwoStageOptions& opt = {}) {
  data.validate();
  return fit_two_stage(make_panel(data), spec, opt);
}

}  // namespace factorcop
