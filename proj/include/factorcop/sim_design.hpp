#pragma once

// Covariate design and visit pruning shared by the factor-copula and
// random-effects simulators.
//
// Per subject i the stream Stream(seed, i) is consumed in a fixed order:
// n_i (resampled until >= 1), x1 ~ Ber(0.5), x2 ~ U(3,8), v1, v2, then one
// uniform w_j per occasion. The two latent draws are taken even when a
// generator ignores them, so generators agree on every other draw.

#include <cstdint>
#include <string>
#include <vector>

#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/marginals.hpp"
#include "factorcop/rng.hpp"

namespace factorcop {

struct SimDesign {
  int m = 500;
  int d = 10;
  double prune_p = 0.8;
  std::uint64_t seed = 1;

  void validate() const {
    if (m < 1) throw DomainError("design needs m >= 1");
    if (d < 1) throw DomainError("design needs d >= 1");
    if (!(prune_p > 0.0 && prune_p <= 1.0)) throw DomainError("prune_p must lie in (0, 1]");
  }
};

struct SubjectDraw {
  int n = 0;
  double x1 = 0.0;
  double x2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  std::vector<double> w;
};

inline SubjectDraw draw_subject(const SimDesign& design, std::size_t i) {
  Stream s(design.seed, static_cast<std::uint64_t>(i));
  SubjectDraw out;
  do {
    out.n = s.binomial(design.d, design.prune_p);
  } while (out.n < 1);
  out.x1 = s.bernoulli(0.5) ? 1.0 : 0.0;
  out.x2 = s.uniform(3.0, 8.0);
  out.v1 = s.uniform();
  out.v2 = s.uniform();
  out.w.resize(static_cast<std::size_t>(out.n));
  for (double& w : out.w) w = s.uniform();
  return out;
}

inline std::vector<std::string> sim_covariate_names(const ResponseKind& kind) {
  std::vector<std::string> names;
  if (kind.has_intercept()) names.push_back("(Intercept)");
  names.insert(names.end(), {"x1", "x2", "t"});
  return names;
}

inline std::vector<double> sim_covariates(const ResponseKind& kind, double x1, double x2, double t) {
  std::vector<double> row;
  if (kind.has_intercept()) row.push_back(1.0);
  row.insert(row.end(), {x1, x2, t});
  return row;
}

inline double linear_predictor(const std::vector<double>& row, const MarginalParams& p) {
  double eta = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) eta += row[c] * p.beta[static_cast<Eigen::Index>(c)];
  return eta;
}

/// Builds a dataset from the design; u_of(i, draw) returns the per-occasion
/// uniforms and eta_shift(i, draw, j) an additive shift of the linear predictor.
template <class UFn, class ShiftFn>
LongitudinalDataset simulate_design(const SimDesign& design, const ResponseKind& kind, const MarginalParams& truth,
                                    UFn&& u_of, ShiftFn&& eta_shift) {
  design.validate();
  const auto n_cov = static_cast<Eigen::Index>(sim_covariate_names(kind).size());
  marginal::validate(truth, kind, n_cov);
  LongitudinalDataset data;
  data.kind = kind;
  data.covariate_names = sim_covariate_names(kind);
  data.subjects.reserve(static_cast<std::size_t>(design.m));
  const std::vector<double> cuts = marginal::cut_points(kind, truth);
  const double disp = truth.dispersion.value_or(1.0);
  for (int i = 0; i < design.m; ++i) {
    const SubjectDraw draw = draw_subject(design, static_cast<std::size_t>(i));
    const std::vector<double> u = u_of(static_cast<std::size_t>(i), draw);
    Subject s;
    s.id = std::to_string(i + 1);
    s.observations.reserve(static_cast<std::size_t>(draw.n));
    for (int j = 0; j < draw.n; ++j) {
      Observation o;
      o.time = j + 1.0;
      o.covariates = sim_covariates(kind, draw.x1, draw.x2, o.time);
      const double eta = linear_predictor(o.covariates, truth) + eta_shift(static_cast<std::size_t>(i), draw, j);
      o.y = marginal::obs_quantile(kind, u[static_cast<std::size_t>(j)], eta, disp, cuts);
      s.observations.push_back(std::move(o));
    }
    data.subjects.push_back(std::move(s));
  }
  return data;
}

}  // namespace factorcop
