#include <gtest/gtest.h>

#include <cmath>

#include "factorcop/factor_model.hpp"
#include "factorcop/mixed_baseline.hpp"
#include "factorcop/simulator.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace factorcop;

namespace {

MixedSpec ri(ResponseKind kind) { return MixedSpec{kind, 1, 1.0, 15}; }

MixedParams normal_truth(double v0, double phi) {
  MixedParams p;
  p.marginal = default_marginal_truth(ResponseKind::normal());
  p.marginal.dispersion = phi;
  p.variances = {v0};
  return p;
}

SimDesign design(int m, std::uint64_t seed) {
  SimDesign d;
  d.m = m;
  d.seed = seed;
  return d;
}

}  // namespace

TEST(Mixed, NormalRandomInterceptMatchesClosedForm) {
  const auto data = fixture::make_dataset(ResponseKind::normal(), {{0.3, 1.9, 1.1}, {-0.4}, {2.2, 0.1}},
                                          {{1.0}, {0.0}, {2.0}}, {"x"});
  MixedParams p;
  p.marginal.beta = Eigen::Vector2d(0.5, 0.4);
  p.marginal.dispersion = 0.8;
  p.variances = {0.6};
  double expect = 0.0;
  for (const auto& s : data.subjects) {
    const auto n = static_cast<Eigen::Index>(s.observations.size());
    Eigen::VectorXd y(n), mu(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      y[j] = s.observations[static_cast<std::size_t>(j)].y;
      mu[j] = 0.5 + 0.4 * s.observations[static_cast<std::size_t>(j)].covariates[1];
    }
    const Eigen::MatrixXd cov = 0.8 * Eigen::MatrixXd::Identity(n, n) + 0.6 * Eigen::MatrixXd::Ones(n, n);
    expect += oracle::mvn_logpdf(y, mu, cov);
  }
  // Fixed 15-node Gauss-Hermite is not exact for a Gaussian posterior; more
  // nodes close the gap.
  EXPECT_NEAR(mixed_loglik(data, ri(ResponseKind::normal()), p), expect, 1e-4);
  EXPECT_NEAR(mixed_loglik(data, MixedSpec{ResponseKind::normal(), 1, 1.0, 60}, p), expect, 1e-9);
}

TEST(Mixed, NormalRandomSlopeMatchesClosedForm) {
  const auto data = fixture::make_dataset(ResponseKind::normal(), {{0.3, 1.9, 1.1}, {2.2, 0.1}});
  MixedParams p;
  p.marginal.beta = Eigen::VectorXd::Constant(1, 0.7);
  p.marginal.dispersion = 1.0;
  p.variances = {0.5, 0.3};
  MixedSpec spec{ResponseKind::normal(), 2, 0.5, 15};
  double expect = 0.0;
  for (const auto& s : data.subjects) {
    const auto n = static_cast<Eigen::Index>(s.observations.size());
    Eigen::VectorXd y(n), mu = Eigen::VectorXd::Constant(n, 0.7);
    Eigen::MatrixXd z(n, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
      y[j] = s.observations[static_cast<std::size_t>(j)].y;
      z(j, 0) = 1.0;
      z(j, 1) = 0.5 * s.observations[static_cast<std::size_t>(j)].time;
    }
    const Eigen::MatrixXd cov =
        Eigen::MatrixXd::Identity(n, n) + z * Eigen::Vector2d(0.5, 0.3).asDiagonal() * z.transpose();
    expect += oracle::mvn_logpdf(y, mu, cov);
  }
  EXPECT_NEAR(mixed_loglik(data, spec, p), expect, 1e-4);
  spec.quad_n = 60;
  EXPECT_NEAR(mixed_loglik(data, spec, p), expect, 1e-9);
}

TEST(Mixed, VanishingVarianceIsIndependence) {
  for (const char* preset : {"gamma-1f-gauss", "binary-1f-gauss", "ordinal-1f-gauss"}) {
    const auto pre = make_preset(preset);
    const auto data = fixture::preset_data(preset, 50, 6);
    MixedParams p;
    p.marginal = pre.marginal;
    p.variances = {1e-10};
    EXPECT_NEAR(mixed_loglik(data, ri(pre.kind), p), marginal_loglik(data, pre.marginal), 1e-4) << preset;
    p.variances = {1e-10, 1e-10};
    EXPECT_NEAR(mixed_loglik(data, MixedSpec{pre.kind, 2, 0.1, 15}, p), marginal_loglik(data, pre.marginal), 1e-4);
  }
}

TEST(Mixed, BinarySymmetricSingleObservation) {
  const auto data = fixture::make_dataset(ResponseKind::binary(), {{1}});
  MixedParams p;
  p.marginal.beta = Eigen::VectorXd::Zero(1);
  p.variances = {1.0};
  EXPECT_NEAR(mixed_loglik(data, ri(ResponseKind::binary()), p), std::log(0.5), 1e-12);
}

TEST(Mixed, RejectsBadVariances) {
  const auto data = fixture::make_dataset(ResponseKind::binary(), {{1}});
  MixedParams p;
  p.marginal.beta = Eigen::VectorXd::Zero(1);
  p.variances = {-1.0};
  EXPECT_THROW(mixed_loglik(data, ri(ResponseKind::binary()), p), DomainError);
  p.variances = {1.0, 1.0};
  EXPECT_THROW(mixed_loglik(data, ri(ResponseKind::binary()), p), DomainError);
}

TEST(Mixed, AllZeroBinaryDiverges) {
  const auto data = fixture::make_dataset(ResponseKind::binary(), {{0, 0}, {0}, {0, 0, 0}});
  EXPECT_THROW(fit_mixed(data, ri(ResponseKind::binary())), ConvergenceError);
}

TEST(Mixed, ZeroVarianceSimulationIsPlainGlm) {
  const MixedSpec spec = ri(ResponseKind::normal());
  const auto a = simulate_mixed(spec, normal_truth(0.0, 1.0), design(30, 4));
  auto pre = make_preset("normal-1f-gauss");
  pre.copula.rho1 = 0.0;
  const auto b = generate_dataset(design(30, 4), pre.kind, pre.marginal, pre.copula);
  ASSERT_EQ(a.n_observations(), b.n_observations());
  for (std::size_t i = 0; i < a.subjects.size(); ++i)
    for (std::size_t j = 0; j < a.subjects[i].observations.size(); ++j)
      EXPECT_DOUBLE_EQ(a.subjects[i].observations[j].y, b.subjects[i].observations[j].y);
}

TEST(Mixed, IntraclassCorrelation) {
  const auto data = simulate_mixed(ri(ResponseKind::normal()), normal_truth(1.0, 1.0), design(2000, 8));
  const auto truth = normal_truth(1.0, 1.0).marginal;
  std::vector<double> a, b;
  for (const auto& s : data.subjects) {
    if (s.observations.size() < 2) continue;
    const auto& o1 = s.observations[0];
    const auto& o2 = s.observations[1];
    a.push_back(o1.y - linear_predictor(o1.covariates, truth));
    b.push_back(o2.y - linear_predictor(o2.covariates, truth));
  }
  EXPECT_NEAR(oracle::pearson(a, b), 0.5, 0.03);
}

TEST(Mixed, RandomSlopeVarianceGrowsWithTime) {
  MixedSpec spec{ResponseKind::normal(), 2, 0.1, 15};
  MixedParams truth = normal_truth(1.0, 1.0);
  truth.variances = {1.0, 4.0};
  SimDesign d = design(6000, 5);
  d.prune_p = 1.0;
  const auto data = simulate_mixed(spec, truth, d);
  for (int j : {0, 9}) {
    double s = 0, s2 = 0;
    for (const auto& sub : data.subjects) {
      const auto& o = sub.observations[static_cast<std::size_t>(j)];
      const double r = o.y - linear_predictor(o.covariates, truth.marginal);
      s += r;
      s2 += r * r;
    }
    const double n = static_cast<double>(data.subjects.size());
    const double var = s2 / n - (s / n) * (s / n);
    const double t = j + 1.0;
    const double expect = 1.0 + 0.01 * t * t * 4.0 + 1.0;
    EXPECT_NEAR(var, expect, 4 * expect * std::sqrt(2.0 / n)) << "t=" << t;
  }
}

TEST(Mixed, FitRecoversBinaryVariance) {
  const MixedSpec spec = ri(ResponseKind::binary());
  MixedParams truth;
  truth.marginal = default_marginal_truth(ResponseKind::binary());
  truth.variances = {1.0};
  const MixedFit f = fit_mixed(simulate_mixed(spec, truth, design(200, 3)), spec);
  ASSERT_TRUE(f.converged);
  EXPECT_NEAR(f.params.variances[0], 1.0, 3 * f.se.back());
  EXPECT_EQ(f.names.back(), "var_b0");
  EXPECT_EQ(f.dim, 5);
  EXPECT_NEAR(f.bic, -2 * f.loglik + std::log(200.0) * 5, 1e-9);
}

TEST(Mixed, LoglikFallsAwayFromTheMle) {
  const MixedSpec spec = ri(ResponseKind::gamma());
  MixedParams truth;
  truth.marginal = default_marginal_truth(ResponseKind::gamma());
  truth.variances = {1.0};
  const auto data = simulate_mixed(spec, truth, design(150, 2));
  const MixedFit f = fit_mixed(data, spec);
  MixedParams far = f.params;
  far.variances = {f.params.variances[0] * 6.0};
  EXPECT_LT(mixed_loglik(data, spec, far), f.loglik - 1.0);
  far.variances = {f.params.variances[0] / 6.0};
  EXPECT_LT(mixed_loglik(data, spec, far), f.loglik - 1.0);
}

TEST(Mixed, NormalRandomInterceptMatchesGaussianFactor) {
  const MixedSpec spec = ri(ResponseKind::normal());
  const auto data = simulate_mixed(spec, normal_truth(1.0, 1.0), design(200, 12));
  const MixedFit mf = fit_mixed(data, spec);
  TwoStageOptions opt;
  opt.godambe = false;
  const TwoStageFit cf = fit_two_stage(data, FactorCopulaSpec{}, opt);
  EXPECT_NEAR(mf.loglik, cf.factor.loglik, 0.5);
  EXPECT_EQ(mf.dim, cf.factor.dim);
}
