#include <gtest/gtest.h>

#include <cmath>

#include "factorcop/factor_model.hpp"
#include "factorcop/simulator.hpp"
#include "fixtures.hpp"

using namespace factorcop;

namespace {

struct Fitted {
  LongitudinalDataset data;
  Panel panel;
  TwoStageFit fit;
};

Fitted fit_preset(const std::string& preset, int m, std::uint64_t seed, bool godambe = true) {
  Fitted f;
  f.data = fixture::preset_data(preset, m, seed);
  f.panel = make_panel(f.data);
  TwoStageOptions opt;
  opt.godambe = godambe;
  opt.nu_grid = {4};
  f.fit = fit_two_stage(f.panel, make_preset(preset).copula.spec, opt);
  return f;
}

LongitudinalDataset resample(const LongitudinalDataset& d, Stream& rng) {
  LongitudinalDataset out;
  out.kind = d.kind;
  out.covariate_names = d.covariate_names;
  const std::size_t m = d.subjects.size();
  for (std::size_t k = 0; k < m; ++k) {
    Subject s = d.subjects[static_cast<std::size_t>(rng.uniform() * static_cast<double>(m)) % m];
    s.id = std::to_string(k);
    out.subjects.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Godambe, MatricesHaveSandwichStructure) {
  const Fitted f = fit_preset("gamma-1f-gauss", 150, 3);
  ASSERT_TRUE(f.fit.godambe.has_value());
  const GodambeResult& g = *f.fit.godambe;
  const Eigen::Index k = g.M.rows();
  ASSERT_EQ(k, 6);
  EXPECT_EQ(g.names.back(), "rho1");
  EXPECT_LT((g.M - g.M.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g.M).eigenvalues().minCoeff(), -1e-12);
  EXPECT_LT((g.J - g.J.transpose()).cwiseAbs().maxCoeff(), 1e-12 * g.J.cwiseAbs().maxCoeff());
  // Stage-1 estimating functions do not involve rho.
  for (Eigen::Index r = 0; r < k - 1; ++r) EXPECT_EQ(g.D(r, k - 1), 0.0);
  // Stage-2 row depends on the marginal parameters and is estimated, not zeroed.
  EXPECT_GT(g.D.row(k - 1).head(k - 1).cwiseAbs().maxCoeff(), 1e-3);
  const Eigen::MatrixXd j = g.D.transpose() * g.M.inverse() * g.D;
  const Eigen::MatrixXd cov = j.inverse() / 150.0;
  for (Eigen::Index r = 0; r < k; ++r) EXPECT_NEAR(g.se[r], std::sqrt(cov(r, r)), 1e-6 * g.se[r]);
  EXPECT_DOUBLE_EQ(f.fit.factor.se[0], g.se.back());
}

// With the marginal block fixed the sandwich for rho reduces to the scalar
// formula SE = sqrt(M) / (|D| sqrt(m)) applied to the stage-2 block.
TEST(Godambe, ScalarBlockReducesToScalarSandwich) {
  const Fitted f = fit_preset("normal-1f-gauss", 120, 5);
  const GodambeResult& g = *f.fit.godambe;
  const Eigen::Index k = g.M.rows() - 1;
  const double d = g.D(k, k), mm = g.M(k, k);
  const double scalar = std::sqrt(mm) / (std::abs(d) * std::sqrt(120.0));
  const double direct = std::sqrt(1.0 / (d * d / mm) / 120.0);
  EXPECT_NEAR(scalar, direct, 1e-14);
  // Accounting for stage-1 uncertainty can only widen the interval here.
  EXPECT_GE(g.se.back(), 0.8 * scalar);
}

TEST(Godambe, SingularScoreCovarianceIsReported) {
  // The 2-factor likelihood is even in rho2, so its score vanishes at rho2 = 0.
  Fitted f = fit_preset("normal-2f-gauss", 80, 2, false);
  FactorFit ff = f.fit.factor;
  ff.rho2 = 0.0;
  const QuadratureRule q = make_quadrature(15);
  EXPECT_THROW(godambe_se(f.panel, f.fit.marginal, ff, q), SingularMatrixError);
}

TEST(Godambe, AgreesWithSubjectBootstrap) {
  const Fitted f = fit_preset("normal-1f-gauss", 200, 17);
  ASSERT_TRUE(f.fit.godambe.has_value());
  const auto spec = make_preset("normal-1f-gauss").copula.spec;
  TwoStageOptions opt;
  opt.godambe = false;
  const int B = 200;
  const std::size_t k = f.fit.godambe->se.size();
  std::vector<double> sum(k, 0.0), sum2(k, 0.0);
  Stream rng(99, 0);
  for (int b = 0; b < B; ++b) {
    const TwoStageFit r = fit_two_stage(resample(f.data, rng), spec, opt);
    Eigen::VectorXd theta(static_cast<Eigen::Index>(k));
    theta.head(k - 1) = marginal::pack(r.marginal.params, f.data.kind);
    theta[static_cast<Eigen::Index>(k) - 1] = r.factor.rho1;
    for (std::size_t j = 0; j < k; ++j) {
      sum[j] += theta[static_cast<Eigen::Index>(j)];
      sum2[j] += theta[static_cast<Eigen::Index>(j)] * theta[static_cast<Eigen::Index>(j)];
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double mean = sum[j] / B;
    const double sd = std::sqrt((sum2[j] - B * mean * mean) / (B - 1));
    const double se = f.fit.godambe->se[j];
    EXPECT_GT(se, 0.75 * sd) << f.fit.godambe->names[j];
    EXPECT_LT(se, 1.25 * sd) << f.fit.godambe->names[j];
  }
}
