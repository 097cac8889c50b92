#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "factorcop/simulator.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace factorcop;

namespace {

FactorTruth gauss1(double rho) {
  FactorTruth t = default_factor_truth(1, CopulaFamily::gaussian);
  t.rho1 = rho;
  return t;
}

std::vector<std::vector<double>> draw_uniforms(const FactorTruth& truth, int n, int dim, std::uint64_t seed) {
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(dim));
  for (int i = 0; i < n; ++i) {
    Stream rng(seed, static_cast<std::uint64_t>(i));
    const auto u = sample_factor_uniforms(dim, truth, rng);
    for (int j = 0; j < dim; ++j) cols[static_cast<std::size_t>(j)].push_back(u[static_cast<std::size_t>(j)]);
  }
  return cols;
}

}  // namespace

TEST(Simulator, StreamIsCounterBased) {
  Stream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_NE(x, d.uniform());
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Simulator, ZeroRhoGivesIidUniforms) {
  const FactorTruth t = gauss1(0.0);
  const std::vector<double> w = {0.1, 0.8, 0.33};
  EXPECT_EQ(factor_uniforms(t, 0.9, 0.2, w), w);
}

TEST(Simulator, CoordinatesAreUniform) {
  FactorTruth t2 = default_factor_truth(2, CopulaFamily::student_t);
  for (const FactorTruth& t : {gauss1(0.5), t2}) {
    const auto cols = draw_uniforms(t, 100000, 3, 42);
    for (const auto& c : cols) EXPECT_LT(std::sqrt(1e5) * oracle::ks_uniform(c), oracle::kKs01);
  }
}

TEST(Simulator, GaussianOneFactorScoreCorrelation) {
  const auto cols = draw_uniforms(gauss1(0.5), 100000, 2, 43);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    a.push_back(oracle::Phi_inv(cols[0][i]));
    b.push_back(oracle::Phi_inv(cols[1][i]));
  }
  EXPECT_NEAR(oracle::pearson(a, b), 0.25, 0.01);
}

TEST(Simulator, KendallEstimatorsAgree) {
  const auto cols = draw_uniforms(gauss1(0.7), 600, 2, 1);
  EXPECT_NEAR(oracle::kendall_tau_fast(cols[0], cols[1]), oracle::kendall_tau(cols[0], cols[1]), 1e-12);
}

// PITs of generated data under the true margins carry the generating copula.
TEST(Simulator, PitDependenceMatchesKendallTau) {
  for (const char* preset : {"gamma-1f-gauss", "normal-2f-gauss"}) {
    const auto pre = make_preset(preset);
    SimDesign d;
    d.m = 100000;
    d.seed = 77;
    const auto data = generate_dataset(d, pre.kind, pre.marginal, pre.copula);
    const PitData u = pit(data, pre.marginal);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < u.n_subjects(); ++i)
      if (u.size(i) >= 2) {
        a.push_back(u.u[u.offsets[i]]);
        b.push_back(u.u[u.offsets[i] + 1]);
      }
    const double r1 = pre.copula.rho1, r2 = pre.copula.spec.n_factors == 2 ? pre.copula.rho2 : 0.0;
    const double corr = r1 * r1 + r2 * r2 * (1 - r1 * r1);
    EXPECT_NEAR(oracle::kendall_tau_fast(a, b), 2 / std::numbers::pi * std::asin(corr), 0.02) << preset;
  }
}

TEST(Simulator, ZeroRhoNormalIsPlainGlm) {
  auto pre = make_preset("normal-1f-gauss");
  pre.copula.rho1 = 0.0;
  SimDesign d;
  d.m = 25;
  d.seed = 9;
  const auto data = generate_dataset(d, pre.kind, pre.marginal, pre.copula);
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const SubjectDraw draw = draw_subject(d, i);
    for (std::size_t j = 0; j < data.subjects[i].observations.size(); ++j) {
      const auto& o = data.subjects[i].observations[j];
      EXPECT_DOUBLE_EQ(o.time, j + 1.0);
      EXPECT_NEAR(o.y, linear_predictor(o.covariates, pre.marginal) + oracle::Phi_inv(draw.w[j]), 1e-12);
    }
  }
}

TEST(Simulator, CovariateDesign) {
  const auto data = fixture::preset_data("binary-1f-gauss", 300, 3);
  EXPECT_EQ(data.covariate_names, (std::vector<std::string>{"(Intercept)", "x1", "x2", "t"}));
  double x1 = 0;
  for (const auto& s : data.subjects) {
    const auto& c = s.observations[0].covariates;
    EXPECT_TRUE(c[1] == 0.0 || c[1] == 1.0);
    EXPECT_GE(c[2], 3.0);
    EXPECT_LE(c[2], 8.0);
    x1 += c[1];
    for (const auto& o : s.observations) EXPECT_EQ(o.covariates[2], c[2]);
  }
  EXPECT_NEAR(x1 / 300.0, 0.5, 0.1);
}

TEST(Simulator, LargePositivePredictorGivesOnes) {
  auto pre = make_preset("binary-1f-t");
  pre.marginal.beta[0] = 10.0;
  SimDesign d;
  d.m = 100;
  const auto data = generate_dataset(d, pre.kind, pre.marginal, pre.copula);
  std::size_t ones = 0;
  for (const auto& s : data.subjects)
    for (const auto& o : s.observations) ones += o.y == 1.0;
  EXPECT_GE(static_cast<double>(ones) / static_cast<double>(data.n_observations()), 0.99);
}

TEST(Simulator, SameSeedSameDataset) {
  for (const auto& name : preset_names()) {
    EXPECT_EQ(fixture::preset_data(name, 20, 5), fixture::preset_data(name, 20, 5)) << name;
    EXPECT_NE(fixture::preset_data(name, 20, 5), fixture::preset_data(name, 20, 6)) << name;
  }
  EXPECT_THROW(make_preset("gamma-3f-gauss"), DomainError);
  EXPECT_THROW(make_preset("poisson-1f-t"), DomainError);
}

TEST(Simulator, IdentityFitHasZeroError) {
  McOptions opt;
  opt.N = 10;
  const auto gen = [](std::uint64_t seed) { return fixture::preset_data("normal-1f-gauss", 5, seed); };
  const auto fit = [](const LongitudinalDataset&) { return Replicate{{0.5, -1.0}, {0.1, 0.2}}; };
  const McReport r = mc_study({"a", "b"}, {0.5, -1.0}, gen, fit, opt);
  EXPECT_EQ(r.n_ok, 10);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.bias, 0.0);
    EXPECT_EQ(row.sd, 0.0);
    EXPECT_EQ(row.rmse, 0.0);
  }
  EXPECT_DOUBLE_EQ(r.rows[1].mean_se, 0.2);
}

TEST(Simulator, RmseDecomposition) {
  McOptions opt;
  opt.N = 37;
  const auto gen = [](std::uint64_t seed) { return fixture::preset_data("normal-1f-gauss", 3, seed); };
  const auto fit = [](const LongitudinalDataset& d) {
    return Replicate{{d.subjects[0].observations[0].y, d.subjects[1].observations[0].y}, {}};
  };
  const McReport r = mc_study({"a", "b"}, {1.0, 0.0}, gen, fit, opt);
  for (const auto& row : r.rows) {
    const double n = r.n_ok;
    EXPECT_NEAR(row.rmse * row.rmse, row.bias * row.bias + row.sd * row.sd * (n - 1) / n, 1e-12);
    EXPECT_TRUE(std::isnan(row.mean_se));
  }
}

TEST(Simulator, FailuresAreDroppedAndCounted) {
  McOptions opt;
  opt.N = 6;
  const auto gen = [](std::uint64_t seed) { return fixture::preset_data("normal-1f-gauss", 3, seed); };
  int calls = 0;
  const auto fit = [&calls](const LongitudinalDataset&) -> Replicate {
    if (calls++ % 3 == 0) throw ConvergenceError("stage-2 optimizer did not converge");
    return Replicate{{1.0}, {0.1}};
  };
  const McReport r = mc_study({"a"}, {1.0}, gen, fit, opt);
  EXPECT_EQ(r.n_failed, 2);
  EXPECT_EQ(r.n_ok, 4);
  ASSERT_EQ(r.failures.size(), 2u);
  EXPECT_NE(r.failures[0].find("did not converge"), std::string::npos);
}

TEST(Simulator, RequiresTwoReplications) {
  McOptions opt;
  opt.N = 1;
  try {
    mc_study(make_preset("gamma-1f-gauss"), SimDesign{}, opt);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_STREQ(e.what(), "N ≥ 2 required");
  }
  EXPECT_THROW(model_comparison_study({}, {}, opt), DomainError);
}

TEST(Simulator, ReportsIndependentOfWorkerCount) {
  SimDesign d;
  d.m = 60;
  McOptions opt;
  opt.N = 4;
  opt.seed = 7;
  const McReport a = mc_study(make_preset("normal-1f-gauss"), d, opt);
  opt.jobs = 3;
  const McReport b = mc_study(make_preset("normal-1f-gauss"), d, opt);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].mean, b.rows[k].mean);
    EXPECT_EQ(a.rows[k].sd, b.rows[k].sd);
    EXPECT_EQ(a.rows[k].mean_se, b.rows[k].mean_se);
  }
  EXPECT_EQ(a.rows.back().name, "rho1");
}

TEST(Simulator, SingletonCandidateHasFullPci) {
  SimDesign d;
  d.m = 40;
  const auto setup = comparison_setup(ResponseKind::gamma(), 1, d);
  McOptions opt;
  opt.N = 3;
  const ComparisonReport r = model_comparison_study({setup.generators[1]}, {setup.candidates[1]}, opt);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].pci_aic, 1.0);
  EXPECT_EQ(r.rows[0].pci_bic, 1.0);
  EXPECT_THROW(model_comparison_study({setup.generators[0]}, {setup.candidates[1]}, opt), DomainError);
}
