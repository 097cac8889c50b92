#include <gtest/gtest.h>

#include <cmath>

#include "factorcop/bicopula.hpp"
#include "oracles.hpp"

using namespace factorcop;

namespace {

const BicopParam kGauss = BicopParam::gaussian(0.5);
const BicopParam kT = BicopParam::student_t(0.5, 4.0);

std::vector<double> grid(int n) {
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back((k + 0.5) / n);
  return g;
}

}  // namespace

TEST(Bicopula, ValidatesParameters) {
  EXPECT_THROW(BicopParam::gaussian(1.0).validate(), DomainError);
  EXPECT_THROW(BicopParam::student_t(0.2, 1.5).validate(), DomainError);
  EXPECT_THROW(bicop_pdf(0.5, 0.5, BicopParam::gaussian(-1.2)), DomainError);
}

TEST(Bicopula, ZeroRhoIsIndependence) {
  for (auto p : {BicopParam::gaussian(0.0), BicopParam::student_t(0.0, 4.0)})
    for (double a : {0.05, 0.4, 0.93})
      for (double b : {0.01, 0.5, 0.7}) {
        EXPECT_EQ(bicop_pdf(a, b, p), 1.0);
        EXPECT_EQ(hfun(a, b, p), a);
        EXPECT_EQ(hinv(a, b, p), a);
      }
}

TEST(Bicopula, GaussianDensityAtMedian) {
  EXPECT_NEAR(bicop_pdf(0.5, 0.5, kGauss), 1.0 / std::sqrt(0.75), 1e-12);
  EXPECT_NEAR(bicop_pdf(0.5, 0.5, kGauss), 1.1547, 5e-5);
}

TEST(Bicopula, DensitiesMatchDirectFormulas) {
  for (double a : grid(7))
    for (double b : grid(9)) {
      EXPECT_NEAR(bicop_pdf(a, b, kGauss), oracle::gauss_copula_pdf(a, b, 0.5), 1e-11);
      EXPECT_NEAR(bicop_pdf(a, b, kT), oracle::t_copula_pdf(a, b, 0.5, 4.0), 1e-10);
    }
}

TEST(Bicopula, DensityIntegratesToOne) {
  for (const auto& p : {kGauss, kT}) {
    const double s = oracle::midpoint2([&](double a, double b) { return bicop_pdf(a, b, p); }, 200);
    EXPECT_NEAR(s, 1.0, 2e-3) << to_string(p.family);
  }
  // The 200x200 midpoint rule converges slowly near the corners where the
  // density is unbounded; on the score scale the same integral is smooth.
  for (const auto& p : {kGauss, kT}) {
    const double s = oracle::midpoint2(
        [&](double a, double b) {
          const double za = 16 * a - 8, zb = 16 * b - 8;
          return 256 * bicop_pdf(oracle::Phi(za), oracle::Phi(zb), p) * oracle::phi(za) * oracle::phi(zb);
        },
        200);
    EXPECT_NEAR(s, 1.0, 1e-6) << to_string(p.family);
  }
}

TEST(Bicopula, SymmetryAndRadialSymmetry) {
  for (const auto& p : {kGauss, kT, BicopParam::student_t(-0.7, 3.0)})
    for (double a : grid(6))
      for (double b : grid(5)) {
        EXPECT_NEAR(bicop_pdf(a, b, p), bicop_pdf(b, a, p), 1e-12);
        EXPECT_NEAR(bicop_pdf(a, b, p), bicop_pdf(1 - a, 1 - b, p), 1e-10);
      }
}

TEST(Bicopula, GaussianHfunExamples) {
  for (double r : {-0.9, 0.1, 0.5, 0.99}) EXPECT_NEAR(hfun(0.5, 0.5, BicopParam::gaussian(r)), 0.5, 1e-15);
  EXPECT_NEAR(hfun(0.3, 0.7, kGauss), 0.1819, 5e-5);
  EXPECT_NEAR(hinv(0.1819, 0.7, kGauss), 0.3, 5e-4);
}

// h(u1|u2) = dC(u1,u2)/du2 from a bivariate-normal CDF oracle.
TEST(Bicopula, GaussianHfunIsCdfDerivative) {
  const double u1 = 0.3, u2 = 0.7, e = 1e-5;
  const double fd =
      (oracle::gauss_copula_cdf(u1, u2 + e, 0.5) - oracle::gauss_copula_cdf(u1, u2 - e, 0.5)) / (2 * e);
  EXPECT_NEAR(hfun(u1, u2, kGauss), fd, 1e-7);
}

// The standard conditional-t form is checked against integration of the density.
TEST(Bicopula, HfunMatchesIntegratedDensity) {
  for (double u1 : {0.02, 0.3, 0.75, 0.99})
    for (double u2 : {0.05, 0.5, 0.9}) {
      auto ct = [](double a, double b) { return oracle::t_copula_pdf(a, b, 0.5, 4.0); };
      auto cg = [](double a, double b) { return oracle::gauss_copula_pdf(a, b, 0.5); };
      EXPECT_NEAR(hfun(u1, u2, kT), oracle::hfun_by_integration(ct, u1, u2), 1e-9);
      EXPECT_NEAR(hfun(u1, u2, kGauss), oracle::hfun_by_integration(cg, u1, u2), 1e-9);
    }
}

TEST(Bicopula, HfunIncreasingInFirstArgument) {
  for (const auto& p : {kGauss, kT, BicopParam::gaussian(-0.8), BicopParam::student_t(0.9, 3.0)})
    for (double b : grid(10)) {
      double prev = 0.0;
      for (double a : grid(50)) {
        const double h = hfun(a, b, p);
        EXPECT_GT(h, prev);
        prev = h;
      }
    }
}

TEST(Bicopula, HinvRoundTrip) {
  for (double rho : {-0.8, 0.3, 0.5, 0.95})
    for (double nu : {3.0, 4.0, 10.0})
      for (const auto& p : {BicopParam::gaussian(rho), BicopParam::student_t(rho, nu)})
        for (double w : grid(20))
          for (double v : grid(20)) EXPECT_NEAR(hfun(hinv(w, v, p), v, p), w, 1e-10);
}

TEST(Bicopula, LargeNuApproachesGaussian) {
  const BicopParam big = BicopParam::student_t(0.5, 1e6);
  for (double a : grid(9))
    for (double b : grid(9)) {
      EXPECT_NEAR(bicop_pdf(a, b, big), bicop_pdf(a, b, kGauss), 1e-4);
      EXPECT_NEAR(hfun(a, b, big), hfun(a, b, kGauss), 1e-4);
    }
}

TEST(Bicopula, HfunAveragesToIdentity) {
  for (double rho : {-0.8, 0.0, 0.5, 0.8})
    for (const auto& p : {BicopParam::gaussian(rho), BicopParam::student_t(rho, 4.0)})
      for (double u1 : {0.1, 0.45, 0.9}) {
        const double s = oracle::trapezoid(
            [&](double z) { return hfun(u1, oracle::Phi(z), p) * oracle::phi(z); }, -10, 10, 20000);
        EXPECT_NEAR(s, u1, 1e-8);
      }
}

TEST(Bicopula, BoundaryInputsAreClampedAndFlagged) {
  bool clamped = false;
  const double c = bicop_pdf(0.0, 0.5, kGauss, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_TRUE(std::isfinite(c));
  clamped = false;
  bicop_pdf(0.2, 0.5, kGauss, &clamped);
  EXPECT_FALSE(clamped);
}
