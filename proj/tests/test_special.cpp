#include <gtest/gtest.h>

#include <cmath>

#include "factorcop/bicopula.hpp"
#include "factorcop/special.hpp"
#include "oracles.hpp"

using namespace factorcop;

TEST(Special, NormalCdfExamples) {
  EXPECT_DOUBLE_EQ(uni_cdf(UniFamily::normal, 0.0), 0.5);
  EXPECT_NEAR(uni_cdf(UniFamily::normal, 1.96), 0.9750021, 5e-8);
}

TEST(Special, TQuantileMedianIsZero) {
  EXPECT_DOUBLE_EQ(uni_quantile(UniFamily::student_t, 0.5, 4.0), 0.0);
}

TEST(Special, QuantileRejectsBoundary) {
  EXPECT_THROW(uni_quantile(UniFamily::normal, 0.0), DomainError);
  EXPECT_THROW(uni_quantile(UniFamily::normal, 1.0), DomainError);
  EXPECT_THROW(uni_quantile(UniFamily::student_t, 0.3, std::nullopt), DomainError);
}

TEST(Special, QuantileInvertsCdf) {
  for (double nu : {2.0, 3.0, 4.0, 7.5, 30.0})
    for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.999, 1 - 1e-9}) {
      const double x = uni_quantile(UniFamily::student_t, p, nu);
      EXPECT_NEAR(uni_cdf(UniFamily::student_t, x, nu), p, 1e-10) << "nu=" << nu << " p=" << p;
    }
  for (double p : {1e-300, 1e-12, 0.3, 0.5, 0.9, 1 - 1e-12}) {
    const double x = uni_quantile(UniFamily::normal, p);
    EXPECT_NEAR(uni_cdf(UniFamily::normal, x), p, 1e-10 * std::max(1.0, p));
  }
}

// The integer-nu series is checked against Boost's incomplete-beta route.
TEST(Special, IntegerNuTMatchesBoost) {
  for (int nu = 1; nu <= 64; nu += (nu < 12 ? 1 : 13)) {
    for (double x = -40.0; x <= 40.0; x += 0.37) {
      const double ref = oracle::T(x, nu);
      EXPECT_NEAR(special::t_cdf(x, nu), ref, 1e-12 * ref + 1e-300) << "nu=" << nu << " x=" << x;
      const double lp = std::log(oracle::t_pdf(x, nu));
      EXPECT_NEAR(special::t_logpdf(x, nu), lp, 1e-12 * std::abs(lp) + 1e-13);
    }
    for (double p : {1e-200, 1e-40, 1e-9, 0.003, 0.1, 0.45, 0.5, 0.62, 0.97, 1 - 1e-10}) {
      const double ref = oracle::T_inv(p, nu);
      EXPECT_NEAR(special::t_quantile(p, nu), ref, 1e-12 * std::abs(ref) + 1e-14) << "nu=" << nu << " p=" << p;
    }
  }
}

TEST(Special, NonIntegerNuFallsBackToBoost) {
  for (double x : {-3.0, -0.2, 0.0, 1.4, 9.0})
    EXPECT_NEAR(special::t_cdf(x, 4.5), oracle::T(x, 4.5), 1e-14);
}

TEST(Special, TSurvivalIsReflectedCdf) {
  for (double x : {-5.0, -1.0, 0.3, 8.0}) EXPECT_DOUBLE_EQ(special::t_sf(x, 4), special::t_cdf(-x, 4));
}
