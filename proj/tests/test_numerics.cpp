#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kbe/errors.hpp"
#include "kbe/numerics.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("sigmoid is stable at extreme inputs", "[numerics]") {
  REQUIRE(kbe::sigmoid(0.0) == 0.5);
  REQUIRE_THAT(kbe::sigmoid(3.0) + kbe::sigmoid(-3.0), WithinAbs(1.0, 1e-15));
  REQUIRE(std::isfinite(kbe::sigmoid(-800.0)));
  REQUIRE(kbe::sigmoid(-800.0) >= 0.0);
  REQUIRE_THAT(kbe::sigmoid(800.0), WithinAbs(1.0, 1e-15));
  for (double x : {-30.0, -2.5, -0.1, 0.0, 0.7, 12.0}) {
    REQUIRE_THAT(kbe::logit(kbe::sigmoid(x)), WithinAbs(x, 1e-9));
  }
  // Near 1.0 doubles are 2^-52 apart, so 1 - sigmoid(30) ~ 9.4e-14 is held to
  // ~420 ulps and the round-trip cannot beat ~e^30/2^53 ~ 1.2e-3.
  REQUIRE_THAT(kbe::logit(kbe::sigmoid(30.0)), WithinAbs(30.0, 2e-3));
}

TEST_CASE("selu follows its defining constants", "[numerics]") {
  REQUIRE(kbe::selu(0.0) == 0.0);
  REQUIRE_THAT(kbe::selu(1.0), WithinAbs(kbe::kSeluLambda, 1e-15));
  REQUIRE_THAT(kbe::selu(2.5), WithinAbs(2.5 * kbe::kSeluLambda, 1e-15));
  // saturates at -lambda*alpha
  REQUIRE_THAT(kbe::selu(-50.0), WithinRel(-kbe::kSeluLambda * kbe::kSeluAlpha, 1e-12));
  for (double x : {-2.0, -0.5, 0.3, 1.7}) {
    double h = 1e-6;
    double fd = (kbe::selu(x + h) - kbe::selu(x - h)) / (2.0 * h);
    REQUIRE_THAT(kbe::selu_grad(x), WithinAbs(fd, 1e-6));
  }
}

TEST_CASE("clamped log floors the argument", "[numerics]") {
  REQUIRE(kbe::clamped_log(0.0) == std::log(1e-12));
  REQUIRE(kbe::clamped_log(-5.0) == std::log(1e-12));
  REQUIRE(kbe::clamped_log(0.5) == std::log(0.5));
  REQUIRE(kbe::clamped_log_grad(0.0) == 0.0);
  REQUIRE(kbe::clamped_log_grad(2.0) == 0.5);
}

TEST_CASE("regularized gamma and chi-squared cdf match closed forms", "[numerics]") {
  // P(1/2, x) = erf(sqrt(x))
  REQUIRE_THAT(kbe::regularized_gamma_p(0.5, 1.0), WithinAbs(std::erf(1.0), 1e-10));
  REQUIRE(kbe::regularized_gamma_p(0.5, 0.0) == 0.0);
  REQUIRE_THROWS_AS(kbe::regularized_gamma_p(0.0, 1.0), kbe::ConfigError);

  // chi^2 with df=2 is Exp(1/2)
  for (double x : {0.1, 1.0, 5.0, 20.0}) {
    REQUIRE_THAT(kbe::chi_squared_cdf(x, 2.0), WithinAbs(1.0 - std::exp(-x / 2.0), 1e-12));
  }
  REQUIRE_THAT(kbe::chi_squared_cdf(1.0, 1.0), WithinAbs(std::erf(std::sqrt(0.5)), 1e-10));
  REQUIRE(kbe::chi_squared_cdf(0.0, 5.0) == 0.0);
  REQUIRE(kbe::chi_squared_cdf(-1.0, 5.0) == 0.0);
  REQUIRE_THROWS_AS(kbe::chi_squared_cdf(1.0, 0.0), kbe::ConfigError);
}

TEST_CASE("chi-squared critical values match table entries", "[numerics]") {
  // upper-tail convention: P(X > q) = p
  REQUIRE_THAT(kbe::chi_squared_critical(0.025, 10.0), WithinAbs(20.48317735080739, 1e-4));
  REQUIRE_THAT(kbe::chi_squared_critical(0.05, 2.0), WithinAbs(5.991464547107983, 1e-4));
  REQUIRE_THAT(kbe::chi_squared_critical(0.5, 2.0), WithinAbs(2.0 * std::log(2.0), 1e-5));
  for (double p : {0.025, 0.2, 0.5, 0.9}) {
    for (double df : {1.0, 3.0, 10.0, 30.0}) {
      double q = kbe::chi_squared_critical(p, df);
      REQUIRE_THAT(kbe::chi_squared_cdf(q, df), WithinAbs(1.0 - p, 1e-5));
    }
  }
  REQUIRE_THROWS_MATCHES(kbe::chi_squared_critical(0.0, 1.0), kbe::ConfigError,
                         MessageMatches(ContainsSubstring("p must be in (0, 1)")));
  REQUIRE_THROWS_AS(kbe::chi_squared_critical(1.0, 1.0), kbe::ConfigError);
  REQUIRE_THROWS_AS(kbe::chi_squared_critical(0.5, 0.0), kbe::ConfigError);
}

TEST_CASE("adaptive simpson integrates smooth functions", "[numerics]") {
  REQUIRE_THAT(kbe::adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0),
               WithinAbs(1.0 / 3.0, 1e-10));
  double pi = std::acos(-1.0);
  REQUIRE_THAT(kbe::adaptive_simpson([](double x) { return std::sin(x); }, 0.0, pi),
               WithinAbs(2.0, 1e-9));
  REQUIRE_THAT(kbe::adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0),
               WithinAbs(std::exp(1.0) - 1.0, 1e-9));
  REQUIRE_THROWS_AS(
      kbe::adaptive_simpson([](double x) { return std::sin(50.0 * x); }, 0.0, 3.14159, 1e-15, 2),
      kbe::ConvergenceError);
}
