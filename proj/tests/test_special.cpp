#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "evdistill/errors.hpp"
#include "evdistill/special.hpp"

using namespace evdistill;

namespace {

// Independent digamma: recurrence up to 40, then a long Bernoulli tail.
// Accurate to ~1e-14 over the range exercised below.
double digamma_oracle(double x) {
  double shift = 0.0;
  while (x < 40.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double z = inv * inv;
  const double tail =
      z * (-1.0 / 12 +
           z * (1.0 / 120 +
                z * (-1.0 / 252 +
                     z * (1.0 / 240 +
                          z * (-1.0 / 132 + z * (691.0 / 32760 + z * (-1.0 / 12)))))));
  return shift + std::log(x) - 0.5 * inv + tail;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

TEST_CASE("softplus is exact and finite at extreme arguments") {
  CHECK(std::abs(softplus(0.0) - std::log(2.0)) <= 1e-15);
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(softplus(-40.0) > 0.0);
  CHECK(std::isfinite(softplus(745.0)));
  CHECK(std::isfinite(softplus(-745.0)));
  CHECK(std::isfinite(softplus(1e8)));
  // Identity softplus(x) - softplus(-x) = x.
  for (const double x : {-7.5, -0.3, 0.2, 4.0, 25.0}) {
    CHECK(std::abs(softplus(x) - softplus(-x) - x) <= 1e-12);
  }
  CHECK(std::abs(softplus(0.0f) - std::log(2.0f)) <= 1e-6f);
}

TEST_CASE("sigmoid is symmetric, bounded, and overflow safe") {
  CHECK(sigmoid(0.0) == 0.5);
  for (const double x : {0.1, 1.0, 12.0, 30.0}) {
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15);
  }
  CHECK(sigmoid(745.0) == 1.0);
  CHECK(sigmoid(-745.0) > 0.0);
  CHECK(sigmoid(-745.0) < 1e-300);
}

TEST_CASE("log_gamma matches the standard library across the domain") {
  const double fixed[] = {1e-6, 1e-3, 0.1,   0.25, 0.5, 0.75,  0.99, 1.0,
                          1.5,  2.0,  3.75,  10.0, 100.5, 1e3, 1e6};
  for (const double x : fixed) {
    const double ref = std::lgamma(x);
    CHECK(std::abs(log_gamma(x) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double x = log_uniform(rng, 1e-4, 1e4);
    const double ref = std::lgamma(x);
    CAPTURE(x);
    CHECK(std::abs(log_gamma(x) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
  // Integer arguments against exact factorials.
  double fact = 1.0;
  for (int n = 1; n <= 15; ++n) {
    CHECK(std::abs(log_gamma(static_cast<double>(n)) - std::log(fact)) <=
          1e-12 * std::max(1.0, std::abs(std::log(fact))));
    fact *= n;
  }
  CHECK_THROWS_AS(log_gamma(0.0), NumericError);
  CHECK_THROWS_AS(log_gamma(-1.5), NumericError);
}

TEST_CASE("digamma matches closed forms and an independent oracle") {
  CHECK(std::abs(digamma(1.0) - (-kEulerGamma)) <= 1e-12);
  CHECK(std::abs(digamma(0.5) - (-kEulerGamma - 2.0 * std::log(2.0))) <= 1e-12);
  CHECK(std::abs(digamma(2.0) - (1.0 - kEulerGamma)) <= 1e-12);
  // psi(10.5) = psi(0.5) + sum_{k=0}^{9} 1/(k + 0.5).
  double harmonic_half = 0.0;
  for (int k = 0; k < 10; ++k) harmonic_half += 1.0 / (k + 0.5);
  CHECK(std::abs(digamma(10.5) - (-kEulerGamma - 2.0 * std::log(2.0) + harmonic_half)) <=
        1e-12);

  for (const double x : {0.5, 1.0, 2.0, 10.5}) {
    CHECK(std::abs(digamma(x) - digamma_oracle(x)) <= 1e-10);
  }
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const double x = log_uniform(rng, 1e-3, 1e4);
    const double ref = digamma_oracle(x);
    CAPTURE(x);
    CHECK(std::abs(digamma(x) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
  // Recurrence psi(x + 1) = psi(x) + 1/x.
  for (int i = 0; i < 200; ++i) {
    const double x = log_uniform(rng, 1e-2, 1e3);
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) <= 1e-10);
  }
  CHECK_THROWS_AS(digamma(0.0), NumericError);
  CHECK_THROWS_AS(digamma(-3.0), NumericError);
}

TEST_CASE("floored_log clamps at the probability floor") {
  CHECK(floored_log(0.0) == std::log(kProbFloor));
  CHECK(floored_log(1e-15) == std::log(kProbFloor));
  CHECK(floored_log(0.5) == std::log(0.5));
  CHECK(floored_log(1.0) == 0.0);
}

TEST_CASE("log_sum_exp is shift stable") {
  Eigen::VectorXd big(2);
  big << 1000.0, 1000.0;
  CHECK(std::abs(log_sum_exp(big) - (1000.0 + std::log(2.0))) <= 1e-12);
  Eigen::VectorXd small(2);
  small << -1000.0, -1000.0;
  CHECK(std::abs(log_sum_exp(small) - (-1000.0 + std::log(2.0))) <= 1e-12);
  Eigen::VectorXd one(1);
  one << 3.5;
  CHECK(log_sum_exp(one) == 3.5);
  Eigen::VectorXd v(3);
  v << 0.1, -0.7, 1.3;
  const double naive = std::log(std::exp(0.1) + std::exp(-0.7) + std::exp(1.3));
  CHECK(std::abs(log_sum_exp(v) - naive) <= 1e-12);
  CHECK_THROWS_AS(log_sum_exp(Eigen::VectorXd()), ShapeError);
}

TEST_CASE("softmax normalizes without overflow") {
  Eigen::VectorXd extreme(2);
  extreme << 800.0, 0.0;
  const Eigen::VectorXd p = softmax(extreme);
  // The dominated component underflows to (at most) a subnormal; the
  // winning one must come out exactly 1 so that log(p) is exactly 0.
  CHECK(p[0] == 1.0);
  CHECK(p[1] <= 1e-300);
  CHECK(p[1] >= 0.0);

  Eigen::VectorXd equal = Eigen::VectorXd::Zero(4);
  const Eigen::VectorXd u = softmax(equal);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(u[i] == u[0]);
  CHECK(std::abs(u.sum() - 1.0) <= 1e-15);

  Eigen::VectorXd v(3);
  v << 0.3, -1.1, 2.0;
  Eigen::VectorXd naive = v.array().exp();
  naive /= naive.sum();
  CHECK((softmax(v) - naive).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(softmax(Eigen::VectorXd()), ShapeError);
}

TEST_CASE("shannon_entropy follows the zero convention") {
  Eigen::VectorXd onehot(3);
  onehot << 0.0, 1.0, 0.0;
  CHECK(shannon_entropy(onehot) == 0.0);
  for (const int k : {2, 3, 10}) {
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(k, 1.0 / k);
    CHECK(std::abs(shannon_entropy(uniform) - std::log(static_cast<double>(k))) <= 1e-12);
  }
  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  CHECK(std::abs(shannon_entropy(p) - (-0.7 * std::log(0.7) - 0.3 * std::log(0.3))) <= 1e-15);
}
