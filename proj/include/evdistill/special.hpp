#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "evdistill/errors.hpp"

namespace evdistill {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEulerGamma = 0.57721566490153286;

// Probabilities are floored at this value before taking logs.
inline constexpr double kProbFloor = 1e-12;

// Overflow-safe log(1 + exp(x)).
template <typename Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    const Scalar e = std::exp(-x);
    return Scalar(1) / (Scalar(1) + e);
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// Lanczos approximation, g = 7, nine coefficients, with reflection below 1/2.
template <typename Scalar>
Scalar log_gamma(Scalar x) {
  static const Scalar coeff[9] = {
      Scalar(0.99999999999980993),
      Scalar(676.5203681218851),
      Scalar(-1259.1392167224028),
      Scalar(771.32342877765313),
      Scalar(-176.61502916214059),
      Scalar(12.507343278686905),
      Scalar(-0.13857109526572012),
      Scalar(9.9843695780195716e-6),
      Scalar(1.5056327351493116e-7)};
  if (!(x > Scalar(0))) throw NumericError("log_gamma: argument must be positive");
  if (x < Scalar(0.5)) {
    return std::log(Scalar(kPi) / std::sin(Scalar(kPi) * x)) - log_gamma(Scalar(1) - x);
  }
  const Scalar z = x - Scalar(1);
  Scalar sum = coeff[0];
  for (int i = 1; i < 9; ++i) sum += coeff[i] / (z + Scalar(i));
  const Scalar base = z + Scalar(7.5);
  return Scalar(0.91893853320467274178)  // log(sqrt(2 pi))
         + (z + Scalar(0.5)) * std::log(base) - base + std::log(sum);
}

// Recurrence up to x >= 6, then an asymptotic tail with six Bernoulli terms.
template <typename Scalar>
Scalar digamma(Scalar x) {
  if (!(x > Scalar(0))) throw NumericError("digamma: argument must be positive");
  Scalar shifted = 0;
  while (x < Scalar(6)) {
    shifted -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar z = inv * inv;
  const Scalar tail =
      z * (Scalar(-1.0 / 12) +
           z * (Scalar(1.0 / 120) +
                z * (Scalar(-1.0 / 252) +
                     z * (Scalar(1.0 / 240) +
                          z * (Scalar(-1.0 / 132) + z * Scalar(691.0 / 32760))))));
  return shifted + std::log(x) - Scalar(0.5) * inv + tail;
}

inline double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw ShapeError("log_sum_exp: empty vector");
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

inline Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() == 0) throw ShapeError("softmax: empty vector");
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

// Shannon entropy in nats with the 0 log 0 = 0 convention.
inline double shannon_entropy(const Eigen::Ref<const Eigen::VectorXd>& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

}  // namespace evdistill
