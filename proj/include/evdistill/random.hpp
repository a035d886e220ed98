#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace evdistill {

// All randomness flows through this engine; distribution draws below are
// hand-rolled so that streams are identical across standard libraries.
using RandomEngine = std::mt19937_64;

// Uniform in [0, 1) with 53-bit resolution.
inline double uniform01(RandomEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(RandomEngine& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Standard normal draw (Box-Muller, cosine branch).
double normal01(RandomEngine& rng);

// Gamma(alpha, 1) via Marsaglia-Tsang; alpha < 1 uses the boost identity.
double gamma_draw(RandomEngine& rng, double alpha);

// Orthogonal matrix from the QR decomposition of a Gaussian matrix,
// columns sign-corrected by the diagonal of R.
Eigen::MatrixXd random_orthogonal(RandomEngine& rng, int dim);

// Uniform draw from the probability simplex (normalized Exp(1) variates).
Eigen::VectorXd random_simplex_point(RandomEngine& rng, int k);

// Decorrelated per-stream seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace evdistill
