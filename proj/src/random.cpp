#include "evdistill/random.hpp"

#include <cmath>

#include "evdistill/errors.hpp"
#include "evdistill/special.hpp"

namespace evdistill {

double normal01(RandomEngine& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1], keeps the log finite
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double gamma_draw(RandomEngine& rng, double alpha) {
  if (!(alpha > 0.0)) throw NumericError("gamma_draw: alpha must be positive");
  if (alpha < 1.0) {
    const double u = std::max(uniform01(rng), 1e-300);
    return gamma_draw(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal01(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = std::max(uniform01(rng), 1e-300);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Eigen::MatrixXd random_orthogonal(RandomEngine& rng, int dim) {
  if (dim < 1) throw ShapeError("random_orthogonal: dim must be >= 1");
  Eigen::MatrixXd g(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) g(i, j) = normal01(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Eigen::VectorXd random_simplex_point(RandomEngine& rng, int k) {
  if (k < 1) throw ShapeError("random_simplex_point: k must be >= 1");
  Eigen::VectorXd e(k);
  for (int i = 0; i < k; ++i) {
    e[i] = -std::log(1.0 - uniform01(rng));
  }
  const double s = e.sum();
  if (s <= 0.0) return Eigen::VectorXd::Constant(k, 1.0 / k);
  return e / s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

}  // namespace evdistill
