#include "evdistill/dirichlet.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/special.hpp"

namespace evdistill::dirichlet {

DirichletParams::DirichletParams(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() < 1) throw ShapeError("DirichletParams: needs at least one component");
  for (Eigen::Index c = 0; c < alpha_.size(); ++c) {
    if (!std::isfinite(alpha_[c]) || alpha_[c] <= 0.0) {
      throw NumericError("DirichletParams: alpha[" + std::to_string(c) +
                         "] must be finite and positive");
    }
  }
  alpha0_ = alpha_.sum();
}

DirichletParams link_from_logits(const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() < 1) throw ShapeError("link_from_logits: needs at least one logit");
  Eigen::VectorXd alpha(z.size());
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    if (!std::isfinite(z[c])) {
      throw NumericError("link_from_logits: non-finite logit at index " + std::to_string(c));
    }
    alpha[c] = 1.0 + softplus(z[c]);
  }
  return DirichletParams(std::move(alpha));
}

ProbVector mean(const DirichletParams& d) {
  return ProbVector(d.alpha() / d.alpha0());
}

double log_density(const DirichletParams& d, const ProbVector& p, bool* floored) {
  if (p.size() != d.size()) throw ShapeError("log_density: dimension mismatch");
  double result = log_gamma(d.alpha0());
  bool any_floor = false;
  for (Eigen::Index c = 0; c < d.size(); ++c) {
    result -= log_gamma(d.alpha()[c]);
    double pc = p[c];
    if (pc < kProbFloor) {
      pc = kProbFloor;
      any_floor = true;
    }
    result += (d.alpha()[c] - 1.0) * std::log(pc);
  }
  if (floored != nullptr) *floored = any_floor;
  return result;
}

std::vector<ProbVector> sample(const DirichletParams& d, RandomEngine& rng, std::size_t n) {
  std::vector<ProbVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd g(d.size());
    for (Eigen::Index c = 0; c < d.size(); ++c) {
      g[c] = gamma_draw(rng, d.alpha()[c]);
    }
    out.push_back(ProbVector::normalized(std::move(g)));
  }
  return out;
}

UncertaintyBreakdown entropy_decomposition(const DirichletParams& d) {
  const Eigen::VectorXd m = d.alpha() / d.alpha0();
  const double psi_a0 = digamma(d.alpha0() + 1.0);
  double aleatoric = 0.0;
  for (Eigen::Index c = 0; c < d.size(); ++c) {
    aleatoric -= m[c] * (digamma(d.alpha()[c] + 1.0) - psi_a0);
  }
  UncertaintyBreakdown out;
  out.total = shannon_entropy(m);
  out.aleatoric = aleatoric;
  out.epistemic = out.total - aleatoric;
  return out;
}

void write_simplex_grid_csv(const DirichletParams& d, int resolution, std::ostream& out) {
  if (resolution < 1) throw ConfigError("simplex grid: resolution must be >= 1");
  const Eigen::Index k = d.size();
  if (k != 2 && k != 3) {
    throw ShapeError("simplex grid: only 2- and 3-class parameters supported");
  }
  if (k == 2) {
    out << "p0,p1,density\n";
    for (int i = 0; i <= resolution; ++i) {
      const double p0 = static_cast<double>(i) / resolution;
      Eigen::VectorXd p(2);
      p << p0, 1.0 - p0;
      const double density = std::exp(log_density(d, ProbVector(p)));
      out << io::format_double(p[0]) << ',' << io::format_double(p[1]) << ','
          << io::format_double(density) << '\n';
    }
    return;
  }
  out << "p0,p1,p2,density\n";
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; j + i <= resolution; ++j) {
      Eigen::VectorXd p(3);
      p << static_cast<double>(i) / resolution, static_cast<double>(j) / resolution,
          static_cast<double>(resolution - i - j) / resolution;
      const double density = std::exp(log_density(d, ProbVector(p)));
      out << io::format_double(p[0]) << ',' << io::format_double(p[1]) << ','
          << io::format_double(p[2]) << ',' << io::format_double(density) << '\n';
    }
  }
}

}  // namespace evdistill::dirichlet
