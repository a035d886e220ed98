#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <ostream>
#include <vector>

#include "evdistill/random.hpp"
#include "evdistill/types.hpp"

namespace evdistill::dirichlet {

// Concentration parameters of a Dirichlet over the class simplex.
class DirichletParams {
 public:
  DirichletParams() = default;
  explicit DirichletParams(Eigen::VectorXd alpha);

  const Eigen::VectorXd& alpha() const { return alpha_; }
  double alpha0() const { return alpha0_; }
  Eigen::Index size() const { return alpha_.size(); }

 private:
  Eigen::VectorXd alpha_;
  double alpha0_ = 0.0;
};

// alpha_c = 1 + softplus(z_c); every concentration ends up > 1.
// Throws NumericError on non-finite logits.
DirichletParams link_from_logits(const Eigen::Ref<const Eigen::VectorXd>& z);

// Marginal mean alpha_c / alpha0.
ProbVector mean(const DirichletParams& d);

// Log density at p. Components of p below the probability floor are
// floored before the log; `floored`, when given, reports whether that
// happened.
double log_density(const DirichletParams& d, const ProbVector& p, bool* floored = nullptr);

// n independent draws via per-component Gamma(alpha_c, 1) normalization.
std::vector<ProbVector> sample(const DirichletParams& d, RandomEngine& rng, std::size_t n);

// total = H(mean); aleatoric = -sum_c mean_c (psi(alpha_c + 1) - psi(alpha0 + 1));
// epistemic = total - aleatoric. All in nats.
UncertaintyBreakdown entropy_decomposition(const DirichletParams& d);

// Density values over a regular simplex grid, CSV rows "p0,...,density".
// Supports 2 and 3 classes; resolution is the number of subdivisions per edge.
void write_simplex_grid_csv(const DirichletParams& d, int resolution, std::ostream& out);

}  // namespace evdistill::dirichlet
