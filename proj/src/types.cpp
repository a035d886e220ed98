#include "evdistill/types.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "evdistill/errors.hpp"

namespace evdistill {

ProbVector::ProbVector(Eigen::VectorXd p) : p_(std::move(p)) { validate(); }

ProbVector ProbVector::normalized(Eigen::VectorXd nonneg) {
  if (nonneg.size() < 1) throw ShapeError("ProbVector: needs at least one component");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < nonneg.size(); ++i) {
    if (!std::isfinite(nonneg[i]) || nonneg[i] < 0.0) {
      throw NumericError("ProbVector::normalized: components must be finite and nonnegative");
    }
    sum += nonneg[i];
  }
  if (sum <= 0.0) throw NumericError("ProbVector::normalized: total mass must be positive");
  nonneg /= sum;
  return ProbVector(std::move(nonneg));
}

int ProbVector::argmax() const {
  int best = 0;
  for (Eigen::Index c = 1; c < p_.size(); ++c) {
    if (p_[c] > p_[best]) best = static_cast<int>(c);
  }
  return best;
}

void ProbVector::validate() const {
  if (p_.size() < 1) throw ShapeError("ProbVector: needs at least one component");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    const double v = p_[i];
    if (!std::isfinite(v)) throw NumericError("ProbVector: non-finite component");
    if (v < 0.0 || v > 1.0 + 1e-12) {
      throw NumericError("ProbVector: component " + std::to_string(i) + " outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw NumericError("ProbVector: components sum to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace evdistill
