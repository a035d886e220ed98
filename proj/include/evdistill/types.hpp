#pragma once

#include <Eigen/Dense>
#include <optional>

namespace evdistill {

// Discrete distribution over classes. Construction validates that all
// components lie in [0, 1] and that they sum to 1 within 1e-9.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(Eigen::VectorXd p);

  // Scales a nonnegative vector with positive mass to sum exactly 1.
  static ProbVector normalized(Eigen::VectorXd nonneg);

  const Eigen::VectorXd& values() const { return p_; }
  Eigen::Index size() const { return p_.size(); }
  double operator[](Eigen::Index c) const { return p_[c]; }

  // Ties resolve to the lowest index.
  int argmax() const;

 private:
  void validate() const;

  Eigen::VectorXd p_;
};

// Entropy split in nats. Heads that cannot separate the two parts leave
// the optional fields empty and report only the total.
struct UncertaintyBreakdown {
  double total = 0.0;
  std::optional<double> aleatoric;
  std::optional<double> epistemic;
};

}  // namespace evdistill
