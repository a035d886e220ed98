#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdistill/data.hpp"
#include "evdistill/dirichlet.hpp"
#include "evdistill/nn.hpp"
#include "evdistill/teacher.hpp"
#include "evdistill/types.hpp"

namespace evdistill::distill {

enum class HeadKind { softmax, evidential };

HeadKind head_from_string(std::string_view name);
std::string to_string(HeadKind head);

struct DistillConfig {
  HeadKind head = HeadKind::evidential;
  int max_epochs = 60;
  int batch_size = 32;
  double lr = 3e-3;
  int lora_rank = 4;
  double lora_scale = 1.0;
  int patience = 0;
  std::optional<double> fixed_alpha0;  // evidential only
  bool train_head_dense = false;
  std::uint64_t seed = 0;
};

// Single-pass student: frozen backbone copied from the strongest teacher
// member, fresh head, trainable adapters on every layer.
struct StudentModel {
  HeadKind head = HeadKind::softmax;
  Eigen::MatrixXd input_transform;
  nn::Network net;
  std::optional<double> fixed_alpha0;
  int source_member = 0;
  DistillConfig config;

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  ProbVector predict_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Evidential heads only; softmax heads throw ConfigError.
  dirichlet::DirichletParams predict_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// Cross entropy against the weighted teacher mean.
double loss_softmax(const ProbVector& student, const teacher::TeacherPredictionSet& set);

// Negative weighted log Dirichlet density across the member predictions.
double loss_dirichlet(const dirichlet::DirichletParams& d,
                      const teacher::TeacherPredictionSet& set);

double loss_at_logits(HeadKind head, const Eigen::Ref<const Eigen::VectorXd>& logits,
                      const teacher::TeacherPredictionSet& set);

Eigen::VectorXd loss_grad_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                  const teacher::TeacherPredictionSet& set);
Eigen::VectorXd loss_grad_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                    const teacher::TeacherPredictionSet& set);
Eigen::VectorXd loss_grad_at_logits(HeadKind head,
                                    const Eigen::Ref<const Eigen::VectorXd>& logits,
                                    const teacher::TeacherPredictionSet& set);

// Stops once the monitored value rises above the best seen, after
// `patience` tolerated rises. Epochs are 1-based.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience = 0);

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double value);

  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  int patience_ = 0;
  int rises_ = 0;
  int best_epoch_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_nll = 0.0;
  double seconds = 0.0;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
  int stopped_epoch = 0;
  int restored_epoch = 0;
};

// Copies the highest-weight member's backbone (ties to the lowest index),
// freezes it, adds a fresh head and trainable adapters.
StudentModel build_student(const teacher::TeacherEnsemble& ens, const DistillConfig& cfg);

// Ground-truth labels feed only the early-stopping monitor, never the loss.
std::pair<StudentModel, TrainingTrace> train_student(StudentModel student,
                                                     const teacher::PredictionCache& cache,
                                                     const data::Dataset& train,
                                                     const DistillConfig& cfg);

// Mean negative log likelihood of the labels under the student's
// predictive probabilities, with the probability floor.
double student_nll(const StudentModel& student, const data::Dataset& labeled);

// Rescales concentrations to sum to a0 while preserving the mean. Warns
// when a0 is at or below the class count.
dirichlet::DirichletParams apply_fixed_alpha0(const dirichlet::DirichletParams& d, double a0);

void write_trace_csv(const TrainingTrace& trace, std::ostream& out);

nlohmann::json student_to_json(const StudentModel& student);
StudentModel student_from_json(const nlohmann::json& j);
void save_student(const StudentModel& student, const std::filesystem::path& path);
StudentModel load_student(const std::filesystem::path& path);

nlohmann::json config_to_json(const DistillConfig& cfg);
DistillConfig config_from_json(const nlohmann::json& j);

}  // namespace evdistill::distill
