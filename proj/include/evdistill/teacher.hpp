#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdistill/data.hpp"
#include "evdistill/nn.hpp"
#include "evdistill/types.hpp"

namespace evdistill::teacher {

enum class TransformKind { identity, rotation, dropout };

TransformKind transform_from_string(std::string_view name);
std::string to_string(TransformKind kind);

// One ensemble member: a classifier behind a fixed input transform. The
// transform plays the role of a distinct instruction phrasing; meta keeps
// a human-readable description of it.
struct TeacherMember {
  Eigen::MatrixXd input_transform;  // d x d
  nn::Network net;
  std::string meta;

  ProbVector predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct TeacherEnsemble {
  std::vector<TeacherMember> members;
  Eigen::VectorXd weights;  // on the simplex, one per member
  int num_classes = 0;
  int feature_dim = 0;

  std::size_t size() const { return members.size(); }
  void validate() const;
};

// Member-wise predictions for one input, next to the ensemble weights.
struct TeacherPredictionSet {
  Eigen::MatrixXd probs;    // members x classes
  Eigen::VectorXd weights;  // members
};

// Throws with the failing member's index in the message.
TeacherPredictionSet predict_members(const TeacherEnsemble& ens,
                                     const Eigen::Ref<const Eigen::VectorXd>& x);

ProbVector predictive_mean(const TeacherPredictionSet& set);

// Law-of-total-entropy split: total = H(weighted mean), aleatoric =
// weighted mean of member entropies, epistemic = difference.
UncertaintyBreakdown ensemble_entropy_decomposition(const TeacherPredictionSet& set);

// Log likelihood of the labeled set under each member, with the
// probability floor applied inside the log.
Eigen::VectorXd member_log_likelihoods(const TeacherEnsemble& ens, const data::Dataset& labeled);

// w . L + H(w); the quantity the weight fit maximizes over the simplex.
double bayespe_objective(const Eigen::Ref<const Eigen::VectorXd>& weights,
                         const Eigen::Ref<const Eigen::VectorXd>& member_loglik);

struct BayesPeResult {
  Eigen::VectorXd weights;
  Eigen::VectorXd member_loglik;
  double objective = 0.0;
};

// Closed form w_i proportional to exp(L_i), evaluated in log space. The
// result is cross-checked against random simplex points before returning.
BayesPeResult fit_bayespe_weights(const TeacherEnsemble& ens, const data::Dataset& labeled);

struct MemberConfig {
  std::vector<int> hidden = {16, 16};
  nn::Activation activation = nn::Activation::tanh;
  int epochs = 12;
  int batch_size = 32;
  double lr = 3e-3;
  // L2 penalty on trainable weights. Caps the confidence a member can
  // reach, so equally good members land on nearly identical soft
  // predictions instead of racing to saturated logits.
  double weight_decay = 0.0;
  // Leading hidden layers kept at their random initialization. Frozen
  // random projections give every member the same smooth hypothesis
  // family near the data while its response decays off the data
  // manifold, where fresh saturation patterns stop resembling anything
  // the trained layers ever saw.
  int frozen_hidden = 0;
  TransformKind transform = TransformKind::identity;
  // Position in the ensemble; the dropout transform cycles the dropped
  // feature through this so the views stay balanced for every seed.
  int index = 0;
  std::uint64_t seed = 0;
};

TeacherMember train_member(const data::Dataset& train, const MemberConfig& cfg);

double member_accuracy(const TeacherMember& member, const data::Dataset& labeled);

// Materialized member predictions for a dataset, keyed by sample id.
struct PredictionCache {
  int num_members = 0;
  int num_classes = 0;
  Eigen::VectorXd weights;
  std::vector<std::string> member_meta;
  std::unordered_map<std::string, Eigen::MatrixXd> rows;

  bool contains(const std::string& id) const { return rows.count(id) > 0; }
  // Throws DataError naming the id when it is missing.
  TeacherPredictionSet set_for(const std::string& id) const;
};

// JSONL: one header record, then one record per sample. Written atomically.
void cache_predictions(const TeacherEnsemble& ens, const data::Dataset& ds,
                       const std::filesystem::path& path);
PredictionCache load_cache(const std::filesystem::path& path);

nlohmann::json ensemble_to_json(const TeacherEnsemble& ens);
TeacherEnsemble ensemble_from_json(const nlohmann::json& j);
void save_ensemble(const TeacherEnsemble& ens, const std::filesystem::path& path);
TeacherEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace evdistill::teacher
