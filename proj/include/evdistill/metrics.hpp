#pragma once

#include <Eigen/Dense>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdistill/data.hpp"
#include "evdistill/types.hpp"

namespace evdistill::metrics {

struct BinStat {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Equal-width bins over (0, 1]; a confidence exactly on a boundary falls
// in the lower bin, except 1.0 which lands in the top bin.
std::vector<BinStat> reliability_bins(const std::vector<ProbVector>& probs,
                                      const std::vector<int>& labels, int n_bins = 10);
double ece(const std::vector<ProbVector>& probs, const std::vector<int>& labels,
           int n_bins = 10);

// Class-averaged quadratic score: mean over samples and classes of
// (p_c - 1[y = c])^2.
double brier(const std::vector<ProbVector>& probs, const std::vector<int>& labels);

// Mean negative log likelihood with the probability floor.
double nll(const std::vector<ProbVector>& probs, const std::vector<int>& labels);

// Mann-Whitney AUROC with ties counted as half; positives are expected to
// score higher.
double auroc(const std::vector<double>& negatives, const std::vector<double>& positives);

// 1-Wasserstein distance between empirical distributions via the quantile
// coupling; sizes may differ.
double wasserstein1(std::vector<double> a, std::vector<double> b);

struct EvalReport {
  std::string model;
  std::size_t n_samples = 0;
  std::size_t n_failures = 0;
  double accuracy = 0.0;
  double ece = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  std::vector<BinStat> bins;
};

using Predictor = std::function<ProbVector(const Eigen::Ref<const Eigen::VectorXd>&)>;

struct PredictionDump {
  std::vector<std::string> ids;
  std::vector<ProbVector> probs;
  std::vector<int> labels;
  std::size_t n_failures = 0;
};

// Per-sample prediction failures are counted and skipped.
PredictionDump collect_predictions(const Predictor& predict, const data::Dataset& labeled);

EvalReport evaluate(const PredictionDump& dump, int n_bins = 10);
EvalReport evaluate(const Predictor& predict, const data::Dataset& labeled, int n_bins = 10);

// Dump rows next to an evaluation so the reported metrics can be
// recomputed from the file.
void write_prediction_csv(const PredictionDump& dump, std::ostream& out);

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace evdistill::metrics
