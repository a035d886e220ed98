#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "evdistill/data.hpp"
#include "evdistill/dirichlet.hpp"
#include "evdistill/distill.hpp"
#include "evdistill/teacher.hpp"
#include "evdistill/types.hpp"

namespace evdistill::uncertainty {

// Softmax heads carry no evidence structure: total entropy only.
UncertaintyBreakdown score_softmax(const ProbVector& p);
UncertaintyBreakdown score_evidential(const dirichlet::DirichletParams& d);
UncertaintyBreakdown score_ensemble(const teacher::TeacherPredictionSet& set);

struct ScoreRecord {
  std::string sample_id;
  int pred_class = -1;
  std::optional<int> true_class;
  UncertaintyBreakdown scores;
  std::string error;  // nonempty when this sample failed

  bool ok() const { return error.empty(); }
};

// Per-sample failures become error records; the batch keeps going.
struct BatchScores {
  std::vector<ScoreRecord> records;  // sorted by sample id
  std::size_t failures = 0;

  std::vector<double> totals() const;
  std::vector<double> aleatorics() const;
  std::vector<double> epistemics() const;
  double mean_total() const;
};

BatchScores batch_scores(const distill::StudentModel& student, const data::Dataset& ds,
                         int threads = 1);
BatchScores batch_scores(const teacher::TeacherEnsemble& ens, const data::Dataset& ds,
                         int threads = 1);

void write_scores_csv(const BatchScores& scores, std::ostream& out);

}  // namespace evdistill::uncertainty
