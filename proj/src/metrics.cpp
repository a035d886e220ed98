#include "evdistill/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/special.hpp"

namespace evdistill::metrics {

namespace {

void check_pairs(std::size_t n_probs, std::size_t n_labels) {
  if (n_probs != n_labels) {
    throw ShapeError("metrics: " + std::to_string(n_probs) + " predictions vs " +
                     std::to_string(n_labels) + " labels");
  }
  if (n_probs == 0) throw DataError("metrics: no samples");
}

void check_label(int label, Eigen::Index k, std::size_t row) {
  if (label < 0 || label >= k) {
    throw DataError("metrics: label " + std::to_string(label) + " out of range at row " +
                    std::to_string(row));
  }
}

void check_finite_scores(const std::vector<double>& scores, const char* what) {
  for (const double s : scores) {
    if (!std::isfinite(s)) throw NumericError(std::string(what) + ": non-finite score");
  }
}

}  // namespace

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  check_pairs(preds.size(), labels.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<BinStat> reliability_bins(const std::vector<ProbVector>& probs,
                                      const std::vector<int>& labels, int n_bins) {
  if (n_bins < 1) throw ConfigError("reliability bins: n_bins must be >= 1");
  check_pairs(probs.size(), labels.size());

  std::vector<BinStat> bins(static_cast<std::size_t>(n_bins));
  std::vector<double> conf_sum(bins.size(), 0.0);
  std::vector<std::size_t> correct(bins.size(), 0);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    bins[b].lower = static_cast<double>(b) / n_bins;
    bins[b].upper = static_cast<double>(b + 1) / n_bins;
  }
  for (std::size_t m = 0; m < probs.size(); ++m) {
    check_label(labels[m], probs[m].size(), m);
    const int pred = probs[m].argmax();
    const double conf = probs[m][pred];
    int idx = static_cast<int>(std::ceil(conf * n_bins)) - 1;
    idx = std::clamp(idx, 0, n_bins - 1);
    bins[idx].count += 1;
    conf_sum[idx] += conf;
    if (pred == labels[m]) correct[idx] += 1;
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count > 0) {
      bins[b].mean_confidence = conf_sum[b] / static_cast<double>(bins[b].count);
      bins[b].accuracy = static_cast<double>(correct[b]) / static_cast<double>(bins[b].count);
    }
  }
  return bins;
}

double ece(const std::vector<ProbVector>& probs, const std::vector<int>& labels, int n_bins) {
  const std::vector<BinStat> bins = reliability_bins(probs, labels, n_bins);
  const double m = static_cast<double>(probs.size());
  double out = 0.0;
  for (const BinStat& b : bins) {
    if (b.count == 0) continue;
    out += (static_cast<double>(b.count) / m) * std::abs(b.accuracy - b.mean_confidence);
  }
  return out;
}

double brier(const std::vector<ProbVector>& probs, const std::vector<int>& labels) {
  check_pairs(probs.size(), labels.size());
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t m = 0; m < probs.size(); ++m) {
    check_label(labels[m], probs[m].size(), m);
    for (Eigen::Index c = 0; c < probs[m].size(); ++c) {
      const double target = (c == labels[m]) ? 1.0 : 0.0;
      const double diff = probs[m][c] - target;
      total += diff * diff;
      ++terms;
    }
  }
  return total / static_cast<double>(terms);
}

double nll(const std::vector<ProbVector>& probs, const std::vector<int>& labels) {
  check_pairs(probs.size(), labels.size());
  double total = 0.0;
  for (std::size_t m = 0; m < probs.size(); ++m) {
    check_label(labels[m], probs[m].size(), m);
    total -= floored_log(probs[m][labels[m]]);
  }
  return total / static_cast<double>(probs.size());
}

double auroc(const std::vector<double>& negatives, const std::vector<double>& positives) {
  if (negatives.empty() || positives.empty()) {
    throw DataError("auroc: both score sets must be nonempty");
  }
  check_finite_scores(negatives, "auroc");
  check_finite_scores(positives, "auroc");

  std::vector<std::pair<double, int>> all;
  all.reserve(negatives.size() + positives.size());
  for (const double s : negatives) all.emplace_back(s, 0);
  for (const double s : positives) all.emplace_back(s, 1);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(positives.size());
  const double n0 = static_cast<double>(negatives.size());
  const double u = rank_sum_pos - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * n0);
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DataError("wasserstein1: empty sample set");
  check_finite_scores(a, "wasserstein1");
  check_finite_scores(b, "wasserstein1");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  double total = 0.0;
  double q = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < na && j < nb) {
    const double qa = static_cast<double>(i + 1) / static_cast<double>(na);
    const double qb = static_cast<double>(j + 1) / static_cast<double>(nb);
    const double qn = std::min(qa, qb);
    total += (qn - q) * std::abs(a[i] - b[j]);
    if (qa <= qb) ++i;
    if (qb <= qa) ++j;
    q = qn;
  }
  return total;
}

PredictionDump collect_predictions(const Predictor& predict, const data::Dataset& labeled) {
  labeled.validate();
  if (labeled.size() == 0) throw DataError("evaluate: empty dataset");
  if (!labeled.fully_labeled()) throw DataError("evaluate: dataset has unlabeled samples");
  PredictionDump dump;
  dump.ids.reserve(labeled.size());
  for (const data::Sample& s : labeled.samples) {
    try {
      ProbVector p = predict(s.x);
      dump.ids.push_back(s.id);
      dump.probs.push_back(std::move(p));
      dump.labels.push_back(*s.y);
    } catch (const std::exception& e) {
      ++dump.n_failures;
      log::warn("evaluate: sample '" + s.id + "' failed: " + e.what());
    }
  }
  if (dump.probs.empty()) throw DataError("evaluate: every sample failed");
  return dump;
}

EvalReport evaluate(const PredictionDump& dump, int n_bins) {
  EvalReport report;
  report.n_samples = dump.probs.size();
  report.n_failures = dump.n_failures;
  std::vector<int> preds;
  preds.reserve(dump.probs.size());
  for (const ProbVector& p : dump.probs) preds.push_back(p.argmax());
  report.accuracy = accuracy(preds, dump.labels);
  report.bins = reliability_bins(dump.probs, dump.labels, n_bins);
  report.ece = ece(dump.probs, dump.labels, n_bins);
  report.nll = nll(dump.probs, dump.labels);
  report.brier = brier(dump.probs, dump.labels);
  return report;
}

EvalReport evaluate(const Predictor& predict, const data::Dataset& labeled, int n_bins) {
  return evaluate(collect_predictions(predict, labeled), n_bins);
}

void write_prediction_csv(const PredictionDump& dump, std::ostream& out) {
  if (dump.probs.empty()) throw DataError("prediction dump: no rows");
  const Eigen::Index k = dump.probs.front().size();
  out << "id,y";
  for (Eigen::Index c = 0; c < k; ++c) out << ",p" << c;
  out << ",pred\n";
  for (std::size_t m = 0; m < dump.probs.size(); ++m) {
    out << dump.ids[m] << ',' << dump.labels[m];
    for (Eigen::Index c = 0; c < k; ++c) out << ',' << io::format_double(dump.probs[m][c]);
    out << ',' << dump.probs[m].argmax() << '\n';
  }
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["n_samples"] = report.n_samples;
  j["n_failures"] = report.n_failures;
  j["accuracy"] = report.accuracy;
  j["ece"] = report.ece;
  j["nll"] = report.nll;
  j["brier"] = report.brier;
  nlohmann::json bins = nlohmann::json::array();
  for (const BinStat& b : report.bins) {
    nlohmann::json jb;
    jb["lower"] = b.lower;
    jb["upper"] = b.upper;
    jb["count"] = b.count;
    jb["mean_confidence"] = b.mean_confidence;
    jb["accuracy"] = b.accuracy;
    bins.push_back(std::move(jb));
  }
  j["bins"] = std::move(bins);
  return j;
}

}  // namespace evdistill::metrics
