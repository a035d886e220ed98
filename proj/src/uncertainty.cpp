#include "evdistill/uncertainty.hpp"

#include <algorithm>
#include <functional>
#include <thread>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/special.hpp"

namespace evdistill::uncertainty {

UncertaintyBreakdown score_softmax(const ProbVector& p) {
  UncertaintyBreakdown out;
  out.total = shannon_entropy(p.values());
  return out;
}

UncertaintyBreakdown score_evidential(const dirichlet::DirichletParams& d) {
  return dirichlet::entropy_decomposition(d);
}

UncertaintyBreakdown score_ensemble(const teacher::TeacherPredictionSet& set) {
  return teacher::ensemble_entropy_decomposition(set);
}

std::vector<double> BatchScores::totals() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.ok()) out.push_back(r.scores.total);
  }
  return out;
}

std::vector<double> BatchScores::aleatorics() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.ok() && r.scores.aleatoric.has_value()) out.push_back(*r.scores.aleatoric);
  }
  return out;
}

std::vector<double> BatchScores::epistemics() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.ok() && r.scores.epistemic.has_value()) out.push_back(*r.scores.epistemic);
  }
  return out;
}

double BatchScores::mean_total() const {
  const std::vector<double> t = totals();
  if (t.empty()) throw DataError("batch scores: no successful records");
  double sum = 0.0;
  for (const double v : t) sum += v;
  return sum / static_cast<double>(t.size());
}

namespace {

using ScoreFn = std::function<ScoreRecord(const data::Sample&)>;

BatchScores run_batch(const data::Dataset& ds, int threads, const ScoreFn& fn) {
  if (threads < 1) throw ConfigError("batch scoring: threads must be >= 1");
  ds.validate();
  BatchScores out;
  out.records.resize(ds.size());

  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const data::Sample& s = ds.samples[i];
      ScoreRecord rec;
      rec.sample_id = s.id;
      rec.true_class = s.y;
      try {
        rec = fn(s);
      } catch (const std::exception& e) {
        rec.sample_id = s.id;
        rec.true_class = s.y;
        rec.pred_class = -1;
        rec.error = e.what();
      }
      out.records[i] = std::move(rec);
    }
  };

  const std::size_t n = ds.size();
  const std::size_t n_threads = std::min<std::size_t>(threads, std::max<std::size_t>(n, 1));
  if (n_threads <= 1 || n < 2) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    const std::size_t chunk = (n + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::sort(out.records.begin(), out.records.end(),
            [](const ScoreRecord& a, const ScoreRecord& b) { return a.sample_id < b.sample_id; });
  for (const auto& r : out.records) {
    if (!r.ok()) ++out.failures;
  }
  return out;
}

}  // namespace

BatchScores batch_scores(const distill::StudentModel& student, const data::Dataset& ds,
                         int threads) {
  return run_batch(ds, threads, [&student](const data::Sample& s) {
    ScoreRecord rec;
    rec.sample_id = s.id;
    rec.true_class = s.y;
    if (student.head == distill::HeadKind::evidential) {
      const dirichlet::DirichletParams d = student.predict_dirichlet(s.x);
      rec.scores = score_evidential(d);
      rec.pred_class = dirichlet::mean(d).argmax();
    } else {
      const ProbVector p = student.predict_prob(s.x);
      rec.scores = score_softmax(p);
      rec.pred_class = p.argmax();
    }
    return rec;
  });
}

BatchScores batch_scores(const teacher::TeacherEnsemble& ens, const data::Dataset& ds,
                         int threads) {
  ens.validate();
  return run_batch(ds, threads, [&ens](const data::Sample& s) {
    ScoreRecord rec;
    rec.sample_id = s.id;
    rec.true_class = s.y;
    const teacher::TeacherPredictionSet set = teacher::predict_members(ens, s.x);
    rec.scores = score_ensemble(set);
    rec.pred_class = teacher::predictive_mean(set).argmax();
    return rec;
  });
}

void write_scores_csv(const BatchScores& scores, std::ostream& out) {
  out << "sample_id,pred_class,true_class,total,aleatoric,epistemic,error\n";
  for (const ScoreRecord& r : scores.records) {
    out << r.sample_id << ',';
    if (r.ok()) out << r.pred_class;
    out << ',';
    if (r.true_class.has_value()) out << *r.true_class;
    out << ',';
    if (r.ok()) out << io::format_double(r.scores.total);
    out << ',';
    if (r.ok() && r.scores.aleatoric.has_value()) out << io::format_double(*r.scores.aleatoric);
    out << ',';
    if (r.ok() && r.scores.epistemic.has_value()) out << io::format_double(*r.scores.epistemic);
    out << ',';
    if (!r.ok()) {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << msg;
    }
    out << '\n';
  }
}

}  // namespace evdistill::uncertainty
