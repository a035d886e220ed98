#include "evdistill/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/special.hpp"
#include "evdistill/version.hpp"

namespace evdistill::distill {

HeadKind head_from_string(std::string_view name) {
  if (name == "softmax") return HeadKind::softmax;
  if (name == "evidential") return HeadKind::evidential;
  throw ConfigError("unknown head kind: '" + std::string(name) + "'");
}

std::string to_string(HeadKind head) {
  switch (head) {
    case HeadKind::softmax: return "softmax";
    case HeadKind::evidential: return "evidential";
  }
  throw ConfigError("unknown head enum value");
}

Eigen::VectorXd StudentModel::logits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_transform.cols()) {
    throw ShapeError("student: input has size " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_transform.cols()));
  }
  return net.forward(input_transform * x);
}

ProbVector StudentModel::predict_prob(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (head == HeadKind::softmax) {
    return ProbVector(softmax(logits(x)));
  }
  return dirichlet::mean(predict_dirichlet(x));
}

dirichlet::DirichletParams StudentModel::predict_dirichlet(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (head != HeadKind::evidential) {
    throw ConfigError("predict_dirichlet: student has a softmax head");
  }
  dirichlet::DirichletParams d = dirichlet::link_from_logits(logits(x));
  if (fixed_alpha0.has_value()) {
    return apply_fixed_alpha0(d, *fixed_alpha0);
  }
  return d;
}

namespace {

void check_set(const teacher::TeacherPredictionSet& set, Eigen::Index k) {
  if (set.probs.rows() < 1) throw ShapeError("distillation target: no member rows");
  if (set.probs.rows() != set.weights.size()) {
    throw ShapeError("distillation target: weights do not match member rows");
  }
  if (set.probs.cols() != k) {
    throw ShapeError("distillation target: class count mismatch");
  }
}

// s_c = sum_i w_i log p_ic with the probability floor.
Eigen::VectorXd weighted_log_prob(const teacher::TeacherPredictionSet& set) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(set.probs.cols());
  for (Eigen::Index i = 0; i < set.probs.rows(); ++i) {
    for (Eigen::Index c = 0; c < set.probs.cols(); ++c) {
      s[c] += set.weights[i] * floored_log(set.probs(i, c));
    }
  }
  return s;
}

}  // namespace

double loss_softmax(const ProbVector& student, const teacher::TeacherPredictionSet& set) {
  check_set(set, student.size());
  const ProbVector target = teacher::predictive_mean(set);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < student.size(); ++c) {
    loss -= target[c] * floored_log(student[c]);
  }
  return loss;
}

double loss_dirichlet(const dirichlet::DirichletParams& d,
                      const teacher::TeacherPredictionSet& set) {
  check_set(set, d.size());
  const Eigen::VectorXd s = weighted_log_prob(set);
  double value = log_gamma(d.alpha0());
  for (Eigen::Index c = 0; c < d.size(); ++c) {
    value -= log_gamma(d.alpha()[c]);
    value += (d.alpha()[c] - 1.0) * s[c];
  }
  return -value;
}

double loss_at_logits(HeadKind head, const Eigen::Ref<const Eigen::VectorXd>& logits,
                      const teacher::TeacherPredictionSet& set) {
  if (head == HeadKind::softmax) {
    return loss_softmax(ProbVector(softmax(logits)), set);
  }
  return loss_dirichlet(dirichlet::link_from_logits(logits), set);
}

Eigen::VectorXd loss_grad_softmax(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                  const teacher::TeacherPredictionSet& set) {
  check_set(set, logits.size());
  return softmax(logits) - teacher::predictive_mean(set).values();
}

Eigen::VectorXd loss_grad_dirichlet(const Eigen::Ref<const Eigen::VectorXd>& logits,
                                    const teacher::TeacherPredictionSet& set) {
  check_set(set, logits.size());
  const dirichlet::DirichletParams d = dirichlet::link_from_logits(logits);
  const Eigen::VectorXd s = weighted_log_prob(set);
  const double psi_a0 = digamma(d.alpha0());
  Eigen::VectorXd g(logits.size());
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    const double dalpha = -(psi_a0 - digamma(d.alpha()[c]) + s[c]);
    g[c] = dalpha * sigmoid(logits[c]);
  }
  return g;
}

Eigen::VectorXd loss_grad_at_logits(HeadKind head,
                                    const Eigen::Ref<const Eigen::VectorXd>& logits,
                                    const teacher::TeacherPredictionSet& set) {
  return head == HeadKind::softmax ? loss_grad_softmax(logits, set)
                                   : loss_grad_dirichlet(logits, set);
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 0) throw ConfigError("early stopping: patience must be >= 0");
}

bool EarlyStopper::observe(int epoch, double value) {
  if (epoch <= 0) throw ConfigError("early stopping: epochs are 1-based");
  if (value < best_value_) {
    best_value_ = value;
    best_epoch_ = epoch;
    rises_ = 0;
    return false;
  }
  if (value > best_value_) {
    ++rises_;
    return rises_ > patience_;
  }
  return false;
}

StudentModel build_student(const teacher::TeacherEnsemble& ens, const DistillConfig& cfg) {
  ens.validate();
  if (cfg.fixed_alpha0.has_value() && cfg.head != HeadKind::evidential) {
    throw ConfigError("fixed_alpha0 requires an evidential head");
  }
  if (cfg.lora_rank < 1) throw ConfigError("lora_rank must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");

  int best = 0;
  for (Eigen::Index i = 1; i < ens.weights.size(); ++i) {
    if (ens.weights[i] > ens.weights[best]) best = static_cast<int>(i);
  }
  const teacher::TeacherMember& source = ens.members[static_cast<std::size_t>(best)];

  StudentModel student;
  student.head = cfg.head;
  student.fixed_alpha0 = cfg.fixed_alpha0;
  student.source_member = best;
  student.config = cfg;
  student.input_transform = source.input_transform;

  // Backbone: every source layer except its head, frozen.
  const std::size_t n_layers = source.net.num_layers();
  if (n_layers < 1) throw ShapeError("source member has no layers");
  for (std::size_t i = 0; i + 1 < n_layers; ++i) {
    student.net.add_layer(source.net.layer(i), true);
  }
  RandomEngine head_rng(derive_seed(cfg.seed, 11));
  const Eigen::Index head_in =
      n_layers >= 2 ? source.net.layer(n_layers - 2).out_dim() : source.net.input_dim();
  student.net.add_layer(
      nn::make_dense(head_in, ens.num_classes, nn::Activation::identity, head_rng),
      !cfg.train_head_dense);

  RandomEngine adapter_rng(derive_seed(cfg.seed, 12));
  for (std::size_t i = 0; i < student.net.num_layers(); ++i) {
    const nn::DenseLayer& L = student.net.layer(i);
    if (std::min(L.in_dim(), L.out_dim()) < 2) {
      log::debug("layer " + std::to_string(i) + " too small for an adapter; skipping");
      continue;
    }
    student.net.attach_adapter(i, cfg.lora_rank, cfg.lora_scale, adapter_rng);
  }
  return student;
}

double student_nll(const StudentModel& student, const data::Dataset& labeled) {
  if (labeled.size() == 0) throw DataError("student nll: empty dataset");
  if (!labeled.fully_labeled()) throw DataError("student nll: dataset has unlabeled samples");
  double total = 0.0;
  for (const data::Sample& s : labeled.samples) {
    const ProbVector p = student.predict_prob(s.x);
    if (*s.y < 0 || *s.y >= p.size()) {
      throw DataError("student nll: label out of range for sample '" + s.id + "'");
    }
    total -= floored_log(p[*s.y]);
  }
  return total / static_cast<double>(labeled.size());
}

std::pair<StudentModel, TrainingTrace> train_student(StudentModel student,
                                                     const teacher::PredictionCache& cache,
                                                     const data::Dataset& train,
                                                     const DistillConfig& cfg) {
  if (train.size() == 0) throw DataError("distillation: empty training set");
  train.validate();
  if (!train.fully_labeled()) {
    throw DataError("distillation: the early-stopping monitor needs labels on every sample");
  }
  if (cache.num_classes != static_cast<int>(student.net.output_dim())) {
    throw ShapeError("distillation: cache class count does not match the student head");
  }
  for (const data::Sample& s : train.samples) {
    if (!cache.contains(s.id)) {
      throw DataError("distillation: prediction cache has no entry for sample id '" + s.id +
                      "'");
    }
  }

  TrainingTrace trace;
  nn::Optimizer opt({.lr = cfg.lr});
  EarlyStopper stopper(cfg.patience);
  RandomEngine shuffle_rng(derive_seed(cfg.seed, 13));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  nn::Checkpoint best = nn::save_checkpoint(student.net, 0, std::numeric_limits<double>::infinity());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform01(shuffle_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      nn::Gradients acc;
      for (std::size_t pos = start; pos < stop; ++pos) {
        const data::Sample& s = train.samples[order[pos]];
        const teacher::TeacherPredictionSet set = cache.set_for(s.id);
        const Eigen::VectorXd z = student.net.forward_train(student.input_transform * s.x);
        const double li = loss_at_logits(cfg.head, z, set);
        if (!std::isfinite(li)) {
          throw NumericError("non-finite distillation loss at epoch " + std::to_string(epoch) +
                             ", sample '" + s.id + "'");
        }
        loss_sum += li;
        nn::accumulate(acc, student.net.backward(loss_grad_at_logits(cfg.head, z, set)));
      }
      nn::scale(acc, 1.0 / static_cast<double>(stop - start));
      opt.step(student.net, acc);
    }
    const double nll = student_nll(student, train);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.epochs.push_back({epoch, loss_sum / static_cast<double>(train.size()), nll, seconds});
    const bool stop = stopper.observe(epoch, nll);
    if (stopper.best_epoch() == epoch) {
      best = nn::save_checkpoint(student.net, epoch, nll);
    }
    trace.stopped_epoch = epoch;
    if (stop) break;
  }
  if (best.epoch == 0) {
    throw NumericError("distillation: no epoch produced a finite monitor value");
  }
  nn::restore_checkpoint(student.net, best);
  trace.restored_epoch = best.epoch;
  log::info("distillation stopped at epoch " + std::to_string(trace.stopped_epoch) +
            ", restored epoch " + std::to_string(trace.restored_epoch));
  return {std::move(student), std::move(trace)};
}

dirichlet::DirichletParams apply_fixed_alpha0(const dirichlet::DirichletParams& d, double a0) {
  if (!(a0 > 0.0) || !std::isfinite(a0)) {
    throw ConfigError("fixed alpha0 must be positive and finite");
  }
  if (a0 <= static_cast<double>(d.size())) {
    log::warn_once("fixed alpha0 " + io::format_double(a0) + " is at or below the class count " +
                   std::to_string(d.size()) + "; concentrations fall below 1");
  }
  return dirichlet::DirichletParams((a0 / d.alpha0()) * d.alpha());
}

void write_trace_csv(const TrainingTrace& trace, std::ostream& out) {
  out << "epoch,mean_loss,train_nll,seconds\n";
  for (const EpochStats& e : trace.epochs) {
    out << e.epoch << ',' << io::format_double(e.mean_loss) << ','
        << io::format_double(e.train_nll) << ',' << io::format_double(e.seconds) << '\n';
  }
  out << "# stopped_epoch=" << trace.stopped_epoch
      << " restored_epoch=" << trace.restored_epoch << '\n';
}

nlohmann::json config_to_json(const DistillConfig& cfg) {
  nlohmann::json j;
  j["head"] = to_string(cfg.head);
  j["max_epochs"] = cfg.max_epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["lora_rank"] = cfg.lora_rank;
  j["lora_scale"] = cfg.lora_scale;
  j["patience"] = cfg.patience;
  if (cfg.fixed_alpha0.has_value()) {
    j["fixed_alpha0"] = *cfg.fixed_alpha0;
  } else {
    j["fixed_alpha0"] = nullptr;
  }
  j["train_head_dense"] = cfg.train_head_dense;
  j["seed"] = cfg.seed;
  return j;
}

DistillConfig config_from_json(const nlohmann::json& j) {
  try {
    DistillConfig cfg;
    cfg.head = head_from_string(j.at("head").get<std::string>());
    cfg.max_epochs = j.at("max_epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.lora_rank = j.at("lora_rank").get<int>();
    cfg.lora_scale = j.at("lora_scale").get<double>();
    cfg.patience = j.at("patience").get<int>();
    if (j.contains("fixed_alpha0") && !j.at("fixed_alpha0").is_null()) {
      cfg.fixed_alpha0 = j.at("fixed_alpha0").get<double>();
    }
    cfg.train_head_dense = j.at("train_head_dense").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("distill config: ") + e.what());
  }
}

nlohmann::json student_to_json(const StudentModel& student) {
  nlohmann::json j;
  j["format_version"] = kBundleFormatVersion;
  j["kind"] = "student-model";
  j["head"] = to_string(student.head);
  if (student.fixed_alpha0.has_value()) {
    j["fixed_alpha0"] = *student.fixed_alpha0;
  } else {
    j["fixed_alpha0"] = nullptr;
  }
  j["source_member"] = student.source_member;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < student.input_transform.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < student.input_transform.cols(); ++c) {
      row.push_back(student.input_transform(i, c));
    }
    rows.push_back(std::move(row));
  }
  j["input_transform"] = std::move(rows);
  j["network"] = nn::network_to_json(student.net);
  j["config"] = config_to_json(student.config);
  return j;
}

StudentModel student_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != "student-model" ||
        j.at("format_version").get<int>() != kBundleFormatVersion) {
      throw DataError("student bundle: missing or unsupported header fields");
    }
    StudentModel s;
    s.head = head_from_string(j.at("head").get<std::string>());
    if (!j.at("fixed_alpha0").is_null()) s.fixed_alpha0 = j.at("fixed_alpha0").get<double>();
    s.source_member = j.at("source_member").get<int>();
    const auto& rows = j.at("input_transform");
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n < 1) throw DataError("student bundle: empty input transform");
    const Eigen::Index m = static_cast<Eigen::Index>(rows[0].size());
    s.input_transform.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != m) {
        throw DataError("student bundle: ragged input transform");
      }
      for (Eigen::Index c = 0; c < m; ++c) s.input_transform(i, c) = rows[i][c].get<double>();
    }
    s.net = nn::network_from_json(j.at("network"));
    s.config = config_from_json(j.at("config"));
    if (s.fixed_alpha0.has_value() && s.head != HeadKind::evidential) {
      throw DataError("student bundle: fixed_alpha0 on a softmax head");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("student bundle: ") + e.what());
  }
}

void save_student(const StudentModel& student, const std::filesystem::path& path) {
  io::atomic_write_file(path, student_to_json(student).dump(2) + "\n");
}

StudentModel load_student(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return student_from_json(j);
}

}  // namespace evdistill::distill
