#include "evdistill/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/special.hpp"
#include "evdistill/version.hpp"

namespace evdistill::teacher {

TransformKind transform_from_string(std::string_view name) {
  if (name == "identity") return TransformKind::identity;
  if (name == "rotation") return TransformKind::rotation;
  if (name == "dropout") return TransformKind::dropout;
  throw ConfigError("unknown input transform: '" + std::string(name) + "'");
}

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::rotation: return "rotation";
    case TransformKind::dropout: return "dropout";
  }
  throw ConfigError("unknown transform enum value");
}

ProbVector TeacherMember::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_transform.cols()) {
    throw ShapeError("member prediction: input has size " + std::to_string(x.size()) +
                     ", expected " + std::to_string(input_transform.cols()));
  }
  const Eigen::VectorXd z = net.forward(input_transform * x);
  return ProbVector(softmax(z));
}

void TeacherEnsemble::validate() const {
  if (members.empty()) throw DataError("ensemble has no members");
  if (weights.size() != static_cast<Eigen::Index>(members.size())) {
    throw ShapeError("ensemble weights count does not match member count");
  }
  ProbVector(weights);  // simplex check
  for (std::size_t i = 0; i < members.size(); ++i) {
    const TeacherMember& m = members[i];
    if (m.input_transform.rows() != feature_dim || m.input_transform.cols() != feature_dim) {
      throw ShapeError("member " + std::to_string(i) + ": transform is not " +
                       std::to_string(feature_dim) + "x" + std::to_string(feature_dim));
    }
    if (m.net.input_dim() != feature_dim || m.net.output_dim() != num_classes) {
      throw ShapeError("member " + std::to_string(i) + ": network dimensions do not match " +
                       "the ensemble");
    }
  }
}

TeacherPredictionSet predict_members(const TeacherEnsemble& ens,
                                     const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (ens.members.empty()) throw DataError("ensemble has no members");
  TeacherPredictionSet set;
  set.probs.resize(static_cast<Eigen::Index>(ens.members.size()), ens.num_classes);
  set.weights = ens.weights;
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    try {
      set.probs.row(static_cast<Eigen::Index>(i)) = ens.members[i].predict(x).values();
    } catch (const std::exception& e) {
      throw ShapeError("member " + std::to_string(i) + ": " + e.what());
    }
  }
  return set;
}

ProbVector predictive_mean(const TeacherPredictionSet& set) {
  if (set.probs.rows() != set.weights.size()) {
    throw ShapeError("prediction set: weights do not match member rows");
  }
  return ProbVector(set.probs.transpose() * set.weights);
}

UncertaintyBreakdown ensemble_entropy_decomposition(const TeacherPredictionSet& set) {
  const ProbVector mean = predictive_mean(set);
  double aleatoric = 0.0;
  for (Eigen::Index i = 0; i < set.probs.rows(); ++i) {
    aleatoric += set.weights[i] * shannon_entropy(set.probs.row(i).transpose());
  }
  UncertaintyBreakdown out;
  out.total = shannon_entropy(mean.values());
  out.aleatoric = aleatoric;
  out.epistemic = out.total - aleatoric;
  return out;
}

Eigen::VectorXd member_log_likelihoods(const TeacherEnsemble& ens,
                                       const data::Dataset& labeled) {
  if (labeled.size() == 0) throw DataError("weight fit: empty dataset");
  if (!labeled.fully_labeled()) throw DataError("weight fit: dataset has unlabeled samples");
  labeled.validate();
  Eigen::VectorXd loglik = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ens.size()));
  for (const data::Sample& s : labeled.samples) {
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const ProbVector p = ens.members[i].predict(s.x);
      loglik[static_cast<Eigen::Index>(i)] += floored_log(p[*s.y]);
    }
  }
  return loglik;
}

double bayespe_objective(const Eigen::Ref<const Eigen::VectorXd>& weights,
                         const Eigen::Ref<const Eigen::VectorXd>& member_loglik) {
  if (weights.size() != member_loglik.size()) {
    throw ShapeError("objective: weights and log likelihoods differ in length");
  }
  double value = weights.dot(member_loglik);
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) value -= weights[i] * std::log(weights[i]);
  }
  return value;
}

BayesPeResult fit_bayespe_weights(const TeacherEnsemble& ens, const data::Dataset& labeled) {
  BayesPeResult out;
  out.member_loglik = member_log_likelihoods(ens, labeled);
  out.weights = softmax(out.member_loglik);
  out.objective = bayespe_objective(out.weights, out.member_loglik);

  // The closed form is the stationary point of a strictly concave
  // objective; random simplex points must not beat it.
  RandomEngine rng(0x5eedba1e5ULL);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::VectorXd w = random_simplex_point(rng, static_cast<int>(ens.size()));
    if (bayespe_objective(w, out.member_loglik) > out.objective + 1e-12) {
      throw std::logic_error("weight fit: a random simplex point beat the closed form");
    }
  }
  return out;
}

TeacherMember train_member(const data::Dataset& train, const MemberConfig& cfg) {
  if (train.size() == 0) throw DataError("member training: empty dataset");
  if (!train.fully_labeled()) throw DataError("member training: dataset has unlabeled samples");
  if (train.num_classes < 2) throw DataError("member training: needs at least two classes");
  if (cfg.epochs < 1) throw ConfigError("member training: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("member training: batch_size must be >= 1");
  if (cfg.weight_decay < 0.0) throw ConfigError("member training: weight_decay must be >= 0");
  train.validate();

  const int d = train.feature_dim;
  const int k = train.num_classes;

  RandomEngine init_rng(derive_seed(cfg.seed, 1));
  TeacherMember member;
  std::string transform_desc = to_string(cfg.transform);
  switch (cfg.transform) {
    case TransformKind::identity:
      member.input_transform = Eigen::MatrixXd::Identity(d, d);
      break;
    case TransformKind::rotation:
      member.input_transform = random_orthogonal(init_rng, d);
      break;
    case TransformKind::dropout: {
      if (d < 2) throw ConfigError("dropout transform needs at least 2 features");
      const int dropped = ((cfg.index % d) + d) % d;
      member.input_transform = Eigen::MatrixXd::Identity(d, d);
      member.input_transform(dropped, dropped) = 0.0;
      transform_desc += "(drop=" + std::to_string(dropped) + ")";
      break;
    }
  }
  member.meta = "seed=" + std::to_string(cfg.seed) + ";transform=" + transform_desc;

  if (cfg.frozen_hidden < 0 || cfg.frozen_hidden > static_cast<int>(cfg.hidden.size())) {
    throw ConfigError("member training: frozen_hidden must be in [0, hidden layers]");
  }
  Eigen::Index prev = d;
  for (std::size_t li = 0; li < cfg.hidden.size(); ++li) {
    const int h = cfg.hidden[li];
    if (h < 1) throw ConfigError("member training: hidden sizes must be >= 1");
    member.net.add_layer(nn::make_dense(prev, h, cfg.activation, init_rng),
                         li < static_cast<std::size_t>(cfg.frozen_hidden));
    prev = h;
  }
  member.net.add_layer(nn::make_dense(prev, k, nn::Activation::identity, init_rng), false);

  std::vector<Eigen::VectorXd> transformed;
  transformed.reserve(train.size());
  for (const data::Sample& s : train.samples) {
    transformed.push_back(member.input_transform * s.x);
  }

  nn::Optimizer opt({.lr = cfg.lr});
  RandomEngine shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform01(shuffle_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      nn::Gradients acc;
      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        const Eigen::VectorXd z = member.net.forward_train(transformed[idx]);
        Eigen::VectorXd gz = softmax(z);
        gz[*train.samples[idx].y] -= 1.0;
        nn::accumulate(acc, member.net.backward(gz));
      }
      nn::scale(acc, 1.0 / static_cast<double>(stop - start));
      if (cfg.weight_decay > 0.0) {
        for (auto& [li, g] : acc.layers) {
          g.dW += cfg.weight_decay * member.net.layer(li).W;
        }
      }
      opt.step(member.net, acc);
    }
  }

  // Fold the view into the first layer: a student fine-tuned from this
  // backbone then sees the raw input, and its first-layer adapter can
  // reach coordinates the view discarded.
  if (cfg.transform != TransformKind::identity) {
    const Eigen::MatrixXd folded = member.net.layer(0).W * member.input_transform;
    member.net.mutable_layer(0).W = folded;
    member.input_transform = Eigen::MatrixXd::Identity(d, d);
  }
  return member;
}

double member_accuracy(const TeacherMember& member, const data::Dataset& labeled) {
  if (labeled.size() == 0) throw DataError("member accuracy: empty dataset");
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const data::Sample& s : labeled.samples) {
    if (!s.y.has_value()) continue;
    ++total;
    if (member.predict(s.x).argmax() == *s.y) ++correct;
  }
  if (total == 0) throw DataError("member accuracy: dataset has no labels");
  return static_cast<double>(correct) / static_cast<double>(total);
}

TeacherPredictionSet PredictionCache::set_for(const std::string& id) const {
  const auto it = rows.find(id);
  if (it == rows.end()) {
    throw DataError("prediction cache: no entry for sample id '" + id + "'");
  }
  TeacherPredictionSet set;
  set.probs = it->second;
  set.weights = weights;
  return set;
}

void cache_predictions(const TeacherEnsemble& ens, const data::Dataset& ds,
                       const std::filesystem::path& path) {
  ens.validate();
  ds.validate();
  std::ostringstream out;
  nlohmann::json header;
  header["format_version"] = kBundleFormatVersion;
  header["kind"] = "prediction-cache";
  header["n_members"] = ens.size();
  header["num_classes"] = ens.num_classes;
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index i = 0; i < ens.weights.size(); ++i) weights.push_back(ens.weights[i]);
  header["weights"] = std::move(weights);
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& m : ens.members) meta.push_back(m.meta);
  header["member_meta"] = std::move(meta);
  out << header.dump() << '\n';

  for (const data::Sample& s : ds.samples) {
    const TeacherPredictionSet set = predict_members(ens, s.x);
    nlohmann::json rec;
    rec["id"] = s.id;
    nlohmann::json probs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < set.probs.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < set.probs.cols(); ++c) row.push_back(set.probs(i, c));
      probs.push_back(std::move(row));
    }
    rec["probs"] = std::move(probs);
    out << rec.dump() << '\n';
  }
  io::atomic_write_file(path, out.str());
}

PredictionCache load_cache(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  PredictionCache cache;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!header_seen) {
      if (!j.contains("kind") || j.at("kind").get<std::string>() != "prediction-cache" ||
          j.at("format_version").get<int>() != kBundleFormatVersion) {
        throw DataError(path.string() + ": missing or unsupported cache header");
      }
      cache.num_members = j.at("n_members").get<int>();
      cache.num_classes = j.at("num_classes").get<int>();
      const auto& w = j.at("weights");
      if (static_cast<int>(w.size()) != cache.num_members) {
        throw DataError(path.string() + ": header weights do not match member count");
      }
      cache.weights.resize(cache.num_members);
      for (int i = 0; i < cache.num_members; ++i) cache.weights[i] = w[i].get<double>();
      ProbVector(cache.weights);  // simplex check
      for (const auto& m : j.at("member_meta")) {
        cache.member_meta.push_back(m.get<std::string>());
      }
      header_seen = true;
      continue;
    }
    try {
      const std::string id = j.at("id").get<std::string>();
      const auto& probs = j.at("probs");
      if (static_cast<int>(probs.size()) != cache.num_members) {
        throw DataError("row has " + std::to_string(probs.size()) + " members, expected " +
                        std::to_string(cache.num_members));
      }
      Eigen::MatrixXd rows(cache.num_members, cache.num_classes);
      for (int i = 0; i < cache.num_members; ++i) {
        const auto& row = probs[i];
        if (static_cast<int>(row.size()) != cache.num_classes) {
          throw DataError("row has " + std::to_string(row.size()) + " classes, expected " +
                          std::to_string(cache.num_classes));
        }
        for (int c = 0; c < cache.num_classes; ++c) rows(i, c) = row[c].get<double>();
        ProbVector(rows.row(i).transpose());  // distribution check
      }
      if (!cache.rows.emplace(id, std::move(rows)).second) {
        throw DataError("duplicate sample id '" + id + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw DataError(path.string() + ": empty prediction cache");
  return cache;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw DataError("matrix json: expected a nonempty array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) {
      throw DataError("matrix json: ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json ensemble_to_json(const TeacherEnsemble& ens) {
  ens.validate();
  nlohmann::json j;
  j["format_version"] = kBundleFormatVersion;
  j["kind"] = "teacher-ensemble";
  j["num_classes"] = ens.num_classes;
  j["feature_dim"] = ens.feature_dim;
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index i = 0; i < ens.weights.size(); ++i) weights.push_back(ens.weights[i]);
  j["weights"] = std::move(weights);
  nlohmann::json members = nlohmann::json::array();
  for (const TeacherMember& m : ens.members) {
    nlohmann::json jm;
    jm["meta"] = m.meta;
    jm["input_transform"] = matrix_to_json(m.input_transform);
    jm["network"] = nn::network_to_json(m.net);
    members.push_back(std::move(jm));
  }
  j["members"] = std::move(members);
  return j;
}

TeacherEnsemble ensemble_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != "teacher-ensemble" ||
        j.at("format_version").get<int>() != kBundleFormatVersion) {
      throw DataError("teacher bundle: missing or unsupported header fields");
    }
    TeacherEnsemble ens;
    ens.num_classes = j.at("num_classes").get<int>();
    ens.feature_dim = j.at("feature_dim").get<int>();
    const auto& w = j.at("weights");
    ens.weights.resize(static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) {
      ens.weights[static_cast<Eigen::Index>(i)] = w[i].get<double>();
    }
    for (const auto& jm : j.at("members")) {
      TeacherMember m;
      m.meta = jm.at("meta").get<std::string>();
      m.input_transform = matrix_from_json(jm.at("input_transform"));
      m.net = nn::network_from_json(jm.at("network"));
      ens.members.push_back(std::move(m));
    }
    ens.validate();
    return ens;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("teacher bundle: ") + e.what());
  }
}

void save_ensemble(const TeacherEnsemble& ens, const std::filesystem::path& path) {
  io::atomic_write_file(path, ensemble_to_json(ens).dump(2) + "\n");
}

TeacherEnsemble load_ensemble(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ensemble_from_json(j);
}

}  // namespace evdistill::teacher
