#include <chrono>
#include <fstream>
#include <iostream>

#include "cli_internal.hpp"
#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/version.hpp"

namespace evdistill::cli {

nlohmann::json default_config_json() {
  nlohmann::json j;
  j["seed"] = 1;
  j["data"] = {{"kind", "synthetic"},
               {"num_classes", 2},
               {"feature_dim", 2},
               {"sigma", 1.25},
               {"means", nullptr},
               {"n_train", 2000},
               {"n_val", 200},
               {"n_test", 1000},
               {"ood_shift_sigmas", 6.0},
               {"ood_num_classes", nullptr},
               {"file_path", nullptr},
               {"fractions", {0.7, 0.1, 0.2}}};
  j["teacher"] = {{"n_members", 8},
                  {"hidden", {64, 64, 64, 64}},
                  {"activation", "tanh"},
                  {"frozen_hidden", 4},
                  {"epochs", 24},
                  {"batch_size", 32},
                  {"lr", 0.003},
                  {"weight_decay", 0.01},
                  {"transform", "rotation"},
                  {"weights_on", "val"},
                  {"min_member_accuracy", 0.6}};
  j["distill"] = {{"head", "evidential"},
                  {"max_epochs", 60},
                  {"batch_size", 32},
                  {"lr", 0.003},
                  {"lora_rank", 4},
                  {"lora_scale", 1.0},
                  {"patience", 4},
                  {"fixed_alpha0", nullptr},
                  {"train_head_dense", false}};
  j["eval"] = {{"ece_bins", 10}};
  j["ood"] = {{"hist_bins", 30}, {"include_teacher", true}};
  j["bench"] = {{"repeats", 3}};
  j["alpha_sweep"] = {{"grid", {2, 5, 10, 20, 50, 100, 200, 500}}};
  return j;
}

namespace {

void merge_validate(nlohmann::json& base, const nlohmann::json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw ConfigError("config: expected an object at " +
                      (prefix.empty() ? std::string("the top level") : prefix));
  }
  for (const auto& [key, value] : user.items()) {
    if (!base.contains(key)) {
      throw ConfigError("config: unknown key '" + prefix + key + "'");
    }
    nlohmann::json& slot = base[key];
    if (slot.is_object() && value.is_object()) {
      merge_validate(slot, value, prefix + key + ".");
    } else {
      slot = value;
    }
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
  }
}

Config parse_config(nlohmann::json merged) {
  Config cfg;
  cfg.seed = get_as<std::uint64_t>(merged, "seed");

  const auto& jd = merged.at("data");
  cfg.data.kind = get_as<std::string>(jd, "kind");
  if (cfg.data.kind != "synthetic" && cfg.data.kind != "file") {
    throw ConfigError("config: data.kind must be 'synthetic' or 'file'");
  }
  cfg.data.num_classes = get_as<int>(jd, "num_classes");
  cfg.data.feature_dim = get_as<int>(jd, "feature_dim");
  cfg.data.sigma = get_as<double>(jd, "sigma");
  if (!jd.at("means").is_null()) {
    const auto& rows = jd.at("means");
    if (!rows.is_array() || rows.empty()) {
      throw ConfigError("config: data.means must be an array of rows");
    }
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != rows[0].size()) {
        throw ConfigError("config: data.means rows must have equal length");
      }
      for (std::size_t c = 0; c < rows[i].size(); ++c) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c].get<double>();
      }
    }
    cfg.data.means = std::move(m);
  }
  cfg.data.n_train = get_as<std::size_t>(jd, "n_train");
  cfg.data.n_val = get_as<std::size_t>(jd, "n_val");
  cfg.data.n_test = get_as<std::size_t>(jd, "n_test");
  cfg.data.ood_shift_sigmas = get_as<double>(jd, "ood_shift_sigmas");
  if (!jd.at("ood_num_classes").is_null()) {
    cfg.data.ood_num_classes = get_as<int>(jd, "ood_num_classes");
  }
  if (!jd.at("file_path").is_null()) {
    cfg.data.file_path = get_as<std::string>(jd, "file_path");
  }
  const auto& fr = jd.at("fractions");
  if (!fr.is_array() || fr.size() != 3) {
    throw ConfigError("config: data.fractions must be [train, val, test]");
  }
  cfg.data.fractions = {fr[0].get<double>(), fr[1].get<double>(), fr[2].get<double>()};

  const auto& jt = merged.at("teacher");
  cfg.teacher.n_members = get_as<int>(jt, "n_members");
  if (cfg.teacher.n_members < 1) throw ConfigError("config: teacher.n_members must be >= 1");
  cfg.teacher.hidden = get_as<std::vector<int>>(jt, "hidden");
  cfg.teacher.activation = get_as<std::string>(jt, "activation");
  cfg.teacher.frozen_hidden = get_as<int>(jt, "frozen_hidden");
  cfg.teacher.epochs = get_as<int>(jt, "epochs");
  cfg.teacher.batch_size = get_as<int>(jt, "batch_size");
  cfg.teacher.lr = get_as<double>(jt, "lr");
  cfg.teacher.weight_decay = get_as<double>(jt, "weight_decay");
  cfg.teacher.transform = get_as<std::string>(jt, "transform");
  cfg.teacher.weights_on = get_as<std::string>(jt, "weights_on");
  if (cfg.teacher.weights_on != "val" && cfg.teacher.weights_on != "train") {
    throw ConfigError("config: teacher.weights_on must be 'val' or 'train'");
  }
  cfg.teacher.min_member_accuracy = get_as<double>(jt, "min_member_accuracy");

  const auto& js = merged.at("distill");
  cfg.distill.head = distill::head_from_string(get_as<std::string>(js, "head"));
  cfg.distill.max_epochs = get_as<int>(js, "max_epochs");
  cfg.distill.batch_size = get_as<int>(js, "batch_size");
  cfg.distill.lr = get_as<double>(js, "lr");
  cfg.distill.lora_rank = get_as<int>(js, "lora_rank");
  cfg.distill.lora_scale = get_as<double>(js, "lora_scale");
  cfg.distill.patience = get_as<int>(js, "patience");
  if (!js.at("fixed_alpha0").is_null()) {
    cfg.distill.fixed_alpha0 = get_as<double>(js, "fixed_alpha0");
    if (cfg.distill.head != distill::HeadKind::evidential) {
      throw ConfigError("config: distill.fixed_alpha0 requires head 'evidential'");
    }
  }
  cfg.distill.train_head_dense = get_as<bool>(js, "train_head_dense");

  cfg.eval.ece_bins = get_as<int>(merged.at("eval"), "ece_bins");
  cfg.ood.hist_bins = get_as<int>(merged.at("ood"), "hist_bins");
  cfg.ood.include_teacher = get_as<bool>(merged.at("ood"), "include_teacher");
  cfg.bench.repeats = get_as<int>(merged.at("bench"), "repeats");
  if (cfg.bench.repeats < 1) throw ConfigError("config: bench.repeats must be >= 1");
  cfg.sweep.grid = get_as<std::vector<double>>(merged.at("alpha_sweep"), "grid");
  for (const double a : cfg.sweep.grid) {
    if (!(a > 0.0)) throw ConfigError("config: alpha_sweep.grid entries must be positive");
  }

  cfg.distill.seed = cfg.seed;
  cfg.raw = std::move(merged);
  return cfg;
}

}  // namespace

Config resolve_config(const GlobalOptions& g) {
  nlohmann::json merged = default_config_json();
  if (!g.config_path.empty()) {
    if (!std::filesystem::exists(g.config_path)) {
      throw ConfigError("config file not found: " + g.config_path);
    }
    nlohmann::json user;
    try {
      user = nlohmann::json::parse(io::read_file(g.config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + g.config_path + ": " + e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    merge_validate(merged, user, "");
  }
  if (g.seed.has_value()) merged["seed"] = *g.seed;
  if (g.threads < 1) throw ConfigError("--threads must be >= 1");
  return parse_config(std::move(merged));
}

std::string config_hash(const std::string& command, const nlohmann::json& inputs,
                        const Config& cfg) {
  nlohmann::json subject;
  subject["command"] = command;
  subject["inputs"] = inputs;
  subject["config"] = cfg.raw;
  return io::hex64(io::fnv1a(subject.dump()));
}

int run_command(const std::string& command, const GlobalOptions& g, const Config& cfg,
                const nlohmann::json& inputs,
                const std::function<std::vector<std::string>()>& body) {
  const std::string hash = config_hash(command, inputs, cfg);
  if (g.dry_run) {
    nlohmann::json echo;
    echo["command"] = command;
    echo["config"] = cfg.raw;
    echo["config_hash"] = hash;
    echo["inputs"] = inputs;
    echo["out"] = g.out.string();
    std::cout << echo.dump(2) << '\n';
    return 0;
  }
  if (g.out.empty()) throw ConfigError("--out is required");
  std::filesystem::create_directories(g.out);
  const std::filesystem::path manifest_path = g.out / "manifest.json";
  if (!g.force && std::filesystem::exists(manifest_path)) {
    try {
      const nlohmann::json prev = nlohmann::json::parse(io::read_file(manifest_path));
      if (prev.value("command", "") == command && prev.value("config_hash", "") == hash) {
        std::cout << command << ": output is up to date (config hash " << hash
                  << "); use --force to rerun\n";
        return 0;
      }
    } catch (const std::exception&) {
      log::warn("ignoring unreadable manifest at " + manifest_path.string());
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> outputs = body();
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = hash;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["seed"] = cfg.seed;
  manifest["tool_version"] = kVersion;
  manifest["wall_clock_seconds"] = wall;
  io::atomic_write_file(manifest_path, manifest.dump(2) + "\n");
  return 0;
}

data::Dataset load_split(const std::filesystem::path& dir, const std::string& base) {
  const std::filesystem::path csv = dir / (base + ".csv");
  if (std::filesystem::exists(csv)) return data::load(csv, data::FileFormat::csv);
  const std::filesystem::path jsonl = dir / (base + ".jsonl");
  if (std::filesystem::exists(jsonl)) return data::load(jsonl, data::FileFormat::jsonl);
  throw DataError("no '" + base + "' dataset (csv or jsonl) in " + dir.string());
}

}  // namespace evdistill::cli
