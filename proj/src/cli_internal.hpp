#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdistill/data.hpp"
#include "evdistill/distill.hpp"

namespace evdistill::cli {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  bool force = false;
  bool dry_run = false;
  int threads = 1;
};

// Resolved run configuration: built-in defaults, overlaid by the config
// file, overlaid by command-line flags. `raw` keeps the merged document
// for hashing and --dry-run echo.
struct Config {
  nlohmann::json raw;
  std::uint64_t seed = 1;

  struct Data {
    std::string kind = "synthetic";
    int num_classes = 2;
    int feature_dim = 2;
    double sigma = 1.25;
    std::optional<Eigen::MatrixXd> means;
    std::size_t n_train = 2000;
    std::size_t n_val = 200;
    std::size_t n_test = 1000;
    double ood_shift_sigmas = 6.0;
    std::optional<int> ood_num_classes;
    std::string file_path;
    data::SplitFractions fractions;
  } data;

  struct Teacher {
    int n_members = 8;
    std::vector<int> hidden = {64, 64, 64, 64};
    std::string activation = "tanh";
    int frozen_hidden = 4;
    int epochs = 24;
    int batch_size = 32;
    double lr = 3e-3;
    double weight_decay = 0.01;
    std::string transform = "rotation";
    std::string weights_on = "val";
    double min_member_accuracy = 0.6;
  } teacher;

  distill::DistillConfig distill;

  struct Eval {
    int ece_bins = 10;
  } eval;

  struct Ood {
    int hist_bins = 30;
    bool include_teacher = true;
  } ood;

  struct Bench {
    int repeats = 3;
  } bench;

  struct Sweep {
    std::vector<double> grid = {2, 5, 10, 20, 50, 100, 200, 500};
  } sweep;
};

nlohmann::json default_config_json();
Config resolve_config(const GlobalOptions& g);

// FNV-1a over command + inputs + resolved config.
std::string config_hash(const std::string& command, const nlohmann::json& inputs,
                        const Config& cfg);

// Every command funnels through here: dry-run echo, no-op detection via
// the manifest, then the body, then the manifest write.
int run_command(const std::string& command, const GlobalOptions& g, const Config& cfg,
                const nlohmann::json& inputs,
                const std::function<std::vector<std::string>()>& body);

data::Dataset load_split(const std::filesystem::path& dir, const std::string& base);

int cmd_make_data(const Config& cfg, const GlobalOptions& g);
int cmd_fit_teacher(const Config& cfg, const GlobalOptions& g,
                    const std::filesystem::path& data_dir);
int cmd_distill(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
                const std::filesystem::path& teacher_dir, const std::string& head_override);
int cmd_eval(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
             const std::filesystem::path& teacher_dir,
             const std::vector<std::filesystem::path>& student_dirs);
int cmd_ood(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
            const std::filesystem::path& teacher_dir,
            const std::vector<std::filesystem::path>& student_dirs,
            const std::vector<std::filesystem::path>& ood_paths);
int cmd_bench(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
              const std::filesystem::path& teacher_dir,
              const std::vector<std::filesystem::path>& student_dirs);
int cmd_alpha_sweep(const Config& cfg, const GlobalOptions& g,
                    const std::filesystem::path& data_dir,
                    const std::filesystem::path& student_dir);
int cmd_simplex_grid(const Config& cfg, const GlobalOptions& g,
                     const std::vector<double>& alpha, int resolution);

}  // namespace evdistill::cli
