#include "evdistill/cli.hpp"

#include <cstdint>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "cli_internal.hpp"
#include "evdistill/errors.hpp"
#include "evdistill/version.hpp"

namespace evdistill::cli {

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
  bool force = false;
  bool dry_run = false;
  int threads = 1;
};

void add_common(CLI::App* sub, CommonFlags& c) {
  sub->add_option("--config", c.config_path, "JSON config file");
  c.seed_opt = sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory");
  sub->add_flag("--force", c.force, "rerun even if the manifest matches");
  sub->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");
  sub->add_option("--threads", c.threads, "worker threads for batch scoring")
      ->check(CLI::PositiveNumber);
}

GlobalOptions finalize(const CommonFlags& c) {
  GlobalOptions g;
  g.config_path = c.config_path;
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0) g.seed = c.seed;
  g.out = c.out;
  g.force = c.force;
  g.dry_run = c.dry_run;
  g.threads = c.threads;
  return g;
}

std::vector<std::filesystem::path> to_paths(const std::vector<std::string>& v) {
  std::vector<std::filesystem::path> out;
  out.reserve(v.size());
  for (const std::string& s : v) out.emplace_back(s);
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"distill a weighted prompt ensemble into a single-pass student"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.set_help_all_flag("--help-all", "expanded help for every subcommand");

  int rc = 0;

  auto state = std::make_shared<std::vector<std::unique_ptr<CommonFlags>>>();
  const auto common = [&](CLI::App* sub) -> CommonFlags& {
    state->push_back(std::make_unique<CommonFlags>());
    add_common(sub, *state->back());
    return *state->back();
  };

  {
    CLI::App* sub = app.add_subcommand("make-data", "generate or ingest a dataset");
    CommonFlags& c = common(sub);
    sub->callback([&]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_make_data(resolve_config(g), g);
    });
  }
  {
    CLI::App* sub = app.add_subcommand("fit-teacher", "train the ensemble and fit its weights");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    sub->add_option("--data", *data_dir, "directory with train/val splits")->required();
    sub->callback([&, data_dir]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_fit_teacher(resolve_config(g), g, *data_dir);
    });
  }
  {
    CLI::App* sub = app.add_subcommand("distill", "train a student against the cached teacher");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    auto teacher_dir = std::make_shared<std::string>();
    auto head = std::make_shared<std::string>();
    sub->add_option("--data", *data_dir, "directory with the train split")->required();
    sub->add_option("--teacher", *teacher_dir, "directory with teacher.json and the cache")
        ->required();
    sub->add_option("--head", *head, "override the student head")
        ->check(CLI::IsMember({"softmax", "evidential"}));
    sub->callback([&, data_dir, teacher_dir, head]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_distill(resolve_config(g), g, *data_dir, *teacher_dir, *head);
    });
  }
  {
    CLI::App* sub = app.add_subcommand("eval", "score teacher and students on the test split");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    auto teacher_dir = std::make_shared<std::string>();
    auto students = std::make_shared<std::vector<std::string>>();
    sub->add_option("--data", *data_dir, "directory with the test split")->required();
    sub->add_option("--teacher", *teacher_dir, "directory with teacher.json")->required();
    sub->add_option("--students", *students, "student directories");
    sub->callback([&, data_dir, teacher_dir, students]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_eval(resolve_config(g), g, *data_dir, *teacher_dir, to_paths(*students));
    });
  }
  {
    CLI::App* sub = app.add_subcommand("ood", "uncertainty separation on shifted data");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    auto teacher_dir = std::make_shared<std::string>();
    auto students = std::make_shared<std::vector<std::string>>();
    auto ood_files = std::make_shared<std::vector<std::string>>();
    sub->add_option("--data", *data_dir, "directory with the in-distribution test split")
        ->required();
    sub->add_option("--teacher", *teacher_dir, "directory with teacher.json")->required();
    sub->add_option("--students", *students, "student directories");
    sub->add_option("--ood", *ood_files, "out-of-distribution dataset files")->required();
    sub->callback([&, data_dir, teacher_dir, students, ood_files]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_ood(resolve_config(g), g, *data_dir, *teacher_dir, to_paths(*students),
                   to_paths(*ood_files));
    });
  }
  {
    CLI::App* sub = app.add_subcommand("bench", "time teacher versus student inference");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    auto teacher_dir = std::make_shared<std::string>();
    auto students = std::make_shared<std::vector<std::string>>();
    sub->add_option("--data", *data_dir, "directory with the test split")->required();
    sub->add_option("--teacher", *teacher_dir, "directory with teacher.json")->required();
    sub->add_option("--students", *students, "student directories")->required();
    sub->callback([&, data_dir, teacher_dir, students]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_bench(resolve_config(g), g, *data_dir, *teacher_dir, to_paths(*students));
    });
  }
  {
    CLI::App* sub = app.add_subcommand("alpha-sweep", "sweep the pinned concentration mass");
    CommonFlags& c = common(sub);
    auto data_dir = std::make_shared<std::string>();
    auto student_dir = std::make_shared<std::string>();
    sub->add_option("--data", *data_dir, "directory with the test split")->required();
    sub->add_option("--student", *student_dir, "evidential student directory")->required();
    sub->callback([&, data_dir, student_dir]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_alpha_sweep(resolve_config(g), g, *data_dir, *student_dir);
    });
  }
  {
    CLI::App* sub = app.add_subcommand("simplex-grid", "tabulate a Dirichlet density");
    CommonFlags& c = common(sub);
    auto alpha = std::make_shared<std::vector<double>>();
    auto resolution = std::make_shared<int>(100);
    sub->add_option("--alpha", *alpha, "concentration parameters")
        ->required()
        ->expected(2, 3);
    sub->add_option("--resolution", *resolution, "grid points per edge")
        ->check(CLI::PositiveNumber);
    sub->callback([&, alpha, resolution]() {
      const GlobalOptions g = finalize(c);
      rc = cmd_simplex_grid(resolve_config(g), g, *alpha, *resolution);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return rc;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("evdistill");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace evdistill::cli
