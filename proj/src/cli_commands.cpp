#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "cli_internal.hpp"
#include "evdistill/dirichlet.hpp"
#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/metrics.hpp"
#include "evdistill/special.hpp"
#include "evdistill/teacher.hpp"
#include "evdistill/uncertainty.hpp"

namespace evdistill::cli {

namespace {

data::SyntheticSpec base_synthetic_spec(const Config& cfg) {
  data::SyntheticSpec spec;
  spec.num_classes = cfg.data.num_classes;
  spec.feature_dim = cfg.data.feature_dim;
  spec.sigma = cfg.data.sigma;
  if (cfg.data.means.has_value()) spec.means = *cfg.data.means;
  return spec;
}

std::string sanitize_name(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return s;
}

struct LoadedStudent {
  std::string name;
  distill::StudentModel model;
};

std::vector<LoadedStudent> load_students(const std::vector<std::filesystem::path>& dirs) {
  std::vector<LoadedStudent> out;
  for (const auto& dir : dirs) {
    LoadedStudent ls;
    ls.model = distill::load_student(dir / "student.json");
    ls.name = "student-" + to_string(ls.model.head);
    out.push_back(std::move(ls));
  }
  // Same-head duplicates get an index suffix to keep file names unique.
  for (std::size_t i = 0; i < out.size(); ++i) {
    int clash = 0;
    for (std::size_t j = 0; j < i; ++j) {
      if (out[j].name == out[i].name) ++clash;
    }
    if (clash > 0) out[i].name += "-" + std::to_string(clash + 1);
  }
  return out;
}

nlohmann::json breakdown_stats(const uncertainty::BatchScores& scores) {
  nlohmann::json j;
  const auto mean_of = [](const std::vector<double>& v) -> nlohmann::json {
    if (v.empty()) return nullptr;
    double sum = 0.0;
    for (const double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  j["n"] = scores.records.size() - scores.failures;
  j["failures"] = scores.failures;
  j["mean_total"] = mean_of(scores.totals());
  j["mean_aleatoric"] = mean_of(scores.aleatorics());
  j["mean_epistemic"] = mean_of(scores.epistemics());
  return j;
}

void write_entropy_histogram(const std::filesystem::path& path, const std::vector<double>& id,
                             const std::vector<double>& ood, int n_bins) {
  if (n_bins < 1) throw ConfigError("ood.hist_bins must be >= 1");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const double v : id) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const double v : ood) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi)) throw DataError("entropy histogram: no scores");
  if (hi == lo) hi = lo + 1e-9;
  std::vector<std::size_t> count_id(n_bins, 0);
  std::vector<std::size_t> count_ood(n_bins, 0);
  const auto bin_of = [&](double v) {
    const int b = static_cast<int>((v - lo) / (hi - lo) * n_bins);
    return std::clamp(b, 0, n_bins - 1);
  };
  for (const double v : id) ++count_id[bin_of(v)];
  for (const double v : ood) ++count_ood[bin_of(v)];
  std::ostringstream out;
  out << "lower,upper,count_id,count_ood\n";
  for (int b = 0; b < n_bins; ++b) {
    const double bl = lo + (hi - lo) * b / n_bins;
    const double bu = lo + (hi - lo) * (b + 1) / n_bins;
    out << io::format_double(bl) << ',' << io::format_double(bu) << ',' << count_id[b] << ','
        << count_ood[b] << '\n';
  }
  io::atomic_write_file(path, out.str());
}

}  // namespace

int cmd_make_data(const Config& cfg, const GlobalOptions& g) {
  nlohmann::json inputs;
  inputs["kind"] = cfg.data.kind;
  if (cfg.data.kind == "file") inputs["file"] = cfg.data.file_path;
  return run_command("make-data", g, cfg, inputs, [&]() {
    std::vector<std::string> outputs;
    if (cfg.data.kind == "synthetic") {
      struct Part {
        const char* name;
        std::size_t count;
        std::uint64_t stream;
      };
      const Part parts[3] = {{"train", cfg.data.n_train, 21},
                             {"val", cfg.data.n_val, 22},
                             {"test", cfg.data.n_test, 23}};
      for (const Part& p : parts) {
        data::SyntheticSpec spec = base_synthetic_spec(cfg);
        spec.name = p.name;
        spec.count = p.count;
        spec.seed = derive_seed(cfg.seed, p.stream);
        const data::Dataset ds = data::make_synthetic(spec);
        data::save(ds, g.out / (std::string(p.name) + ".csv"), data::FileFormat::csv);
        outputs.push_back(std::string(p.name) + ".csv");
        std::cout << "wrote " << p.name << ".csv (" << ds.size() << " samples, k="
                  << ds.num_classes << ", d=" << ds.feature_dim << ")\n";
      }
      data::SyntheticSpec spec = base_synthetic_spec(cfg);
      spec.name = "ood";
      spec.count = cfg.data.n_test;
      spec.seed = derive_seed(cfg.seed, 24);
      spec.ood = data::OodSpec{cfg.data.ood_shift_sigmas, cfg.data.ood_num_classes};
      const data::Dataset ood = data::make_synthetic(spec);
      data::save(ood, g.out / "ood.csv", data::FileFormat::csv);
      outputs.push_back("ood.csv");
      std::cout << "wrote ood.csv (" << ood.size() << " samples, shift="
                << io::format_double(cfg.data.ood_shift_sigmas) << " sigma)\n";
    } else {
      if (cfg.data.file_path.empty()) {
        throw ConfigError("data.kind 'file' requires data.file_path");
      }
      const std::filesystem::path src = cfg.data.file_path;
      const data::Dataset full = data::load(src, data::format_from_path(src));
      const data::Split split = data::split(full, cfg.data.fractions, cfg.seed);
      const std::pair<const char*, const data::Dataset*> parts[3] = {
          {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
      for (const auto& [name, ds] : parts) {
        data::Dataset renamed = *ds;
        renamed.name = name;
        data::save(renamed, g.out / (std::string(name) + ".csv"), data::FileFormat::csv);
        outputs.push_back(std::string(name) + ".csv");
        std::cout << "wrote " << name << ".csv (" << renamed.size() << " samples)\n";
      }
      std::cout << "file ingestion produces no ood split; point --ood at a file directly\n";
    }
    return outputs;
  });
}

int cmd_fit_teacher(const Config& cfg, const GlobalOptions& g,
                    const std::filesystem::path& data_dir) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  return run_command("fit-teacher", g, cfg, inputs, [&]() {
    const data::Dataset train = load_split(data_dir, "train");
    const data::Dataset val = load_split(data_dir, "val");
    if (train.num_classes < 2) throw DataError("fit-teacher: training set needs >= 2 classes");
    if (train.num_classes != val.num_classes || train.feature_dim != val.feature_dim) {
      throw DataError("fit-teacher: train and val disagree on classes or feature dim");
    }

    teacher::TeacherEnsemble ens;
    ens.num_classes = train.num_classes;
    ens.feature_dim = train.feature_dim;
    for (int i = 0; i < cfg.teacher.n_members; ++i) {
      teacher::MemberConfig mc;
      mc.hidden = cfg.teacher.hidden;
      mc.activation = nn::activation_from_string(cfg.teacher.activation);
      mc.frozen_hidden = cfg.teacher.frozen_hidden;
      mc.epochs = cfg.teacher.epochs;
      mc.batch_size = cfg.teacher.batch_size;
      mc.lr = cfg.teacher.lr;
      mc.weight_decay = cfg.teacher.weight_decay;
      mc.transform = teacher::transform_from_string(cfg.teacher.transform);
      mc.index = i;
      mc.seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i));
      log::info("training member " + std::to_string(i));
      ens.members.push_back(teacher::train_member(train, mc));
    }

    std::vector<double> val_acc;
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
      const double acc = teacher::member_accuracy(ens.members[i], val);
      val_acc.push_back(acc);
      if (acc < cfg.teacher.min_member_accuracy) {
        log::warn("member " + std::to_string(i) + " validation accuracy " +
                  io::format_double(acc) + " is below the floor " +
                  io::format_double(cfg.teacher.min_member_accuracy));
      }
    }

    ens.weights = Eigen::VectorXd::Constant(cfg.teacher.n_members,
                                            1.0 / cfg.teacher.n_members);
    const data::Dataset& weight_ds = cfg.teacher.weights_on == "val" ? val : train;
    const teacher::BayesPeResult fit = teacher::fit_bayespe_weights(ens, weight_ds);
    ens.weights = fit.weights;
    ens.validate();

    nlohmann::json bundle = teacher::ensemble_to_json(ens);
    nlohmann::json extras = nlohmann::json::array();
    for (const double v : val_acc) extras.push_back(v);
    bundle["member_val_accuracy"] = std::move(extras);
    nlohmann::json loglik = nlohmann::json::array();
    for (Eigen::Index i = 0; i < fit.member_loglik.size(); ++i) {
      loglik.push_back(fit.member_loglik[i]);
    }
    bundle["member_loglik"] = std::move(loglik);
    bundle["weights_fit_on"] = cfg.teacher.weights_on;
    io::atomic_write_file(g.out / "teacher.json", bundle.dump(2) + "\n");

    teacher::cache_predictions(ens, train, g.out / "cache_train.jsonl");

    std::cout << "fitted " << ens.size() << " members; weights:";
    for (Eigen::Index i = 0; i < ens.weights.size(); ++i) {
      std::cout << ' ' << io::format_double(ens.weights[i]);
    }
    std::cout << "\nvalidation accuracy:";
    for (const double a : val_acc) std::cout << ' ' << io::format_double(a);
    std::cout << '\n';
    return std::vector<std::string>{"teacher.json", "cache_train.jsonl"};
  });
}

int cmd_distill(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
                const std::filesystem::path& teacher_dir, const std::string& head_override) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  inputs["teacher"] = teacher_dir.string();
  Config local = cfg;
  if (!head_override.empty()) {
    local.distill.head = distill::head_from_string(head_override);
    if (local.distill.head != distill::HeadKind::evidential) {
      local.distill.fixed_alpha0.reset();
    }
    local.raw["distill"]["head"] = head_override;
  }
  return run_command("distill", g, local, inputs, [&]() {
    const data::Dataset train = load_split(data_dir, "train");
    const teacher::TeacherEnsemble ens = teacher::load_ensemble(teacher_dir / "teacher.json");
    const teacher::PredictionCache cache =
        teacher::load_cache(teacher_dir / "cache_train.jsonl");

    distill::StudentModel student = distill::build_student(ens, local.distill);
    auto [trained, trace] = distill::train_student(std::move(student), cache, train,
                                                   local.distill);
    trained.net = nn::merge_adapters(trained.net);
    distill::save_student(trained, g.out / "student.json");
    std::ostringstream tr;
    distill::write_trace_csv(trace, tr);
    io::atomic_write_file(g.out / "trace.csv", tr.str());

    std::cout << "distilled " << to_string(trained.head) << " student from member "
              << trained.source_member << "; stopped at epoch " << trace.stopped_epoch
              << ", restored epoch " << trace.restored_epoch << " (train nll "
              << io::format_double(trace.epochs[trace.restored_epoch - 1].train_nll) << ")\n";
    return std::vector<std::string>{"student.json", "trace.csv"};
  });
}

int cmd_eval(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
             const std::filesystem::path& teacher_dir,
             const std::vector<std::filesystem::path>& student_dirs) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  inputs["teacher"] = teacher_dir.string();
  nlohmann::json sdirs = nlohmann::json::array();
  for (const auto& d : student_dirs) sdirs.push_back(d.string());
  inputs["students"] = std::move(sdirs);
  return run_command("eval", g, cfg, inputs, [&]() {
    const data::Dataset test = load_split(data_dir, "test");
    const teacher::TeacherEnsemble ens = teacher::load_ensemble(teacher_dir / "teacher.json");
    const std::vector<LoadedStudent> students = load_students(student_dirs);

    struct ModelRow {
      std::string name;
      metrics::Predictor predict;
    };
    std::vector<ModelRow> models;
    models.push_back({"teacher", [&ens](const Eigen::Ref<const Eigen::VectorXd>& x) {
                        return teacher::predictive_mean(teacher::predict_members(ens, x));
                      }});
    for (const LoadedStudent& ls : students) {
      models.push_back({ls.name, [&model = ls.model](const Eigen::Ref<const Eigen::VectorXd>& x) {
                          return model.predict_prob(x);
                        }});
    }
    // Untrained twins rebuilt from each student's recorded config show
    // what distillation itself contributes.
    std::vector<distill::StudentModel> twins;
    twins.reserve(students.size());
    for (const LoadedStudent& ls : students) {
      twins.push_back(distill::build_student(ens, ls.model.config));
    }
    for (std::size_t i = 0; i < twins.size(); ++i) {
      models.push_back({"untrained-" + students[i].name.substr(std::string("student-").size()),
                        [&model = twins[i]](const Eigen::Ref<const Eigen::VectorXd>& x) {
                          return model.predict_prob(x);
                        }});
    }

    std::vector<std::string> outputs;
    nlohmann::json rows = nlohmann::json::array();
    std::cout << "model accuracy ece nll brier failures\n";
    for (const ModelRow& m : models) {
      const metrics::PredictionDump dump = metrics::collect_predictions(m.predict, test);
      metrics::EvalReport report = metrics::evaluate(dump, cfg.eval.ece_bins);
      report.model = m.name;
      rows.push_back(metrics::report_to_json(report));
      const std::string fname = "dump_" + sanitize_name(m.name) + ".csv";
      std::ostringstream dcsv;
      metrics::write_prediction_csv(dump, dcsv);
      io::atomic_write_file(g.out / fname, dcsv.str());
      outputs.push_back(fname);
      std::cout << m.name << ' ' << io::format_double(report.accuracy) << ' '
                << io::format_double(report.ece) << ' ' << io::format_double(report.nll) << ' '
                << io::format_double(report.brier) << ' ' << report.n_failures << '\n';
    }
    nlohmann::json doc;
    doc["dataset"] = test.name;
    doc["n_samples"] = test.size();
    doc["ece_bins"] = cfg.eval.ece_bins;
    doc["models"] = std::move(rows);
    io::atomic_write_file(g.out / "report.json", doc.dump(2) + "\n");
    outputs.push_back("report.json");
    return outputs;
  });
}

int cmd_ood(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
            const std::filesystem::path& teacher_dir,
            const std::vector<std::filesystem::path>& student_dirs,
            const std::vector<std::filesystem::path>& ood_paths) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  inputs["teacher"] = teacher_dir.string();
  nlohmann::json sdirs = nlohmann::json::array();
  for (const auto& d : student_dirs) sdirs.push_back(d.string());
  inputs["students"] = std::move(sdirs);
  nlohmann::json opaths = nlohmann::json::array();
  for (const auto& p : ood_paths) opaths.push_back(p.string());
  inputs["ood"] = std::move(opaths);
  return run_command("ood", g, cfg, inputs, [&]() {
    if (ood_paths.empty()) throw ConfigError("ood: at least one --ood file is required");
    const data::Dataset id_ds = load_split(data_dir, "test");
    std::vector<std::pair<std::string, data::Dataset>> ood_sets;
    for (const auto& p : ood_paths) {
      data::Dataset ds = data::load(p, data::format_from_path(p));
      std::string name = sanitize_name(p.stem().string());
      for (const auto& [existing, unused] : ood_sets) {
        if (existing == name) {
          name += "-" + std::to_string(ood_sets.size());
          break;
        }
      }
      ood_sets.emplace_back(std::move(name), std::move(ds));
    }

    std::optional<teacher::TeacherEnsemble> ens;
    if (cfg.ood.include_teacher) {
      ens = teacher::load_ensemble(teacher_dir / "teacher.json");
    }
    const std::vector<LoadedStudent> students = load_students(student_dirs);

    struct ModelEntry {
      std::string name;
      std::function<uncertainty::BatchScores(const data::Dataset&)> score;
    };
    std::vector<ModelEntry> models;
    if (ens.has_value()) {
      models.push_back({"teacher", [&e = *ens, &g](const data::Dataset& ds) {
                          return uncertainty::batch_scores(e, ds, g.threads);
                        }});
    }
    for (const LoadedStudent& ls : students) {
      models.push_back({ls.name, [&model = ls.model, &g](const data::Dataset& ds) {
                          return uncertainty::batch_scores(model, ds, g.threads);
                        }});
    }
    if (models.empty()) throw ConfigError("ood: no models (teacher disabled, no students)");

    std::vector<std::string> outputs;
    nlohmann::json doc;
    doc["id_dataset"] = id_ds.name;
    nlohmann::json model_rows = nlohmann::json::array();
    for (const ModelEntry& m : models) {
      const uncertainty::BatchScores id_scores = m.score(id_ds);
      const std::string id_file = "scores_" + sanitize_name(m.name) + "_id.csv";
      std::ostringstream sc;
      uncertainty::write_scores_csv(id_scores, sc);
      io::atomic_write_file(g.out / id_file, sc.str());
      outputs.push_back(id_file);

      nlohmann::json row;
      row["model"] = m.name;
      row["id"] = breakdown_stats(id_scores);
      nlohmann::json sets = nlohmann::json::object();
      for (const auto& [set_name, set_ds] : ood_sets) {
        const uncertainty::BatchScores ood_scores = m.score(set_ds);
        const std::string ood_file =
            "scores_" + sanitize_name(m.name) + "_" + set_name + ".csv";
        std::ostringstream oc;
        uncertainty::write_scores_csv(ood_scores, oc);
        io::atomic_write_file(g.out / ood_file, oc.str());
        outputs.push_back(ood_file);

        nlohmann::json set_row = breakdown_stats(ood_scores);
        const auto add_separation = [&](const char* kind, const std::vector<double>& id_v,
                                        const std::vector<double>& ood_v) {
          if (id_v.empty() || ood_v.empty()) return;
          set_row[std::string("auroc_") + kind] = metrics::auroc(id_v, ood_v);
          set_row[std::string("w1_") + kind] = metrics::wasserstein1(id_v, ood_v);
        };
        add_separation("total", id_scores.totals(), ood_scores.totals());
        add_separation("aleatoric", id_scores.aleatorics(), ood_scores.aleatorics());
        add_separation("epistemic", id_scores.epistemics(), ood_scores.epistemics());

        const std::string hist_file =
            "hist_" + sanitize_name(m.name) + "_" + set_name + ".csv";
        write_entropy_histogram(g.out / hist_file, id_scores.totals(), ood_scores.totals(),
                                cfg.ood.hist_bins);
        outputs.push_back(hist_file);

        std::cout << m.name << " vs " << set_name << ": mean total "
                  << io::format_double(id_scores.mean_total()) << " -> "
                  << io::format_double(ood_scores.mean_total());
        if (set_row.contains("auroc_total")) {
          std::cout << ", auroc " << io::format_double(set_row["auroc_total"].get<double>());
        }
        std::cout << '\n';
        sets[set_name] = std::move(set_row);
      }
      row["ood_sets"] = std::move(sets);
      model_rows.push_back(std::move(row));
    }
    doc["models"] = std::move(model_rows);
    io::atomic_write_file(g.out / "ood_report.json", doc.dump(2) + "\n");
    outputs.push_back("ood_report.json");
    return outputs;
  });
}

int cmd_bench(const Config& cfg, const GlobalOptions& g, const std::filesystem::path& data_dir,
              const std::filesystem::path& teacher_dir,
              const std::vector<std::filesystem::path>& student_dirs) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  inputs["teacher"] = teacher_dir.string();
  nlohmann::json sdirs = nlohmann::json::array();
  for (const auto& d : student_dirs) sdirs.push_back(d.string());
  inputs["students"] = std::move(sdirs);
  return run_command("bench", g, cfg, inputs, [&]() {
    const data::Dataset test = load_split(data_dir, "test");
    if (test.size() == 0) throw DataError("bench: empty dataset");
    const teacher::TeacherEnsemble ens = teacher::load_ensemble(teacher_dir / "teacher.json");
    const std::vector<LoadedStudent> students = load_students(student_dirs);
    if (students.empty()) throw ConfigError("bench: at least one --students dir is required");

    const std::size_t m = test.size();
    const std::size_t n = ens.size();
    double checksum = 0.0;

    const auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const std::size_t h = v.size() / 2;
      return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    };

    std::vector<double> teacher_seconds;
    std::size_t teacher_forwards = 0;
    for (int r = 0; r < cfg.bench.repeats; ++r) {
      teacher_forwards = 0;
      const auto t0 = std::chrono::steady_clock::now();
      for (const data::Sample& s : test.samples) {
        const teacher::TeacherPredictionSet set = teacher::predict_members(ens, s.x);
        teacher_forwards += n;
        checksum += teacher::predictive_mean(set)[0];
      }
      teacher_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    if (teacher_forwards != n * m) {
      throw std::logic_error("bench: teacher forward-pass count is off");
    }

    nlohmann::json doc;
    doc["n_samples"] = m;
    doc["n_members"] = n;
    doc["repeats"] = cfg.bench.repeats;
    nlohmann::json jt;
    jt["forward_passes"] = teacher_forwards;
    nlohmann::json ts = nlohmann::json::array();
    for (const double s : teacher_seconds) ts.push_back(s);
    jt["seconds"] = std::move(ts);
    const double t_teacher = median(teacher_seconds);
    jt["seconds_median"] = t_teacher;
    doc["teacher"] = std::move(jt);

    nlohmann::json jstudents = nlohmann::json::array();
    std::cout << "teacher: " << teacher_forwards << " forward passes, median "
              << io::format_double(t_teacher) << " s\n";
    for (const LoadedStudent& ls : students) {
      std::vector<double> seconds;
      std::size_t forwards = 0;
      for (int r = 0; r < cfg.bench.repeats; ++r) {
        forwards = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (const data::Sample& s : test.samples) {
          checksum += ls.model.predict_prob(s.x)[0];
          forwards += 1;
        }
        seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      if (forwards != m) throw std::logic_error("bench: student forward-pass count is off");
      const double t_student = median(seconds);
      nlohmann::json js;
      js["name"] = ls.name;
      js["forward_passes"] = forwards;
      nlohmann::json ss = nlohmann::json::array();
      for (const double s : seconds) ss.push_back(s);
      js["seconds"] = std::move(ss);
      js["seconds_median"] = t_student;
      js["speedup"] = t_student > 0.0 ? t_teacher / t_student : 0.0;
      std::cout << ls.name << ": " << forwards << " forward passes, median "
                << io::format_double(t_student) << " s, speedup "
                << io::format_double(js["speedup"].get<double>()) << "x\n";
      jstudents.push_back(std::move(js));
    }
    doc["students"] = std::move(jstudents);
    doc["checksum"] = checksum;
    io::atomic_write_file(g.out / "bench.json", doc.dump(2) + "\n");
    return std::vector<std::string>{"bench.json"};
  });
}

int cmd_alpha_sweep(const Config& cfg, const GlobalOptions& g,
                    const std::filesystem::path& data_dir,
                    const std::filesystem::path& student_dir) {
  nlohmann::json inputs;
  inputs["data"] = data_dir.string();
  inputs["student"] = student_dir.string();
  return run_command("alpha-sweep", g, cfg, inputs, [&]() {
    const data::Dataset test = load_split(data_dir, "test");
    if (test.size() == 0) throw DataError("alpha-sweep: empty dataset");
    if (!test.fully_labeled()) throw DataError("alpha-sweep: dataset has unlabeled samples");
    const distill::StudentModel student = distill::load_student(student_dir / "student.json");
    if (student.head != distill::HeadKind::evidential) {
      throw ConfigError("alpha-sweep: student must have an evidential head");
    }

    // Learned concentrations, before any fixed-alpha0 pin.
    std::vector<dirichlet::DirichletParams> learned;
    learned.reserve(test.size());
    for (const data::Sample& s : test.samples) {
      learned.push_back(dirichlet::link_from_logits(student.logits(s.x)));
    }

    std::ostringstream values;
    values << "id,alpha0\n";
    for (std::size_t i = 0; i < learned.size(); ++i) {
      values << test.samples[i].id << ',' << io::format_double(learned[i].alpha0()) << '\n';
    }
    io::atomic_write_file(g.out / "alpha0_values.csv", values.str());

    double a_lo = std::numeric_limits<double>::infinity();
    double a_hi = -std::numeric_limits<double>::infinity();
    for (const auto& d : learned) {
      a_lo = std::min(a_lo, d.alpha0());
      a_hi = std::max(a_hi, d.alpha0());
    }
    if (a_hi == a_lo) a_hi = a_lo + 1e-9;
    std::vector<std::size_t> hist(cfg.ood.hist_bins, 0);
    for (const auto& d : learned) {
      const int b = static_cast<int>((d.alpha0() - a_lo) / (a_hi - a_lo) * cfg.ood.hist_bins);
      ++hist[std::clamp(b, 0, cfg.ood.hist_bins - 1)];
    }
    std::ostringstream hcsv;
    hcsv << "lower,upper,count\n";
    for (int b = 0; b < cfg.ood.hist_bins; ++b) {
      hcsv << io::format_double(a_lo + (a_hi - a_lo) * b / cfg.ood.hist_bins) << ','
           << io::format_double(a_lo + (a_hi - a_lo) * (b + 1) / cfg.ood.hist_bins) << ','
           << hist[b] << '\n';
    }
    io::atomic_write_file(g.out / "alpha0_hist.csv", hcsv.str());

    std::ostringstream sweep;
    sweep << "alpha0,accuracy,ece,nll,brier,mean_total,mean_aleatoric,mean_epistemic\n";
    std::cout << "alpha0 accuracy mean_epistemic\n";
    const auto emit_row = [&](const std::string& label, std::optional<double> a0) {
      metrics::PredictionDump dump;
      double sum_total = 0.0;
      double sum_aleatoric = 0.0;
      double sum_epistemic = 0.0;
      for (std::size_t i = 0; i < learned.size(); ++i) {
        dirichlet::DirichletParams d = learned[i];
        if (a0.has_value()) {
          d = distill::apply_fixed_alpha0(d, *a0);
        } else if (student.fixed_alpha0.has_value()) {
          d = distill::apply_fixed_alpha0(d, *student.fixed_alpha0);
        }
        const UncertaintyBreakdown u = dirichlet::entropy_decomposition(d);
        sum_total += u.total;
        sum_aleatoric += *u.aleatoric;
        sum_epistemic += *u.epistemic;
        dump.ids.push_back(test.samples[i].id);
        dump.probs.push_back(dirichlet::mean(d));
        dump.labels.push_back(*test.samples[i].y);
      }
      const metrics::EvalReport rep = metrics::evaluate(dump, cfg.eval.ece_bins);
      const double inv = 1.0 / static_cast<double>(learned.size());
      sweep << label << ',' << io::format_double(rep.accuracy) << ','
            << io::format_double(rep.ece) << ',' << io::format_double(rep.nll) << ','
            << io::format_double(rep.brier) << ',' << io::format_double(sum_total * inv) << ','
            << io::format_double(sum_aleatoric * inv) << ','
            << io::format_double(sum_epistemic * inv) << '\n';
      std::cout << label << ' ' << io::format_double(rep.accuracy) << ' '
                << io::format_double(sum_epistemic * inv) << '\n';
    };
    emit_row("learned", std::nullopt);
    for (const double a0 : cfg.sweep.grid) {
      emit_row(io::format_double(a0), a0);
    }
    io::atomic_write_file(g.out / "sweep.csv", sweep.str());
    return std::vector<std::string>{"sweep.csv", "alpha0_values.csv", "alpha0_hist.csv"};
  });
}

int cmd_simplex_grid(const Config& cfg, const GlobalOptions& g, const std::vector<double>& alpha,
                     int resolution) {
  nlohmann::json inputs;
  nlohmann::json ja = nlohmann::json::array();
  for (const double a : alpha) ja.push_back(a);
  inputs["alpha"] = std::move(ja);
  inputs["resolution"] = resolution;
  return run_command("simplex-grid", g, cfg, inputs, [&]() {
    Eigen::VectorXd av(static_cast<Eigen::Index>(alpha.size()));
    for (std::size_t i = 0; i < alpha.size(); ++i) av[static_cast<Eigen::Index>(i)] = alpha[i];
    const dirichlet::DirichletParams d(av);
    std::ostringstream out;
    dirichlet::write_simplex_grid_csv(d, resolution, out);
    io::atomic_write_file(g.out / "simplex_grid.csv", out.str());
    std::cout << "wrote simplex_grid.csv (resolution " << resolution << ")\n";
    return std::vector<std::string>{"simplex_grid.csv"};
  });
}

}  // namespace evdistill::cli
