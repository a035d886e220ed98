// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exit code is the number of failures. Tolerances are pinned
// next to the checks they guard.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evdistill/cli.hpp"
#include "evdistill/data.hpp"
#include "evdistill/dirichlet.hpp"
#include "evdistill/distill.hpp"
#include "evdistill/errors.hpp"
#include "evdistill/metrics.hpp"
#include "evdistill/nn.hpp"
#include "evdistill/random.hpp"
#include "evdistill/special.hpp"
#include "evdistill/teacher.hpp"
#include "evdistill/uncertainty.hpp"
#include "test_support.hpp"

using namespace evdistill;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CheckFailure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw CheckFailure{what};
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------------
// Default-config pipeline fixture, driven through the CLI in-process.

struct Fixture {
  testsupport::TempDir dir;
  fs::path data, data0, teacher_dir, student_ev, student_sm, eval_dir, ood_dir, bench_dir,
      sweep_dir;
  std::vector<std::vector<std::string>> commands;
  double build_seconds = 0.0;  // make-data through both distills
  bool ok = false;
  std::string error;

  Fixture() {
    data = dir.path() / "data";
    data0 = dir.path() / "data0";
    teacher_dir = dir.path() / "teacher";
    student_ev = dir.path() / "student-evidential";
    student_sm = dir.path() / "student-softmax";
    eval_dir = dir.path() / "eval";
    ood_dir = dir.path() / "ood";
    bench_dir = dir.path() / "bench";
    sweep_dir = dir.path() / "sweep";

    const fs::path null_cfg = dir.path() / "null_shift.json";
    testsupport::write_file(null_cfg, "{\"data\": {\"ood_shift_sigmas\": 0.0}}\n");

    commands = {
        {"make-data", "--seed", "1", "--out", data.string()},
        {"fit-teacher", "--seed", "1", "--data", data.string(), "--out", teacher_dir.string()},
        {"distill", "--seed", "1", "--data", data.string(), "--teacher", teacher_dir.string(),
         "--head", "evidential", "--out", student_ev.string()},
        {"distill", "--seed", "1", "--data", data.string(), "--teacher", teacher_dir.string(),
         "--head", "softmax", "--out", student_sm.string()},
        {"make-data", "--seed", "1", "--config", null_cfg.string(), "--out", data0.string()},
        {"eval", "--seed", "1", "--data", data.string(), "--teacher", teacher_dir.string(),
         "--students", student_ev.string(), "--students", student_sm.string(), "--out",
         eval_dir.string()},
        {"ood", "--seed", "1", "--data", data.string(), "--teacher", teacher_dir.string(),
         "--students", student_ev.string(), "--students", student_sm.string(), "--ood",
         (data / "ood.csv").string(), "--ood", (data0 / "ood.csv").string(), "--out",
         ood_dir.string()},
        {"bench", "--seed", "1", "--data", data.string(), "--teacher", teacher_dir.string(),
         "--students", student_ev.string(), "--students", student_sm.string(), "--out",
         bench_dir.string()},
        {"alpha-sweep", "--seed", "1", "--data", data.string(), "--student",
         student_ev.string(), "--out", sweep_dir.string()},
    };

    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const int rc = cli::run(commands[i]);
      if (rc != 0) {
        error = "fixture command '" + commands[i][0] + "' exited with code " +
                std::to_string(rc);
        return;
      }
      if (i == 3) build_seconds = seconds_since(t0);  // through the second distill
    }
    ok = true;
  }
};

// ---------------------------------------------------------------------
// Criterion 1: analytic gradients through adapters and both heads.

void criterion1(std::string& note) {
  constexpr double kMaxRelErr = 1e-4;
  constexpr double kBudgetSeconds = 30.0;
  const auto t0 = Clock::now();

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RandomEngine rng(9000 + static_cast<std::uint64_t>(trial));
    const int d = 2 + trial % 3;
    const int hdim = 3 + trial % 3;
    const int k = 2 + trial % 2;

    nn::Network net;
    net.add_layer(nn::make_dense(d, hdim, nn::Activation::tanh, rng), true);
    net.add_layer(nn::make_dense(hdim, k, nn::Activation::identity, rng), false);
    net.attach_adapter(0, 2, 1.0, rng);
    net.attach_adapter(1, 1, 1.0, rng);
    // Randomize B so gradients actually flow through both factors.
    for (const auto& [idx, ad] : net.adapters()) {
      nn::LoraAdapter bumped = ad;
      for (Eigen::Index r = 0; r < bumped.B.rows(); ++r) {
        for (Eigen::Index c = 0; c < bumped.B.cols(); ++c) {
          bumped.B(r, c) = uniform(rng, -0.5, 0.5);
        }
      }
      net.set_adapter(idx, std::move(bumped));
    }

    teacher::TeacherPredictionSet set;
    const int members = 1 + trial % 4;
    set.probs.resize(members, k);
    for (int m = 0; m < members; ++m) {
      set.probs.row(m) = random_simplex_point(rng, k).transpose();
    }
    set.weights = random_simplex_point(rng, members);

    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = uniform(rng, -1.5, 1.5);

    for (const distill::HeadKind head :
         {distill::HeadKind::softmax, distill::HeadKind::evidential}) {
      const Eigen::VectorXd z = net.forward_train(x);
      const Eigen::VectorXd dz = distill::loss_grad_at_logits(head, z, set);
      const nn::Gradients g = net.backward(dz);
      const Eigen::VectorXd analytic = testsupport::flatten_trainable(net, g);
      const Eigen::VectorXd fd = testsupport::fd_trainable(net, [&]() {
        return distill::loss_at_logits(head, net.forward(x), set);
      });
      worst = std::max(worst, testsupport::max_rel_err(analytic, fd));
    }
  }
  const double elapsed = seconds_since(t0);
  require(worst < kMaxRelErr, "max relative error " + fmt(worst));
  require(elapsed < kBudgetSeconds, "suite took " + fmt(elapsed) + " s");
  note = "100 seeds, both heads, max rel err " + fmt(worst) + ", " + fmt(elapsed) + " s";
}

// ---------------------------------------------------------------------
// Criterion 2: Dirichlet entropy identity, vanishing epistemic mass,
// density normalization, sampler moments.

void criterion2(std::string& note) {
  constexpr double kIdentityTol = 1e-9;
  constexpr double kEpistemicTol = 1e-5;
  constexpr double kNormTol = 1e-4;
  constexpr double kSamplerTol = 0.01;

  RandomEngine rng(2024);
  double worst_identity = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 4;
    Eigen::VectorXd alpha(k);
    for (int c = 0; c < k; ++c) alpha[c] = uniform(rng, 1.0, 50.0);
    const auto u = dirichlet::entropy_decomposition(dirichlet::DirichletParams(alpha));
    worst_identity =
        std::max(worst_identity, std::abs(u.total - (*u.aleatoric + *u.epistemic)));
  }
  require(worst_identity <= kIdentityTol,
          "entropy identity drift " + fmt(worst_identity));

  for (const int k : {2, 3, 5}) {
    const Eigen::VectorXd mean = random_simplex_point(rng, k);
    const auto u = dirichlet::entropy_decomposition(dirichlet::DirichletParams(1e6 * mean));
    require(*u.epistemic < kEpistemicTol,
            "epistemic " + fmt(*u.epistemic) + " at alpha0 = 1e6");
  }

  // Trapezoid quadrature of the K = 2 density over p0.
  for (const auto& pair : {std::pair<double, double>{2.0, 3.0}, {5.0, 5.0}, {1.0, 1.0}}) {
    const dirichlet::DirichletParams d(testsupport::vec({pair.first, pair.second}));
    const std::size_t n = 100000;
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double p0 = std::min(1.0 - 1e-12, std::max(1e-12, static_cast<double>(i) / n));
      Eigen::VectorXd p(2);
      p[0] = p0;
      p[1] = 1.0 - p0;
      const double f = std::exp(dirichlet::log_density(d, ProbVector(p)));
      if (i > 0) integral += 0.5 * (prev + f) / static_cast<double>(n);
      prev = f;
    }
    require(std::abs(integral - 1.0) <= kNormTol,
            "normalization off by " + fmt(std::abs(integral - 1.0)));
  }

  const dirichlet::DirichletParams d(testsupport::vec({5.0, 1.0, 1.0}));
  const auto draws = dirichlet::sample(d, rng, 100000);
  Eigen::VectorXd empirical = Eigen::VectorXd::Zero(3);
  for (const auto& p : draws) empirical += p.values();
  empirical /= static_cast<double>(draws.size());
  const ProbVector expected = dirichlet::mean(d);
  for (int c = 0; c < 3; ++c) {
    require(std::abs(empirical[c] - expected[c]) <= kSamplerTol,
            "sampler mean off by " + fmt(std::abs(empirical[c] - expected[c])));
  }
  note = "identity drift " + fmt(worst_identity) + ", normalization and sampler in range";
}

// ---------------------------------------------------------------------
// Criterion 3: closed-form ensemble weights against projected gradient
// ascent, symmetry, and dominance.

void criterion3(std::string& note) {
  constexpr double kOracleTol = 1e-6;
  constexpr double kDominanceSlack = 1e-12;

  RandomEngine rng(333);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int members = 2 + trial % 5;
    const int samples = 5 + trial % 16;
    std::vector<Eigen::VectorXd> logits;
    for (int m = 0; m < members; ++m) {
      logits.push_back(testsupport::vec({uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)}));
    }
    const teacher::TeacherEnsemble ens = testsupport::const_ensemble(logits, 2);
    data::Dataset ds;
    ds.name = "oracle";
    ds.num_classes = 2;
    ds.feature_dim = 2;
    for (int i = 0; i < samples; ++i) {
      data::Sample s;
      s.id = "s" + std::to_string(i);
      s.x = Eigen::VectorXd::Zero(2);
      s.y = i % 2;
      ds.samples.push_back(std::move(s));
    }

    const teacher::BayesPeResult fit = teacher::fit_bayespe_weights(ens, ds);
    const Eigen::VectorXd oracle = testsupport::pga_weights(fit.member_loglik);
    worst = std::max(worst, (fit.weights - oracle).cwiseAbs().maxCoeff());

    // The fitted point beats the uniform point and every vertex.
    const double fitted = teacher::bayespe_objective(fit.weights, fit.member_loglik);
    const Eigen::VectorXd uni =
        Eigen::VectorXd::Constant(members, 1.0 / static_cast<double>(members));
    require(fitted >= teacher::bayespe_objective(uni, fit.member_loglik) - kDominanceSlack,
            "uniform weights beat the fit");
    for (int m = 0; m < members; ++m) {
      Eigen::VectorXd onehot = Eigen::VectorXd::Zero(members);
      onehot[m] = 1.0;
      require(fitted >=
                  teacher::bayespe_objective(onehot, fit.member_loglik) - kDominanceSlack,
              "a one-hot beats the fit");
    }
  }
  require(worst <= kOracleTol, "weight gap to the PGA oracle " + fmt(worst));

  // Symmetric members must land exactly on equal weights.
  std::vector<Eigen::VectorXd> same(4, testsupport::vec({0.4, -0.4}));
  const teacher::TeacherEnsemble sym = testsupport::const_ensemble(same, 2);
  data::Dataset ds;
  ds.name = "sym";
  ds.num_classes = 2;
  ds.feature_dim = 2;
  for (int i = 0; i < 6; ++i) {
    data::Sample s;
    s.id = "t" + std::to_string(i);
    s.x = Eigen::VectorXd::Zero(2);
    s.y = i % 2;
    ds.samples.push_back(std::move(s));
  }
  const teacher::BayesPeResult fit = teacher::fit_bayespe_weights(sym, ds);
  for (Eigen::Index i = 1; i < fit.weights.size(); ++i) {
    require(fit.weights[i] == fit.weights[0], "symmetric weights are not exactly equal");
  }
  note = "50 instances, worst component gap " + fmt(worst) + ", symmetry exact";
}

// ---------------------------------------------------------------------
// Criterion 4: AUROC pair counting, Wasserstein axioms, calibration
// closed forms.

void criterion4(std::string& note) {
  RandomEngine rng(444);

  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n_neg = 1 + static_cast<std::size_t>(uniform01(rng) * 199);
    const std::size_t n_pos = 1 + static_cast<std::size_t>(uniform01(rng) * 199);
    const bool grid = trial % 2 == 1;
    std::vector<double> neg(n_neg), pos(n_pos);
    for (auto& v : neg) {
      const double u = uniform01(rng);
      v = grid ? std::floor(u * 8.0) / 8.0 : u;
    }
    for (auto& v : pos) {
      const double u = uniform01(rng);
      v = grid ? std::floor(u * 8.0) / 8.0 : u;
    }
    double wins = 0.0;
    for (const double nv : neg) {
      for (const double pv : pos) {
        if (pv > nv) wins += 1.0;
        else if (pv == nv) wins += 0.5;
      }
    }
    const double brute = wins / (static_cast<double>(n_neg) * static_cast<double>(n_pos));
    require(metrics::auroc(neg, pos) == brute, "auroc differs from pair counting");
  }

  constexpr double kW1Tol = 1e-12;
  for (int trial = 0; trial < 60; ++trial) {
    const auto draw = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& x : v) x = uniform(rng, -2.0, 2.0);
      return v;
    };
    const auto a = draw(1 + static_cast<std::size_t>(uniform01(rng) * 39));
    const auto b = draw(1 + static_cast<std::size_t>(uniform01(rng) * 39));
    const auto c = draw(1 + static_cast<std::size_t>(uniform01(rng) * 39));
    require(metrics::wasserstein1(a, b) == metrics::wasserstein1(b, a),
            "wasserstein symmetry broke");
    require(metrics::wasserstein1(a, c) <=
                metrics::wasserstein1(a, b) + metrics::wasserstein1(b, c) + kW1Tol,
            "wasserstein triangle inequality broke");
  }

  // Hand-computed calibration examples in exact dyadic arithmetic.
  {
    std::vector<ProbVector> probs(5, testsupport::prob({1.0, 0.0}));
    std::vector<int> labels(5, 0);
    require(metrics::ece(probs, labels) == 0.0, "perfect ece is nonzero");
    require(metrics::brier(probs, labels) == 0.0, "perfect brier is nonzero");
  }
  {
    std::vector<ProbVector> probs(10, testsupport::prob({0.75, 0.25}));
    std::vector<int> labels(10, 0);
    for (int i = 6; i < 10; ++i) labels[i] = 1;
    const double expected = std::abs(6.0 / 10.0 - 0.75);
    require(metrics::ece(probs, labels) == expected, "one-bin ece mismatch");
  }
  {
    std::vector<ProbVector> probs;
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) {
      probs.push_back(testsupport::prob({0.25, 0.25, 0.25, 0.25}));
      labels.push_back(i < 2 ? 0 : 1);  // argmax 0: two of four right
    }
    for (int i = 0; i < 6; ++i) {
      probs.push_back(testsupport::prob({0.75, 0.125, 0.125}));
      labels.push_back(i < 3 ? 0 : 1);  // three of six right
    }
    // Mixed class counts are fine: each row is scored on its own argmax.
    const double expected = (4.0 / 10.0) * 0.25 + (6.0 / 10.0) * 0.25;
    require(metrics::ece(probs, labels) == expected, "two-bin ece mismatch");
  }
  require(metrics::brier({testsupport::prob({0.5, 0.5})}, {0}) == 0.25,
          "fifty-fifty brier mismatch");
  require(metrics::brier({testsupport::prob({0.75, 0.25})}, {0}) == 0.0625,
          "0.75 brier mismatch");
  note = "auroc exact on 60 instances, w1 axioms hold, dyadic ece/brier exact";
}

// ---------------------------------------------------------------------
// Criterion 5: both students track the teacher mean on the test split.

void criterion5(const Fixture& fix, std::string& note) {
  constexpr double kTvCutoff = 0.05;
  constexpr double kMinFraction = 0.95;
  constexpr double kAccuracyGap = 0.01 + 1e-12;
  constexpr double kBudgetSeconds = 120.0;

  require(fix.ok, fix.error);
  require(fix.build_seconds < kBudgetSeconds,
          "pipeline took " + fmt(fix.build_seconds) + " s");

  const teacher::TeacherEnsemble ens =
      teacher::load_ensemble(fix.teacher_dir / "teacher.json");
  const distill::StudentModel ev = distill::load_student(fix.student_ev / "student.json");
  const distill::StudentModel sm = distill::load_student(fix.student_sm / "student.json");
  const data::Dataset test = data::load(fix.data / "test.csv", data::FileFormat::csv);
  require(test.size() > 0, "empty test split");

  std::size_t ev_close = 0, sm_close = 0, teacher_hits = 0, ev_hits = 0, sm_hits = 0;
  for (const data::Sample& s : test.samples) {
    const teacher::TeacherPredictionSet set = teacher::predict_members(ens, s.x);
    const ProbVector mean = teacher::predictive_mean(set);
    const ProbVector pe = ev.predict_prob(s.x);
    const ProbVector ps = sm.predict_prob(s.x);
    if (testsupport::tv_distance(pe, mean) <= kTvCutoff) ++ev_close;
    if (testsupport::tv_distance(ps, mean) <= kTvCutoff) ++sm_close;
    if (mean.argmax() == *s.y) ++teacher_hits;
    if (pe.argmax() == *s.y) ++ev_hits;
    if (ps.argmax() == *s.y) ++sm_hits;
  }
  const double n = static_cast<double>(test.size());
  const double frac_ev = static_cast<double>(ev_close) / n;
  const double frac_sm = static_cast<double>(sm_close) / n;
  const double acc_t = static_cast<double>(teacher_hits) / n;
  const double acc_ev = static_cast<double>(ev_hits) / n;
  const double acc_sm = static_cast<double>(sm_hits) / n;

  require(frac_ev >= kMinFraction, "evidential TV fraction " + fmt(frac_ev));
  require(frac_sm >= kMinFraction, "softmax TV fraction " + fmt(frac_sm));
  require(std::abs(acc_ev - acc_t) <= kAccuracyGap,
          "evidential accuracy " + fmt(acc_ev) + " vs teacher " + fmt(acc_t));
  require(std::abs(acc_sm - acc_t) <= kAccuracyGap,
          "softmax accuracy " + fmt(acc_sm) + " vs teacher " + fmt(acc_t));
  note = "TV<=0.05 on " + fmt(100 * frac_ev) + "% / " + fmt(100 * frac_sm) +
         "%, accuracies " + fmt(acc_ev) + "/" + fmt(acc_sm) + " vs teacher " + fmt(acc_t) +
         ", pipeline " + fmt(fix.build_seconds) + " s";
}

// ---------------------------------------------------------------------
// Criterion 6: early stopping restores the best epoch.

void criterion6(const Fixture& fix, std::string& note) {
  constexpr double kNllTol = 1e-12;

  distill::EarlyStopper stopper(0);
  require(!stopper.observe(1, 0.5), "stopped on the first epoch");
  require(!stopper.observe(2, 0.4), "stopped on an improvement");
  require(stopper.observe(3, 0.45), "did not stop on the rise");
  require(stopper.best_epoch() == 2, "best epoch is not 2");
  require(stopper.best_value() == 0.4, "best value is not 0.4");

  // The trained student really carries the weights of the best epoch.
  require(fix.ok, fix.error);
  const distill::StudentModel ev = distill::load_student(fix.student_ev / "student.json");
  const data::Dataset train = data::load(fix.data / "train.csv", data::FileFormat::csv);
  const double returned_nll = distill::student_nll(ev, train);

  std::istringstream trace(testsupport::read_file(fix.student_ev / "trace.csv"));
  std::string line;
  std::getline(trace, line);  // header
  double best = std::numeric_limits<double>::infinity();
  int restored_epoch = -1;
  std::vector<double> nlls;
  while (std::getline(trace, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("restored_epoch=");
      require(pos != std::string::npos, "trace footer is missing restored_epoch");
      restored_epoch = std::stoi(line.substr(pos + 15));
      continue;
    }
    // epoch,mean_loss,train_nll,seconds
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    require(cells.size() == 4, "trace row has the wrong shape");
    nlls.push_back(std::stod(cells[2]));
    best = std::min(best, nlls.back());
  }
  require(restored_epoch >= 1 && restored_epoch <= static_cast<int>(nlls.size()),
          "restored epoch is out of range");
  const double restored = nlls[static_cast<std::size_t>(restored_epoch - 1)];
  require(restored == best, "restored epoch is not the trace minimum");
  require(std::abs(returned_nll - best) <= kNllTol,
          "returned model nll " + fmt(returned_nll) + " vs trace minimum " + fmt(best));
  note = "stop at 3 / restore 2; returned nll matches the trace minimum (" + fmt(best) + ")";
}

// ---------------------------------------------------------------------
// Criterion 7: entropy separates shifted data; a null shift separates
// nothing.

void criterion7(const Fixture& fix, std::string& note) {
  constexpr double kMinGapNats = 0.2;
  constexpr double kMinAuroc = 0.9;
  constexpr double kNullAurocLo = 0.45;
  constexpr double kNullAurocHi = 0.55;
  constexpr double kNullW1 = 0.01;

  require(fix.ok, fix.error);
  const distill::StudentModel ev = distill::load_student(fix.student_ev / "student.json");
  const data::Dataset id_set = data::load(fix.data / "test.csv", data::FileFormat::csv);
  const data::Dataset far = data::load(fix.data / "ood.csv", data::FileFormat::csv);
  const data::Dataset null_set = data::load(fix.data0 / "ood.csv", data::FileFormat::csv);

  const auto id_scores = uncertainty::batch_scores(ev, id_set);
  const auto far_scores = uncertainty::batch_scores(ev, far);
  const auto null_scores = uncertainty::batch_scores(ev, null_set);
  require(id_scores.failures == 0 && far_scores.failures == 0 && null_scores.failures == 0,
          "scoring failures");

  const double gap = far_scores.mean_total() - id_scores.mean_total();
  const double sep = metrics::auroc(id_scores.totals(), far_scores.totals());
  const double null_sep = metrics::auroc(id_scores.totals(), null_scores.totals());
  const double null_w1 = metrics::wasserstein1(id_scores.totals(), null_scores.totals());

  require(gap >= kMinGapNats, "entropy gap " + fmt(gap) + " nats");
  require(sep >= kMinAuroc, "shifted auroc " + fmt(sep));
  require(null_sep >= kNullAurocLo && null_sep <= kNullAurocHi,
          "null auroc " + fmt(null_sep));
  require(null_w1 < kNullW1, "null w1 " + fmt(null_w1));
  note = "gap " + fmt(gap) + " nats, auroc " + fmt(sep) + "; null auroc " + fmt(null_sep) +
         ", null w1 " + fmt(null_w1);
}

// ---------------------------------------------------------------------
// Criterion 8: forward-pass ledger and measured speedup.

void criterion8(const Fixture& fix, std::string& note) {
  constexpr double kSpeedupFloor = 0.7;  // of the member count

  require(fix.ok, fix.error);
  const nlohmann::json bench =
      nlohmann::json::parse(testsupport::read_file(fix.bench_dir / "bench.json"));
  const std::size_t n_samples = bench.at("n_samples").get<std::size_t>();
  const std::size_t n_members = bench.at("n_members").get<std::size_t>();
  require(n_members == 8, "expected the default 8 members");
  require(bench.at("teacher").at("forward_passes").get<std::size_t>() ==
              n_members * n_samples,
          "teacher forward passes are not N * M");

  double worst_speedup = std::numeric_limits<double>::infinity();
  for (const auto& js : bench.at("students")) {
    require(js.at("forward_passes").get<std::size_t>() == n_samples,
            "student forward passes are not M");
    worst_speedup = std::min(worst_speedup, js.at("speedup").get<double>());
  }
  require(bench.at("students").size() == 2, "expected two students in the bench");
  require(worst_speedup >= kSpeedupFloor * static_cast<double>(n_members),
          "speedup " + fmt(worst_speedup) + "x under the floor " +
              fmt(kSpeedupFloor * static_cast<double>(n_members)) + "x");
  note = "counts exact (8000 vs 1000), worst measured speedup " + fmt(worst_speedup) + "x";
}

// ---------------------------------------------------------------------
// Criterion 9: pinning alpha0 changes uncertainty, never predictions.

void criterion9(const Fixture& fix, std::string& note) {
  require(fix.ok, fix.error);
  std::istringstream sweep(testsupport::read_file(fix.sweep_dir / "sweep.csv"));
  std::string line;
  std::getline(sweep, line);
  require(line == "alpha0,accuracy,ece,nll,brier,mean_total,mean_aleatoric,mean_epistemic",
          "unexpected sweep header");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(sweep, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    require(cells.size() == 8, "sweep row has the wrong shape");
    rows.push_back(std::move(cells));
  }
  require(rows.size() == 9, "expected the learned row plus an 8-point grid");
  require(rows[0][0] == "learned", "first sweep row is not the learned one");

  // Accuracy is byte-for-byte constant across every row.
  for (const auto& r : rows) {
    require(r[1] == rows[0][1], "accuracy changed across the sweep");
  }
  // Epistemic mass strictly decreases along the increasing alpha0 grid.
  double prev = std::numeric_limits<double>::infinity();
  double prev_a0 = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double a0 = std::stod(rows[i][0]);
    require(a0 > prev_a0, "sweep grid is not increasing");
    prev_a0 = a0;
    const double epi = std::stod(rows[i][7]);
    require(epi < prev, "epistemic mass did not strictly decrease at alpha0 " + rows[i][0]);
    prev = epi;
  }
  note = "accuracy constant across 9 rows, epistemic strictly decreasing over the grid";
}

// ---------------------------------------------------------------------
// Criterion 10: same seed, same bytes (timing fields aside).

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out[fs::relative(entry.path(), root).string()] =
        testsupport::read_file(entry.path());
  }
  return out;
}

std::string strip_trace_seconds(const std::string& body) {
  std::istringstream in(body);
  std::ostringstream out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!first && !line.empty() && line[0] != '#') {
      const auto pos = line.rfind(',');
      if (pos != std::string::npos) line.erase(pos);
    }
    out << line << '\n';
    first = false;
  }
  return out.str();
}

std::string mask_timing(const std::string& rel, const std::string& body) {
  const fs::path p(rel);
  const std::string name = p.filename().string();
  if (name == "manifest.json") {
    nlohmann::json j = nlohmann::json::parse(body);
    j.erase("wall_clock_seconds");
    return j.dump();
  }
  if (name == "bench.json") {
    nlohmann::json j = nlohmann::json::parse(body);
    j.at("teacher").erase("seconds");
    j.at("teacher").erase("seconds_median");
    for (auto& js : j.at("students")) {
      js.erase("seconds");
      js.erase("seconds_median");
      js.erase("speedup");
    }
    return j.dump();
  }
  if (name == "trace.csv") return strip_trace_seconds(body);
  return body;
}

void criterion10(const Fixture& fix, std::string& note) {
  require(fix.ok, fix.error);
  const auto before = snapshot_tree(fix.dir.path());

  for (const auto& cmd : fix.commands) {
    std::vector<std::string> forced = cmd;
    forced.push_back("--force");
    require(cli::run(forced) == 0, "rerun of '" + cmd[0] + "' failed");
  }
  const auto after = snapshot_tree(fix.dir.path());

  require(before.size() == after.size(), "the rerun changed the set of output files");
  std::size_t compared = 0;
  for (const auto& [rel, body] : before) {
    const auto it = after.find(rel);
    require(it != after.end(), "file disappeared on rerun: " + rel);
    require(mask_timing(rel, body) == mask_timing(rel, it->second),
            "non-timing bytes changed on rerun: " + rel);
    ++compared;
  }
  note = "rerun reproduced " + std::to_string(compared) + " files byte-for-byte" +
         " (timing fields masked)";
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<void(std::string&)>>> criteria;

  criteria.emplace_back("criterion 1: analytic gradients match finite differences",
                        [](std::string& n) { criterion1(n); });
  criteria.emplace_back("criterion 2: dirichlet entropy, density, and sampler",
                        [](std::string& n) { criterion2(n); });
  criteria.emplace_back("criterion 3: closed-form weights match the PGA oracle",
                        [](std::string& n) { criterion3(n); });
  criteria.emplace_back("criterion 4: metric oracles (auroc, w1, ece, brier)",
                        [](std::string& n) { criterion4(n); });

  std::cout << "building the default-config pipeline fixture..." << std::endl;
  Fixture fix;
  if (!fix.ok) std::cout << "fixture failed: " << fix.error << std::endl;

  criteria.emplace_back("criterion 5: students track the teacher mean",
                        [&fix](std::string& n) { criterion5(fix, n); });
  criteria.emplace_back("criterion 6: early stopping restores the best epoch",
                        [&fix](std::string& n) { criterion6(fix, n); });
  criteria.emplace_back("criterion 7: shifted data separates, null shift does not",
                        [&fix](std::string& n) { criterion7(fix, n); });
  criteria.emplace_back("criterion 8: forward-pass counts and measured speedup",
                        [&fix](std::string& n) { criterion8(fix, n); });
  criteria.emplace_back("criterion 9: alpha0 sweep moves uncertainty, not accuracy",
                        [&fix](std::string& n) { criterion9(fix, n); });
  criteria.emplace_back("criterion 10: identical seeds reproduce identical bytes",
                        [&fix](std::string& n) { criterion10(fix, n); });

  int failures = 0;
  for (auto& [name, fn] : criteria) {
    std::string detail;
    try {
      fn(detail);
      std::cout << "[PASS] " << name << " :: " << detail << std::endl;
    } catch (const CheckFailure& f) {
      ++failures;
      std::cout << "[FAIL] " << name << " :: " << f.what << std::endl;
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << name << " :: unexpected error: " << e.what() << std::endl;
    }
  }
  if (failures == 0) {
    std::cout << "all 10 criteria passed" << std::endl;
  } else {
    std::cout << failures << " criteria failed" << std::endl;
  }
  return failures;
}
