#include "evdistill/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "evdistill/errors.hpp"
#include "evdistill/io_util.hpp"
#include "evdistill/logging.hpp"
#include "evdistill/random.hpp"

namespace evdistill::data {

bool Dataset::fully_labeled() const {
  for (const auto& s : samples) {
    if (!s.y.has_value()) return false;
  }
  return true;
}

void Dataset::validate() const {
  if (num_classes < 0 || feature_dim < 0) {
    throw DataError("dataset " + name + ": negative class count or feature dimension");
  }
  std::unordered_set<std::string> seen;
  seen.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.id.empty()) {
      throw DataError("dataset " + name + ": sample " + std::to_string(i) + " has an empty id");
    }
    if (!seen.insert(s.id).second) {
      throw DataError("dataset " + name + ": duplicate sample id '" + s.id + "'");
    }
    if (s.x.size() != feature_dim) {
      throw DataError("dataset " + name + ": sample '" + s.id + "' has " +
                      std::to_string(s.x.size()) + " features, expected " +
                      std::to_string(feature_dim));
    }
    for (Eigen::Index d = 0; d < s.x.size(); ++d) {
      if (!std::isfinite(s.x[d])) {
        throw DataError("dataset " + name + ": sample '" + s.id + "' has a non-finite feature");
      }
    }
    if (s.y.has_value() && (*s.y < 0 || *s.y >= num_classes)) {
      throw DataError("dataset " + name + ": sample '" + s.id + "' label " +
                      std::to_string(*s.y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

FileFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".jsonl") return FileFormat::jsonl;
  throw ConfigError("cannot infer dataset format from extension '" + ext + "'");
}

namespace {

void parse_meta_comment(const std::string& line, Dataset& ds, bool& k_known) {
  std::istringstream in(line.substr(1));
  std::string token;
  while (in >> token) {
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "k") {
      ds.num_classes = static_cast<int>(io::parse_long(value));
      k_known = true;
    } else if (key == "d") {
      ds.feature_dim = static_cast<int>(io::parse_long(value));
    } else if (key == "name") {
      ds.name = value;
    }
  }
}

Dataset load_csv(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  Dataset ds;
  ds.name = path.stem().string();
  bool k_known = false;
  bool header_seen = false;
  int expected_cols = 0;
  int max_label = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      parse_meta_comment(line, ds, k_known);
      continue;
    }
    if (!header_seen) {
      const auto cols = io::split(line, ',');
      if (cols.size() < 3 || cols[0] != "id" || cols[1] != "y") {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected header 'id,y,f0,...'");
      }
      expected_cols = static_cast<int>(cols.size());
      const int d = expected_cols - 2;
      if (ds.feature_dim != 0 && ds.feature_dim != d) {
        throw DataError(path.string() + ": metadata d=" + std::to_string(ds.feature_dim) +
                        " conflicts with header feature count " + std::to_string(d));
      }
      ds.feature_dim = d;
      header_seen = true;
      continue;
    }
    const auto cols = io::split(line, ',');
    if (static_cast<int>(cols.size()) != expected_cols) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_cols) + " columns, got " +
                      std::to_string(cols.size()));
    }
    Sample s;
    s.id = cols[0];
    try {
      if (!cols[1].empty()) {
        s.y = static_cast<int>(io::parse_long(cols[1]));
        max_label = std::max(max_label, *s.y);
      }
      s.x.resize(ds.feature_dim);
      for (int d = 0; d < ds.feature_dim; ++d) {
        s.x[d] = io::parse_double(cols[2 + d]);
      }
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  if (!header_seen) {
    throw DataError(path.string() + ": missing 'id,y,...' header line");
  }
  if (!k_known) ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  const std::string content = io::read_file(path);
  std::istringstream in(content);
  Dataset ds;
  ds.name = path.stem().string();
  bool k_known = false;
  int max_label = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("meta")) {
      const auto& meta = j.at("meta");
      if (meta.contains("k")) {
        ds.num_classes = meta.at("k").get<int>();
        k_known = true;
      }
      if (meta.contains("d")) ds.feature_dim = meta.at("d").get<int>();
      if (meta.contains("name")) ds.name = meta.at("name").get<std::string>();
      continue;
    }
    try {
      Sample s;
      s.id = j.at("id").get<std::string>();
      const auto& x = j.at("x");
      s.x.resize(static_cast<Eigen::Index>(x.size()));
      for (std::size_t d = 0; d < x.size(); ++d) s.x[d] = x[d].get<double>();
      if (j.contains("y") && !j.at("y").is_null()) {
        s.y = j.at("y").get<int>();
        max_label = std::max(max_label, *s.y);
      }
      if (ds.feature_dim == 0 && ds.samples.empty()) {
        ds.feature_dim = static_cast<int>(s.x.size());
      }
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!k_known) ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

}  // namespace

Dataset load(const std::filesystem::path& path, FileFormat format) {
  return format == FileFormat::csv ? load_csv(path) : load_jsonl(path);
}

void save(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
  ds.validate();
  std::ostringstream out;
  if (format == FileFormat::csv) {
    out << "# k=" << ds.num_classes << " d=" << ds.feature_dim << " name=" << ds.name << '\n';
    out << "id,y";
    for (int d = 0; d < ds.feature_dim; ++d) out << ",f" << d;
    out << '\n';
    for (const Sample& s : ds.samples) {
      out << s.id << ',';
      if (s.y.has_value()) out << *s.y;
      for (Eigen::Index d = 0; d < s.x.size(); ++d) out << ',' << io::format_double(s.x[d]);
      out << '\n';
    }
  } else {
    nlohmann::json meta;
    meta["meta"]["k"] = ds.num_classes;
    meta["meta"]["d"] = ds.feature_dim;
    meta["meta"]["name"] = ds.name;
    out << meta.dump() << '\n';
    for (const Sample& s : ds.samples) {
      nlohmann::json j;
      j["id"] = s.id;
      nlohmann::json x = nlohmann::json::array();
      for (Eigen::Index d = 0; d < s.x.size(); ++d) x.push_back(s.x[d]);
      j["x"] = std::move(x);
      if (s.y.has_value()) {
        j["y"] = *s.y;
      } else {
        j["y"] = nullptr;
      }
      out << j.dump() << '\n';
    }
  }
  io::atomic_write_file(path, out.str());
}

Split split(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed) {
  const double f[3] = {fractions.train, fractions.val, fractions.test};
  for (const double fi : f) {
    if (!(fi >= 0.0)) throw ConfigError("split: fractions must be nonnegative");
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ConfigError("split: fractions must sum to 1");
  }
  ds.validate();

  int active = 0;
  for (const double fi : f) {
    if (fi > 0.0) ++active;
  }

  // Group sample indices by label; unlabeled samples form group 0.
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(ds.num_classes) + 1);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& y = ds.samples[i].y;
    groups[y.has_value() ? static_cast<std::size_t>(*y) + 1 : 0].push_back(i);
  }
  bool stratified = true;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    if (!groups[g].empty() && groups[g].size() < static_cast<std::size_t>(active)) {
      stratified = false;
      break;
    }
  }
  if (!stratified) {
    log::warn("split: a class has fewer samples than active splits; falling back to a plain "
              "shuffle split");
    groups.assign(1, {});
    groups[0].resize(ds.samples.size());
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }

  std::vector<std::size_t> part[3];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& idx = groups[g];
    if (idx.empty()) continue;
    RandomEngine rng(derive_seed(seed, 0x5711 + g));
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    const double n = static_cast<double>(idx.size());
    const double b1 = n * f[0];
    const double b2 = n * (f[0] + f[1]);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double pos = static_cast<double>(i);
      if (pos < b1) {
        part[0].push_back(idx[i]);
      } else if (pos < b2) {
        part[1].push_back(idx[i]);
      } else {
        part[2].push_back(idx[i]);
      }
    }
  }

  Split out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  const char* suffix[3] = {"train", "val", "test"};
  for (int p = 0; p < 3; ++p) {
    std::sort(part[p].begin(), part[p].end());
    parts[p]->name = ds.name.empty() ? suffix[p] : ds.name + "-" + suffix[p];
    parts[p]->num_classes = ds.num_classes;
    parts[p]->feature_dim = ds.feature_dim;
    parts[p]->samples.reserve(part[p].size());
    for (const std::size_t i : part[p]) parts[p]->samples.push_back(ds.samples[i]);
  }
  return out;
}

Eigen::MatrixXd default_class_means(int num_classes, int feature_dim, double separation) {
  if (num_classes < 1 || feature_dim < 1) {
    throw ConfigError("default_class_means: needs at least one class and one dimension");
  }
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(num_classes, feature_dim);
  if (num_classes == 1) return means;
  if (num_classes == 2) {
    means.row(0) = Eigen::RowVectorXd::Constant(feature_dim, -separation);
    means.row(1) = Eigen::RowVectorXd::Constant(feature_dim, separation);
    return means;
  }
  if (feature_dim == 1) {
    for (int k = 0; k < num_classes; ++k) {
      means(k, 0) = separation * (2.0 * k - (num_classes - 1));
    }
    return means;
  }
  const double radius = 2.0 * separation;
  for (int k = 0; k < num_classes; ++k) {
    const double theta = 2.0 * 3.14159265358979323846 * k / num_classes;
    means(k, 0) = radius * std::cos(theta);
    means(k, 1) = radius * std::sin(theta);
  }
  return means;
}

Eigen::VectorXd least_aligned_direction(const Eigen::MatrixXd& means) {
  const Eigen::Index k = means.rows();
  const Eigen::Index d = means.cols();
  if (d < 1) throw ShapeError("least_aligned_direction: needs at least one dimension");
  if (k <= 1) {
    return Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  }
  Eigen::MatrixXd diffs(k - 1, d);
  for (Eigen::Index r = 1; r < k; ++r) {
    diffs.row(r - 1) = means.row(r) - means.row(0);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeFullV);
  Eigen::VectorXd u = svd.matrixV().col(d - 1);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(u[i]) > 1e-12) {
      if (u[i] < 0.0) u = -u;
      break;
    }
  }
  return u;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.feature_dim < 1) throw ConfigError("synthetic data: feature_dim must be >= 1");
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw ConfigError("synthetic data: sigma must be positive and finite");
  }
  const bool is_ood = spec.ood.has_value();
  int k = spec.num_classes;
  if (is_ood && spec.ood->num_classes.has_value()) k = *spec.ood->num_classes;
  if (k < 1) throw ConfigError("synthetic data: needs at least one class");

  Eigen::MatrixXd means;
  if (spec.means.size() > 0 && k == spec.num_classes) {
    if (spec.means.rows() != spec.num_classes || spec.means.cols() != spec.feature_dim) {
      throw ConfigError("synthetic data: means must be num_classes x feature_dim");
    }
    means = spec.means;
  } else {
    means = default_class_means(k, spec.feature_dim);
  }
  if (is_ood && spec.ood->shift_sigmas != 0.0) {
    const Eigen::VectorXd u = least_aligned_direction(means);
    means.rowwise() += (spec.ood->shift_sigmas * spec.sigma * u).transpose();
  }

  RandomEngine rng(derive_seed(spec.seed, is_ood ? 1 : 0));
  Dataset ds;
  ds.name = spec.name;
  ds.num_classes = k;
  ds.feature_dim = spec.feature_dim;
  ds.samples.reserve(spec.count);
  char idbuf[16];
  for (std::size_t i = 0; i < spec.count; ++i) {
    Sample s;
    std::snprintf(idbuf, sizeof(idbuf), "-%06zu", i);
    s.id = spec.name + idbuf;
    const int y = static_cast<int>(i % static_cast<std::size_t>(k));
    s.y = y;
    s.x = means.row(y).transpose();
    for (int d = 0; d < spec.feature_dim; ++d) {
      s.x[d] += spec.sigma * normal01(rng);
    }
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace evdistill::data
