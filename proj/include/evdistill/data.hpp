#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace evdistill::data {

struct Sample {
  std::string id;
  Eigen::VectorXd x;
  std::optional<int> y;
};

// Labeled or partially labeled feature set. num_classes stays meaningful
// even when the sample list is empty.
struct Dataset {
  std::string name;
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool fully_labeled() const;
  // Unique ids, consistent dimensions, labels inside [0, num_classes).
  void validate() const;
};

enum class FileFormat { csv, jsonl };
FileFormat format_from_path(const std::filesystem::path& path);

// CSV: optional "# k=<K> d=<d> name=<name>" comment, then "id,y,f0,..,f{d-1}".
// JSONL: optional {"meta":{...}} first record, then {"id":..,"y":..,"x":[..]}.
// Files without metadata infer num_classes as max label + 1.
Dataset load(const std::filesystem::path& path, FileFormat format);
void save(const Dataset& ds, const std::filesystem::path& path, FileFormat format);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Deterministic stratified split; falls back to a plain shuffle split with
// a warning when some class is too small to stratify.
Split split(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed);

// Out-of-distribution variant description. The mean shift is applied along
// the unit direction least aligned with the span of class-mean differences,
// scaled by shift_sigmas * sigma.
struct OodSpec {
  double shift_sigmas = 0.0;
  std::optional<int> num_classes;
};

struct SyntheticSpec {
  int num_classes = 2;
  int feature_dim = 2;
  Eigen::MatrixXd means;  // K x d; empty selects the default placement
  double sigma = 1.0;
  std::size_t count = 2000;
  std::uint64_t seed = 0;
  std::string name = "synthetic";
  std::optional<OodSpec> ood;
};

// Balanced labels (i mod K), isotropic Gaussian features around the class
// mean, stable zero-padded sample ids.
Dataset make_synthetic(const SyntheticSpec& spec);

// Two clusters at -sep*1 and +sep*1; three or more sit on a circle in the
// first two feature dimensions.
Eigen::MatrixXd default_class_means(int num_classes, int feature_dim, double separation = 2.0);

// Unit vector minimizing alignment with the rows of (mean_k - mean_0).
Eigen::VectorXd least_aligned_direction(const Eigen::MatrixXd& means);

}  // namespace evdistill::data
