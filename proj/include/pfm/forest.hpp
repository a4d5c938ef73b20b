#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pfm/dataset.hpp"
#include "pfm/features.hpp"

namespace pfm {

// Row-major design matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

Matrix feature_matrix(std::span<const Sample> samples);
std::vector<double> as_row(const FeatureVector& f);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;     // taken when x[feature] < threshold
  int right = -1;
  double value = 0.0;
  std::size_t samples = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Binary tree rooted at nodes[0]; node indices follow creation order.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  double predict(const FeatureVector& f) const;
  std::size_t leaf_count() const;
  std::size_t depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TrainConfig {
  std::size_t trees_per_forest = 5;
  std::size_t max_nodes_per_tree = 100;  // internal nodes plus leaves
  std::size_t max_depth = 10;
  std::size_t min_samples_leaf = 2;
  bool bootstrap = true;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Best-first CART regression tree minimising squared error. Candidate
// thresholds are midpoints between consecutive distinct feature values; equal
// gains prefer the lower feature, then the lower threshold.
Tree fit_tree(const Matrix& x, std::span<const double> y, const TrainConfig& config);

// Same growth policy with Gini impurity; leaf value is the majority class
// (lowest class id on ties).
Tree fit_classification_tree(const Matrix& x, std::span<const int> classes,
                             std::size_t num_classes, const TrainConfig& config);

struct Forest {
  std::vector<Tree> trees;

  double predict(std::span<const double> x) const;
  double predict(const FeatureVector& f) const;
  std::size_t node_count() const;
  friend bool operator==(const Forest&, const Forest&) = default;
};

// Trains config.trees_per_forest trees, each on a bootstrap resample drawn
// with a seed derived from (seed, tree index).
Forest fit_forest(const Matrix& x, std::span<const double> y, const TrainConfig& config,
                  std::uint64_t seed);

// One regression forest per deployment PSC, predicting that PSC's IPC.
struct SuiteModel {
  std::vector<std::size_t> psc_ids;
  std::vector<Forest> forests;
  TrainConfig config;

  std::vector<double> predict(const FeatureVector& f) const;
  // Index of the largest prediction; ties go to the lower index.
  std::size_t best(const FeatureVector& f) const;
  std::size_t node_count() const;

  std::string to_json() const;
  static SuiteModel from_json(const std::string& text);
  friend bool operator==(const SuiteModel&, const SuiteModel&) = default;
};

SuiteModel fit_suite(std::span<const Sample> train, const std::vector<std::size_t>& psc_ids,
                     const TrainConfig& config);

// labels[p] = 1 iff ipc[p] >= (1 - threshold) * max(ipc).
std::vector<int> threshold_labels(std::span<const double> ipc, double threshold = 0.005);
// Index of the largest IPC; ties go to the lower index.
std::size_t argmax_label(std::span<const double> ipc);

// Alternatives to the per-PSC regression suite.
struct ClassifierVariants {
  std::vector<std::size_t> psc_ids;
  Tree single_classifier;                  // features -> best PSC index
  Forest single_regressor;                 // features + one-hot PSC -> IPC
  std::vector<Tree> suite_of_classifiers;  // per PSC: P(within threshold of best)

  std::string to_json() const;
  static ClassifierVariants from_json(const std::string& text);
};

ClassifierVariants fit_classifier_variants(std::span<const Sample> train,
                                           const std::vector<std::size_t>& psc_ids,
                                           const TrainConfig& config,
                                           double label_threshold = 0.005);

std::vector<double> one_hot_row(const FeatureVector& f, std::size_t psc_index,
                                std::size_t num_pscs);

}  // namespace pfm
