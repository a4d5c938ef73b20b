#include "pfm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "pfm/error.hpp"
#include "pfm/rng.hpp"

namespace pfm {

Matrix feature_matrix(std::span<const Sample> samples) {
  Matrix m{samples.size(), kNumFeatures, {}};
  m.data.reserve(samples.size() * kNumFeatures);
  for (const auto& s : samples) {
    for (auto v : s.features.values) m.data.push_back(v);
  }
  return m;
}

std::vector<double> as_row(const FeatureVector& f) {
  return std::vector<double>(f.values.begin(), f.values.end());
}

double Tree::predict(std::span<const double> x) const {
  if (nodes.empty()) throw Error("predict on an empty tree");
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                       : n.right);
  }
  return nodes[i].value;
}

double Tree::predict(const FeatureVector& f) const {
  std::array<double, kNumFeatures> row{};
  std::copy(f.values.begin(), f.values.end(), row.begin());
  return predict(std::span<const double>(row));
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  // Children are always created after their parent.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) {
      deepest = std::max(deepest, d[i]);
      continue;
    }
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
  }
  return deepest;
}

void TrainConfig::validate() const {
  if (trees_per_forest == 0) throw Error("trees_per_forest must be positive");
  if (max_nodes_per_tree == 0) throw Error("max_nodes_per_tree must be positive");
  if (min_samples_leaf == 0) throw Error("min_samples_leaf must be positive");
}

namespace {

struct Split {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Grows one tree best-first. In classification mode y holds class ids.
class Grower {
 public:
  Grower(const Matrix& x, std::span<const double> y, std::size_t num_classes,
         const TrainConfig& config)
      : x_(x), y_(y), classes_(num_classes), config_(config) {}

  Tree grow(std::vector<std::size_t> idx) {
    if (idx.empty()) throw Error("cannot fit a tree on zero samples");
    Tree tree;
    tree.nodes.push_back(make_leaf(idx));
    std::vector<Open> open;
    open.push_back({0, 0, std::move(idx), {}});
    evaluate(open.back());

    while (!open.empty() && tree.nodes.size() + 2 <= config_.max_nodes_per_tree) {
      // Largest gain first; earlier-created nodes win ties.
      auto best = open.end();
      for (auto it = open.begin(); it != open.end(); ++it) {
        if (!it->split.valid) continue;
        if (best == open.end() || it->split.gain > best->split.gain ||
            (it->split.gain == best->split.gain && it->node < best->node)) {
          best = it;
        }
      }
      if (best == open.end()) break;
      Open cur = std::move(*best);
      open.erase(best);

      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      for (auto i : cur.idx) {
        (x_.at(i, static_cast<std::size_t>(cur.split.feature)) < cur.split.threshold ? left
                                                                                     : right)
            .push_back(i);
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_leaf(left));
      tree.nodes.push_back(make_leaf(right));
      auto& parent = tree.nodes[static_cast<std::size_t>(cur.node)];
      parent.feature = cur.split.feature;
      parent.threshold = cur.split.threshold;
      parent.left = l;
      parent.right = l + 1;

      open.push_back({l, cur.depth + 1, std::move(left), {}});
      evaluate(open.back());
      open.push_back({l + 1, cur.depth + 1, std::move(right), {}});
      evaluate(open.back());
    }
    return tree;
  }

 private:
  struct Open {
    int node;
    std::size_t depth;
    std::vector<std::size_t> idx;
    Split split;
  };

  bool classify() const { return classes_ > 0; }

  TreeNode make_leaf(const std::vector<std::size_t>& idx) const {
    TreeNode n;
    n.samples = idx.size();
    if (classify()) {
      std::vector<std::size_t> count(classes_, 0);
      for (auto i : idx) ++count[static_cast<std::size_t>(y_[i])];
      n.value = static_cast<double>(
          std::max_element(count.begin(), count.end()) - count.begin());
    } else {
      double sum = 0.0;
      for (auto i : idx) sum += y_[i];
      n.value = sum / static_cast<double>(idx.size());
    }
    return n;
  }

  void evaluate(Open& o) const {
    const std::size_t n = o.idx.size();
    const std::size_t m = config_.min_samples_leaf;
    if (o.depth >= config_.max_depth || n < 2 * m) return;

    double mean = 0.0;
    for (auto i : o.idx) mean += y_[i];
    mean /= static_cast<double>(n);
    double impurity = 0.0;  // SSE, or n * Gini
    std::vector<double> total(classes_, 0.0);
    if (classify()) {
      for (auto i : o.idx) total[static_cast<std::size_t>(y_[i])] += 1.0;
      double sq = 0.0;
      for (double c : total) sq += c * c;
      impurity = static_cast<double>(n) - sq / static_cast<double>(n);
    } else {
      for (auto i : o.idx) impurity += (y_[i] - mean) * (y_[i] - mean);
    }
    if (impurity <= 0.0) return;
    const double eps = 1e-10 * impurity;

    std::vector<std::size_t> order = o.idx;
    Split best;
    for (std::size_t f = 0; f < x_.cols; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_.at(a, f) < x_.at(b, f); });
      // Gain = score(L) + score(R) - score(parent) for both criteria.
      double sum_l = 0.0;
      double sum_all = 0.0;
      for (auto i : order) sum_all += y_[i] - mean;
      std::vector<double> cnt_l(classes_, 0.0);
      double sq_l = 0.0;
      double sq_r = 0.0;
      for (double c : total) sq_r += c * c;
      const double parent_score = classify() ? sq_r / static_cast<double>(n)
                                             : sum_all * sum_all / static_cast<double>(n);

      for (std::size_t k = 1; k < n; ++k) {
        const std::size_t i = order[k - 1];
        if (classify()) {
          const auto c = static_cast<std::size_t>(y_[i]);
          const double right_c = total[c] - cnt_l[c];
          sq_l += 2.0 * cnt_l[c] + 1.0;
          sq_r += -2.0 * right_c + 1.0;
          cnt_l[c] += 1.0;
        } else {
          sum_l += y_[i] - mean;
        }
        if (k < m || n - k < m) continue;
        const double lo = x_.at(i, f);
        const double hi = x_.at(order[k], f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        double gain;
        if (classify()) {
          gain = sq_l / nl + sq_r / nr - parent_score;
        } else {
          const double sum_r = sum_all - sum_l;
          gain = sum_l * sum_l / nl + sum_r * sum_r / nr - parent_score;
        }
        if (gain <= eps) continue;
        if (!best.valid || gain > best.gain + eps) {
          best = {true, static_cast<int>(f), lo + (hi - lo) / 2.0, gain};
        }
      }
    }
    o.split = best;
  }

  const Matrix& x_;
  std::span<const double> y_;
  std::size_t classes_;
  const TrainConfig& config_;
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_shape(const Matrix& x, std::size_t labels) {
  if (x.rows != labels) throw Error("feature and label counts differ");
  if (x.data.size() != x.rows * x.cols) throw Error("malformed feature matrix");
  for (double v : x.data) {
    if (!std::isfinite(v)) throw Error("non-finite feature value");
  }
}

}  // namespace

Tree fit_tree(const Matrix& x, std::span<const double> y, const TrainConfig& config) {
  config.validate();
  check_shape(x, y.size());
  for (double v : y) {
    if (!std::isfinite(v)) throw Error("non-finite label");
  }
  return Grower(x, y, 0, config).grow(all_rows(x.rows));
}

Tree fit_classification_tree(const Matrix& x, std::span<const int> classes,
                             std::size_t num_classes, const TrainConfig& config) {
  config.validate();
  check_shape(x, classes.size());
  if (num_classes == 0) throw Error("classification needs at least one class");
  std::vector<double> y;
  y.reserve(classes.size());
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw Error("class id out of range");
    y.push_back(c);
  }
  return Grower(x, y, num_classes, config).grow(all_rows(x.rows));
}

double Forest::predict(std::span<const double> x) const {
  if (trees.empty()) throw Error("predict on an empty forest");
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

double Forest::predict(const FeatureVector& f) const {
  std::array<double, kNumFeatures> row{};
  std::copy(f.values.begin(), f.values.end(), row.begin());
  return predict(std::span<const double>(row));
}

std::size_t Forest::node_count() const {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.nodes.size();
  return n;
}

Forest fit_forest(const Matrix& x, std::span<const double> y, const TrainConfig& config,
                  std::uint64_t seed) {
  config.validate();
  check_shape(x, y.size());
  if (x.rows == 0) throw Error("cannot fit a forest on zero samples");
  Forest forest;
  for (std::size_t t = 0; t < config.trees_per_forest; ++t) {
    std::vector<std::size_t> idx;
    if (config.bootstrap) {
      Rng rng(derive_seed(seed, t));
      idx.reserve(x.rows);
      for (std::size_t k = 0; k < x.rows; ++k) idx.push_back(rng.below(x.rows));
    } else {
      idx = all_rows(x.rows);
    }
    forest.trees.push_back(Grower(x, y, 0, config).grow(std::move(idx)));
  }
  return forest;
}

std::vector<double> SuiteModel::predict(const FeatureVector& f) const {
  std::vector<double> out;
  out.reserve(forests.size());
  for (const auto& fo : forests) out.push_back(fo.predict(f));
  return out;
}

std::size_t SuiteModel::best(const FeatureVector& f) const {
  return argmax_label(predict(f));
}

std::size_t SuiteModel::node_count() const {
  std::size_t n = 0;
  for (const auto& f : forests) n += f.node_count();
  return n;
}

SuiteModel fit_suite(std::span<const Sample> train, const std::vector<std::size_t>& psc_ids,
                     const TrainConfig& config) {
  if (train.empty()) throw Error("fit_suite: empty training set");
  if (psc_ids.empty()) throw Error("fit_suite: empty PSC list");
  const Matrix x = feature_matrix(train);
  SuiteModel model{psc_ids, {}, config};
  for (std::size_t p = 0; p < psc_ids.size(); ++p) {
    std::vector<double> y;
    y.reserve(train.size());
    for (const auto& s : train) {
      if (s.labels.size() != psc_ids.size()) throw Error("fit_suite: label count mismatch");
      y.push_back(s.labels[p]);
    }
    model.forests.push_back(fit_forest(x, y, config, derive_seed(config.seed, p)));
  }
  return model;
}

std::vector<int> threshold_labels(std::span<const double> ipc, double threshold) {
  if (ipc.empty()) return {};
  const double top = *std::max_element(ipc.begin(), ipc.end());
  std::vector<int> out;
  out.reserve(ipc.size());
  for (double v : ipc) out.push_back(v >= (1.0 - threshold) * top ? 1 : 0);
  return out;
}

std::size_t argmax_label(std::span<const double> ipc) {
  if (ipc.empty()) throw Error("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < ipc.size(); ++i) {
    if (ipc[i] > ipc[best]) best = i;
  }
  return best;
}

std::vector<double> one_hot_row(const FeatureVector& f, std::size_t psc_index,
                                std::size_t num_pscs) {
  if (psc_index >= num_pscs) throw Error("one-hot PSC index out of range");
  std::vector<double> row = as_row(f);
  row.resize(kNumFeatures + num_pscs, 0.0);
  row[kNumFeatures + psc_index] = 1.0;
  return row;
}

ClassifierVariants fit_classifier_variants(std::span<const Sample> train,
                                           const std::vector<std::size_t>& psc_ids,
                                           const TrainConfig& config, double label_threshold) {
  if (train.empty()) throw Error("fit_classifier_variants: empty training set");
  const std::size_t n_psc = psc_ids.size();
  ClassifierVariants out;
  out.psc_ids = psc_ids;
  const Matrix x = feature_matrix(train);

  std::vector<int> best;
  for (const auto& s : train) {
    if (s.labels.size() != n_psc) throw Error("label count mismatch");
    best.push_back(static_cast<int>(argmax_label(s.labels)));
  }
  out.single_classifier = fit_classification_tree(x, best, n_psc, config);

  Matrix wide{train.size() * n_psc, kNumFeatures + n_psc, {}};
  std::vector<double> wide_y;
  for (const auto& s : train) {
    for (std::size_t p = 0; p < n_psc; ++p) {
      const auto row = one_hot_row(s.features, p, n_psc);
      wide.data.insert(wide.data.end(), row.begin(), row.end());
      wide_y.push_back(s.labels[p]);
    }
  }
  out.single_regressor = fit_forest(wide, wide_y, config, derive_seed(config.seed, 0x5eed));

  std::vector<std::vector<double>> member(n_psc);
  for (const auto& s : train) {
    const auto labels = threshold_labels(s.labels, label_threshold);
    for (std::size_t p = 0; p < n_psc; ++p) member[p].push_back(labels[p]);
  }
  for (std::size_t p = 0; p < n_psc; ++p) {
    out.suite_of_classifiers.push_back(fit_tree(x, member[p], config));
  }
  return out;
}

namespace {

using nlohmann::json;

json tree_to_json(const Tree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples});
  }
  return nodes;
}

Tree tree_from_json(const json& j) {
  Tree t;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 6) throw Error("malformed tree node");
    t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                       n[4].get<double>(), n[5].get<std::size_t>()});
  }
  const int count = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    if (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count) {
      throw Error("tree node child index out of range");
    }
  }
  if (t.nodes.empty()) throw Error("empty tree in model");
  return t;
}

}  // namespace

std::string SuiteModel::to_json() const {
  json j;
  j["format"] = "pfm-suite";
  j["version"] = 1;
  j["psc_ids"] = psc_ids;
  j["config"] = {{"trees_per_forest", config.trees_per_forest},
                 {"max_nodes_per_tree", config.max_nodes_per_tree},
                 {"max_depth", config.max_depth},
                 {"min_samples_leaf", config.min_samples_leaf},
                 {"bootstrap", config.bootstrap},
                 {"seed", config.seed}};
  j["features"] = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());
  json forests_j = json::array();
  for (const auto& f : forests) {
    json trees = json::array();
    for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
    forests_j.push_back(trees);
  }
  j["forests"] = forests_j;
  return j.dump(1);
}

SuiteModel SuiteModel::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "pfm-suite" || j.at("version") != 1) {
      throw Error("not a version 1 suite model");
    }
    SuiteModel m;
    m.psc_ids = j.at("psc_ids").get<std::vector<std::size_t>>();
    const auto& c = j.at("config");
    m.config.trees_per_forest = c.at("trees_per_forest");
    m.config.max_nodes_per_tree = c.at("max_nodes_per_tree");
    m.config.max_depth = c.at("max_depth");
    m.config.min_samples_leaf = c.at("min_samples_leaf");
    m.config.bootstrap = c.at("bootstrap");
    m.config.seed = c.at("seed");
    for (const auto& f : j.at("forests")) {
      Forest forest;
      for (const auto& t : f) forest.trees.push_back(tree_from_json(t));
      m.forests.push_back(std::move(forest));
    }
    if (m.forests.size() != m.psc_ids.size()) throw Error("forest count differs from PSC count");
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed suite model: ") + e.what());
  }
}

std::string ClassifierVariants::to_json() const {
  json j;
  j["format"] = "pfm-variants";
  j["version"] = 1;
  j["psc_ids"] = psc_ids;
  j["single_classifier"] = tree_to_json(single_classifier);
  json reg = json::array();
  for (const auto& t : single_regressor.trees) reg.push_back(tree_to_json(t));
  j["single_regressor"] = reg;
  json suite = json::array();
  for (const auto& t : suite_of_classifiers) suite.push_back(tree_to_json(t));
  j["suite_of_classifiers"] = suite;
  return j.dump(1);
}

ClassifierVariants ClassifierVariants::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "pfm-variants" || j.at("version") != 1) {
      throw Error("not a version 1 variants file");
    }
    ClassifierVariants v;
    v.psc_ids = j.at("psc_ids").get<std::vector<std::size_t>>();
    v.single_classifier = tree_from_json(j.at("single_classifier"));
    for (const auto& t : j.at("single_regressor")) v.single_regressor.trees.push_back(tree_from_json(t));
    for (const auto& t : j.at("suite_of_classifiers")) v.suite_of_classifiers.push_back(tree_from_json(t));
    if (v.single_regressor.trees.empty()) throw Error("variants file has an empty regressor");
    if (v.suite_of_classifiers.size() != v.psc_ids.size()) {
      throw Error("variants file: classifier count does not match PSC count");
    }
    return v;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed variants file: ") + e.what());
  }
}

}  // namespace pfm
