#pragma once

// Bagged CART classifier for two classes (0 = legitimate, 1 = hijack).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bgpoison/core.hpp"
#include "bgpoison/random.hpp"

namespace bgpoison {

struct ForestParams {
  int n_trees = 50;
  int max_depth = 12;
  double bootstrap_fraction = 1.0;
  int min_samples_split = 2;
  /// Features the trees may split on; empty means all.
  std::vector<bool> feature_mask;
};

/// Row-major training matrix.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  const double* row(std::size_t i) const { return x.data() + i * n_features; }

  void add(const std::vector<double>& features, int label) {
    if (n_features == 0 && y.empty()) n_features = features.size();
    if (features.size() != n_features) throw std::invalid_argument("feature width mismatch");
    if (label != 0 && label != 1) throw std::invalid_argument("labels must be 0 or 1");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.n_features = n_features;
    for (const auto i : idx) {
      out.x.insert(out.x.end(), row(i), row(i) + n_features);
      out.y.push_back(y[i]);
    }
    return out;
  }
};

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  ///< -1 for leaves
    double threshold = 0;
    int left = -1;
    int right = -1;
    double counts[2] = {0, 0};

    bool leaf() const noexcept { return feature < 0; }
  };

  /// Grows a tree on the multiset of rows in `sample` (repeats allowed).
  /// Adds each split's weighted impurity decrease to `importance`.
  static DecisionTree grow(const Dataset& data, std::vector<std::size_t> sample, const ForestParams& params,
                           const std::vector<int>& allowed, Rng& rng, std::vector<double>& importance) {
    DecisionTree t;
    if (sample.empty()) throw TrainingError("empty bootstrap sample");
    const double root_weight = static_cast<double>(sample.size());
    t.build(data, sample, 0, sample.size(), 0, params, allowed, rng, importance, root_weight);
    return t;
  }

  /// 1 when the reached leaf holds strictly more hijack than legitimate weight.
  int vote(const double* x) const {
    const Node* n = &nodes_[0];
    while (!n->leaf()) n = &nodes_[static_cast<std::size_t>(x[n->feature] <= n->threshold ? n->left : n->right)];
    return n->counts[1] > n->counts[0] ? 1 : 0;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  std::size_t depth() const { return depth_of(0); }

  nlohmann::json to_json() const {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(), counts = nlohmann::json::array();
    for (const auto& n : nodes_) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      counts.push_back({n.counts[0], n.counts[1]});
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"counts", counts}};
  }

  static DecisionTree from_json(const nlohmann::json& j, std::size_t n_features) {
    DecisionTree t;
    const auto& f = j.at("feature");
    const std::size_t n = f.size();
    if (n == 0 || j.at("threshold").size() != n || j.at("left").size() != n || j.at("right").size() != n ||
        j.at("counts").size() != n) {
      throw ParseError(0, "inconsistent tree arrays");
    }
    for (std::size_t i = 0; i < n; ++i) {
      Node node;
      node.feature = f[i].get<int>();
      node.threshold = j["threshold"][i].get<double>();
      node.left = j["left"][i].get<int>();
      node.right = j["right"][i].get<int>();
      node.counts[0] = j["counts"][i].at(0).get<double>();
      node.counts[1] = j["counts"][i].at(1).get<double>();
      if (node.feature >= static_cast<int>(n_features)) throw ParseError(0, "feature index out of range");
      if (!node.leaf() && (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                           node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n))) {
        throw ParseError(0, "invalid child index");
      }
      t.nodes_.push_back(node);
    }
    return t;
  }

 private:
  static double gini(double a, double b) {
    const double n = a + b;
    if (n <= 0) return 0;
    const double pa = a / n, pb = b / n;
    return 1.0 - pa * pa - pb * pb;
  }

  std::size_t depth_of(std::size_t i) const {
    const auto& n = nodes_[i];
    if (n.leaf()) return 0;
    return 1 + std::max(depth_of(static_cast<std::size_t>(n.left)), depth_of(static_cast<std::size_t>(n.right)));
  }

  int build(const Dataset& data, std::vector<std::size_t>& s, std::size_t lo, std::size_t hi, int depth,
            const ForestParams& params, const std::vector<int>& allowed, Rng& rng, std::vector<double>& importance,
            double root_weight) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double c[2] = {0, 0};
    for (std::size_t i = lo; i < hi; ++i) c[data.y[s[i]]] += 1;
    nodes_[id].counts[0] = c[0];
    nodes_[id].counts[1] = c[1];
    const double n = c[0] + c[1];
    const double parent = gini(c[0], c[1]);
    if (depth >= params.max_depth || n < params.min_samples_split || parent == 0.0 || allowed.empty()) return id;

    // feature subsample of size ~sqrt(|allowed|)
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(allowed.size()))));
    auto features = allowed;
    for (std::size_t i = 0; i < k && i + 1 < features.size(); ++i) {
      const auto j = i + uniform_index(rng, features.size() - i);
      std::swap(features[i], features[j]);
    }
    features.resize(std::min(k, features.size()));

    int best_f = -1;
    double best_t = 0, best_score = parent * n - 1e-12;
    std::vector<std::pair<double, int>> vals(hi - lo);
    for (const int f : features) {
      for (std::size_t i = lo; i < hi; ++i) vals[i - lo] = {data.row(s[i])[f], data.y[s[i]]};
      std::sort(vals.begin(), vals.end());
      double l[2] = {0, 0};
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        l[vals[i].second] += 1;
        if (vals[i].first == vals[i + 1].first) continue;
        const double nl = l[0] + l[1];
        const double score = nl * gini(l[0], l[1]) + (n - nl) * gini(c[0] - l[0], c[1] - l[1]);
        if (score < best_score) {
          best_score = score;
          best_f = f;
          best_t = vals[i].first + (vals[i + 1].first - vals[i].first) / 2;
          if (best_t >= vals[i + 1].first) best_t = vals[i].first;
        }
      }
    }
    if (best_f < 0) return id;

    const auto mid = std::partition(s.begin() + static_cast<std::ptrdiff_t>(lo), s.begin() + static_cast<std::ptrdiff_t>(hi),
                                    [&](std::size_t r) { return data.row(r)[best_f] <= best_t; });
    const auto m = static_cast<std::size_t>(mid - s.begin());
    importance[static_cast<std::size_t>(best_f)] += (parent * n - best_score) / root_weight;
    nodes_[id].feature = best_f;
    nodes_[id].threshold = best_t;
    const int left = build(data, s, lo, m, depth + 1, params, allowed, rng, importance, root_weight);
    const int right = build(data, s, m, hi, depth + 1, params, allowed, rng, importance, root_weight);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::vector<Node> nodes_;
};

class Forest {
 public:
  Forest() = default;

  /// Trees are grown from per-tree seeds (seed + tree index), so the result
  /// does not depend on `jobs`.
  static Forest train(const Dataset& data, const ForestParams& params, std::uint64_t seed, int jobs = 1) {
    if (data.size() == 0) throw TrainingError("no training samples");
    if (params.n_trees < 1) throw TrainingError("n_trees must be positive");
    if (params.max_depth < 0) throw TrainingError("max_depth must be non-negative");
    if (!(params.bootstrap_fraction > 0.0)) throw TrainingError("bootstrap_fraction must be positive");
    Forest f;
    f.n_features_ = data.n_features;
    f.params_ = params;
    f.seed_ = seed;
    if (f.params_.feature_mask.empty()) f.params_.feature_mask.assign(data.n_features, true);
    if (f.params_.feature_mask.size() != data.n_features) throw TrainingError("feature mask width mismatch");
    std::vector<int> allowed;
    for (std::size_t i = 0; i < data.n_features; ++i) {
      if (f.params_.feature_mask[i]) allowed.push_back(static_cast<int>(i));
    }
    const auto n_trees = static_cast<std::size_t>(params.n_trees);
    f.trees_.resize(n_trees);
    std::vector<std::vector<double>> per_tree(n_trees, std::vector<double>(data.n_features, 0.0));
    const auto draw = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.bootstrap_fraction *
                                                                                     static_cast<double>(data.size()))));
    parallel_for(n_trees, static_cast<std::size_t>(std::max(1, jobs)), [&](std::size_t t) {
      Rng rng(mix64(seed + t));
      std::vector<std::size_t> sample(draw);
      for (auto& s : sample) s = uniform_index(rng, data.size());
      f.trees_[t] = DecisionTree::grow(data, std::move(sample), f.params_, allowed, rng, per_tree[t]);
    });
    // mean of per-tree normalized importances
    f.importance_.assign(data.n_features, 0.0);
    for (const auto& imp : per_tree) {
      const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
      if (total <= 0) continue;
      for (std::size_t i = 0; i < imp.size(); ++i) f.importance_[i] += imp[i] / total;
    }
    const double sum = std::accumulate(f.importance_.begin(), f.importance_.end(), 0.0);
    if (sum > 0) {
      for (auto& x : f.importance_) x /= sum;
    }
    return f;
  }

  /// Fraction of trees voting hijack.
  double predict_proba(const double* x) const {
    if (trees_.empty()) throw std::logic_error("forest not trained");
    int votes = 0;
    for (const auto& t : trees_) votes += t.vote(x);
    return static_cast<double>(votes) / static_cast<double>(trees_.size());
  }

  double predict_proba(const std::vector<double>& x) const {
    if (x.size() != n_features_) throw std::invalid_argument("feature width mismatch");
    return predict_proba(x.data());
  }

  /// Mean of per-tree normalized impurity decreases, rescaled to sum to 1
  /// over trees that split; all zeros for a forest of stumps.
  const std::vector<double>& importances() const noexcept { return importance_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const ForestParams& params() const noexcept { return params_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool trained() const noexcept { return !trees_.empty(); }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    std::vector<int> mask;
    for (const bool b : params_.feature_mask) mask.push_back(b ? 1 : 0);
    return {{"format", "bgpoison-forest"},
            {"n_features", n_features_},
            {"n_trees", params_.n_trees},
            {"max_depth", params_.max_depth},
            {"bootstrap_fraction", params_.bootstrap_fraction},
            {"seed", seed_},
            {"feature_mask", mask},
            {"importances", importance_},
            {"trees", trees}};
  }

  std::string serialize() const { return to_json().dump(); }

  static Forest from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "bgpoison-forest") throw ParseError(0, "not a forest document");
      Forest f;
      f.n_features_ = j.at("n_features").get<std::size_t>();
      f.params_.n_trees = j.at("n_trees").get<int>();
      f.params_.max_depth = j.at("max_depth").get<int>();
      f.params_.bootstrap_fraction = j.at("bootstrap_fraction").get<double>();
      f.seed_ = j.at("seed").get<std::uint64_t>();
      for (const int b : j.at("feature_mask").get<std::vector<int>>()) f.params_.feature_mask.push_back(b != 0);
      f.importance_ = j.at("importances").get<std::vector<double>>();
      for (const auto& t : j.at("trees")) f.trees_.push_back(DecisionTree::from_json(t, f.n_features_));
      if (f.trees_.size() != static_cast<std::size_t>(f.params_.n_trees) ||
          f.importance_.size() != f.n_features_ || f.params_.feature_mask.size() != f.n_features_) {
        throw ParseError(0, "inconsistent forest document");
      }
      return f;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(0, std::string("invalid forest document: ") + e.what());
    }
  }

  static Forest parse(std::string_view text) {
    try {
      return from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(0, std::string("invalid forest document: ") + e.what());
    }
  }

 private:
  std::size_t n_features_ = 0;
  ForestParams params_;
  std::uint64_t seed_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<double> importance_;
};

/// Stratified k-fold accuracy. Folds are formed per class after a seeded
/// shuffle; every fold trains with the same params and seed.
inline double cross_validated_accuracy(const Dataset& data, const ForestParams& params, std::uint64_t seed,
                                       int folds = 5, int jobs = 1) {
  if (folds < 2) throw std::invalid_argument("need at least two folds");
  Rng rng(derive_seed(seed, "cv-folds"));
  std::vector<int> fold_of(data.size(), 0);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.y[i] == cls) idx.push_back(i);
    }
    shuffle(idx, rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  std::size_t correct = 0, total = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < data.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty()) continue;
    const auto model = Forest::train(data.subset(train_idx), params, derive_seed(seed, static_cast<std::uint64_t>(f)), jobs);
    for (const auto i : test_idx) {
      const int pred = model.predict_proba(data.row(i)) > 0.5 ? 1 : 0;
      correct += pred == data.y[i] ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw TrainingError("no held-out samples");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace bgpoison
