#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "essd/csv.hpp"
#include "essd/error.hpp"
#include "essd/metrics.hpp"
#include "essd/parallel.hpp"
#include "essd/rng.hpp"

namespace essd {

inline constexpr int kFeatureCount = 9;

struct TrainingRow {
  std::array<double, kFeatureCount> x{};
  std::int32_t label = 0;
};

// Internal nodes carry (feature, threshold, children); leaves carry the
// class-1 fraction of their training rows. feature = -1 marks a leaf.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double fraction = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const std::array<double, kFeatureCount>& x) const {
    std::int32_t at = 0;
    while (nodes[at].feature >= 0) {
      const TreeNode& n = nodes[at];
      at = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[at].fraction;
  }
};

struct Forest {
  std::vector<DecisionTree> trees;
  std::int32_t mtry = 0;
  std::int32_t n_trees = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::int32_t, double>> cv_mean_auc;  // (mtry, AUC)
};

// Test hook: reports each chosen split together with the rows and feature
// subset it was chosen from, so optimality can be checked externally.
using TreeAudit = std::function<void(
    const std::vector<std::size_t>& row_ids, const std::vector<int>& features,
    int chosen_feature, double chosen_threshold, double chosen_score,
    double parent_score)>;

namespace detail {

// Weighted Gini impurity of a two-way split. The exact expression matters:
// the split comparison is on doubles, so any equivalent reformulation must
// produce bitwise-identical values.
inline double gini_term(std::uint64_t pos, std::uint64_t n) {
  double p1 = static_cast<double>(pos) / static_cast<double>(n);
  double p0 = static_cast<double>(n - pos) / static_cast<double>(n);
  return static_cast<double>(n) * (1.0 - p1 * p1 - p0 * p0);
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

// Best (feature, threshold) over the given features by weighted child Gini.
// Thresholds are midpoints between consecutive distinct sorted values; a
// midpoint that rounds up to the larger value cannot separate the pair and
// is skipped. Ties keep the first candidate in (feature asc, threshold asc)
// scan order.
template <typename RowAt>
SplitChoice best_split(const std::vector<std::size_t>& rows, RowAt row_at,
                       const std::vector<int>& features, int min_leaf) {
  SplitChoice best;
  std::vector<std::pair<double, std::int32_t>> vals;
  vals.reserve(rows.size());
  for (int f : features) {
    vals.clear();
    for (std::size_t id : rows) {
      const TrainingRow& r = row_at(id);
      vals.emplace_back(r.x[f], r.label);
    }
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::uint64_t pos_left = 0;
    std::uint64_t total_pos = 0;
    for (const auto& [v, y] : vals) total_pos += y == 1;
    const std::uint64_t n = vals.size();
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      pos_left += vals[i].second == 1;
      if (vals[i].first == vals[i + 1].first) continue;
      double t = (vals[i].first + vals[i + 1].first) / 2.0;
      if (t == vals[i + 1].first) continue;
      std::uint64_t n_left = i + 1;
      std::uint64_t n_right = n - n_left;
      if (n_left < static_cast<std::uint64_t>(min_leaf) ||
          n_right < static_cast<std::uint64_t>(min_leaf))
        continue;
      double score =
          gini_term(pos_left, n_left) + gini_term(total_pos - pos_left, n_right);
      if (!best.found || score < best.score) {
        best.found = true;
        best.feature = f;
        best.threshold = t;
        best.score = score;
      }
    }
  }
  return best;
}

template <typename RowAt>
std::int32_t grow_node(std::vector<TreeNode>& nodes,
                       std::vector<std::size_t>& rows, RowAt row_at,
                       int mtry, int min_leaf, Rng& rng,
                       const TreeAudit* audit) {
  std::uint64_t pos = 0;
  for (std::size_t id : rows) pos += row_at(id).label == 1;
  const std::uint64_t n = rows.size();

  auto make_leaf = [&]() {
    TreeNode leaf;
    leaf.fraction = static_cast<double>(pos) / static_cast<double>(n);
    nodes.push_back(leaf);
    return static_cast<std::int32_t>(nodes.size()) - 1;
  };
  if (pos == 0 || pos == n || n < 2 * static_cast<std::uint64_t>(min_leaf) ||
      n < 2)
    return make_leaf();

  // mtry features without replacement, scanned in ascending index order.
  std::array<int, kFeatureCount> deck;
  std::iota(deck.begin(), deck.end(), 0);
  std::vector<int> features(static_cast<std::size_t>(mtry));
  for (int i = 0; i < mtry; ++i) {
    std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(
            kFeatureCount - i)));
    std::swap(deck[static_cast<std::size_t>(i)], deck[j]);
    features[static_cast<std::size_t>(i)] = deck[static_cast<std::size_t>(i)];
  }
  std::sort(features.begin(), features.end());

  SplitChoice split = best_split(rows, row_at, features, min_leaf);
  double parent_score = gini_term(pos, n);
  if (!split.found || !(split.score < parent_score)) return make_leaf();
  if (audit && *audit)
    (*audit)(rows, features, split.feature, split.threshold, split.score,
             parent_score);

  std::vector<std::size_t> left_rows, right_rows;
  left_rows.reserve(rows.size());
  right_rows.reserve(rows.size());
  for (std::size_t id : rows) {
    if (row_at(id).x[split.feature] <= split.threshold)
      left_rows.push_back(id);
    else
      right_rows.push_back(id);
  }
  rows.clear();
  rows.shrink_to_fit();

  std::int32_t me = static_cast<std::int32_t>(nodes.size());
  TreeNode node;
  node.feature = split.feature;
  node.threshold = split.threshold;
  nodes.push_back(node);
  std::int32_t l = grow_node(nodes, left_rows, row_at, mtry, min_leaf, rng,
                             audit);
  std::int32_t r = grow_node(nodes, right_rows, row_at, mtry, min_leaf, rng,
                             audit);
  nodes[me].left = l;
  nodes[me].right = r;
  return me;
}

}  // namespace detail

// Grows one tree on `sample` (already bootstrapped by the caller). The
// sub_seed drives the per-node feature subsets.
inline DecisionTree train_tree(const std::vector<TrainingRow>& sample,
                               int mtry, std::uint64_t sub_seed,
                               int min_leaf = 1,
                               const TreeAudit* audit = nullptr) {
  if (sample.empty())
    throw Error(Errc::TooFewRows, "cannot grow a tree on an empty sample");
  if (mtry < 1 || mtry > kFeatureCount)
    throw Error(Errc::ConfigError, "mtry must be in [1,9]");
  Rng rng(sub_seed);
  std::vector<std::size_t> rows(sample.size());
  std::iota(rows.begin(), rows.end(), 0);
  DecisionTree tree;
  auto row_at = [&](std::size_t id) -> const TrainingRow& {
    return sample[id];
  };
  detail::grow_node(tree.nodes, rows, row_at, mtry, min_leaf, rng, audit);
  return tree;
}

// Bags n_trees trees, each on a bootstrap (with replacement, size n) drawn
// from a per-tree sub-seed, so results are independent of worker count.
inline Forest train_forest(const std::vector<TrainingRow>& training, int mtry,
                           int n_trees, std::uint64_t seed,
                           unsigned workers = 1, int min_leaf = 1) {
  if (mtry < 1 || mtry > kFeatureCount)
    throw Error(Errc::ConfigError, "mtry must be in [1,9]");
  std::uint64_t pos = 0;
  for (const TrainingRow& r : training) pos += r.label == 1;
  if (training.empty() || pos == 0 || pos == training.size())
    throw Error(Errc::SingleClassTraining,
                "training set must contain both classes");
  Forest forest;
  forest.mtry = mtry;
  forest.n_trees = n_trees;
  forest.seed = seed;
  forest.trees.resize(static_cast<std::size_t>(n_trees));
  const std::size_t n = training.size();
  parallel_for(static_cast<std::size_t>(n_trees), workers, [&](std::size_t t) {
    Rng rng(derive_seed(seed, "tree", t));
    std::vector<std::size_t> sample(n);
    for (std::size_t k = 0; k < n; ++k)
      sample[k] = static_cast<std::size_t>(rng.below(n));
    auto row_at = [&](std::size_t id) -> const TrainingRow& {
      return training[id];
    };
    DecisionTree tree;
    detail::grow_node(tree.nodes, sample, row_at, mtry, min_leaf, rng,
                      nullptr);
    forest.trees[t] = std::move(tree);
  });
  return forest;
}

inline double predict_proba(const Forest& forest,
                            const std::array<double, kFeatureCount>& x) {
  double sum = 0.0;
  for (const DecisionTree& tree : forest.trees) sum += tree.predict(x);
  return sum / static_cast<double>(forest.trees.size());
}

struct TuneResult {
  Forest forest;  // retrained on all rows with the winning mtry
  std::int32_t best_mtry = 0;
  std::vector<std::pair<std::int32_t, double>> mean_auc;  // per candidate
};

// Stratified fold labels: each class is shuffled separately and dealt
// round-robin, so every fold gets its share of both classes.
inline std::vector<std::int32_t> stratified_folds(
    const std::vector<std::int32_t>& labels, std::int32_t folds,
    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::int32_t> fold_of(labels.size(), 0);
  for (std::int32_t cls = 1; cls >= 0; --cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    for (std::size_t i = members.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng.below(i));
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t i = 0; i < members.size(); ++i)
      fold_of[members[i]] =
          static_cast<std::int32_t>(i % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

// Cross-validated mtry selection. Rows must already be in canonical order;
// fold assignment and per-fold forests are seeded from `seed` alone. Folds
// whose train or test side lacks a class are skipped. Ties in mean AUC go
// to the smaller mtry. The returned forest is retrained on all rows.
inline TuneResult tune_mtry(const std::vector<TrainingRow>& training,
                            std::vector<int> candidates, std::int32_t folds,
                            int n_trees, std::uint64_t seed,
                            unsigned workers = 1) {
  if (static_cast<std::int32_t>(training.size()) < folds)
    throw Error(Errc::TooFewRows,
                std::to_string(training.size()) + " rows for " +
                    std::to_string(folds) + " folds");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  if (candidates.empty())
    throw Error(Errc::ConfigError, "no mtry candidates");

  std::vector<std::int32_t> labels(training.size());
  for (std::size_t i = 0; i < training.size(); ++i)
    labels[i] = training[i].label;
  std::vector<std::int32_t> fold_of =
      stratified_folds(labels, folds, derive_seed(seed, "folds", 0));

  TuneResult result;
  bool any_scored = false;
  double best_auc = 0.0;
  for (int mtry : candidates) {
    double total = 0.0;
    std::int32_t scored = 0;
    for (std::int32_t k = 0; k < folds; ++k) {
      std::vector<TrainingRow> train_rows;
      std::vector<double> test_scores;
      std::vector<std::int32_t> test_labels;
      std::vector<std::size_t> test_ids;
      for (std::size_t i = 0; i < training.size(); ++i) {
        if (fold_of[i] == k)
          test_ids.push_back(i);
        else
          train_rows.push_back(training[i]);
      }
      auto has_both = [](auto&& get, std::size_t n) {
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) (get(i) == 1 ? pos : neg) = true;
        return pos && neg;
      };
      if (!has_both([&](std::size_t i) { return train_rows[i].label; },
                    train_rows.size()) ||
          !has_both([&](std::size_t i) { return labels[test_ids[i]]; },
                    test_ids.size()))
        continue;
      Forest fold_forest = train_forest(
          train_rows, mtry, n_trees,
          derive_seed(seed, "cv",
                      static_cast<std::uint64_t>(mtry) * 10000 +
                          static_cast<std::uint64_t>(k)),
          workers);
      for (std::size_t i : test_ids) {
        test_scores.push_back(predict_proba(fold_forest, training[i].x));
        test_labels.push_back(labels[i]);
      }
      total += auc(test_scores, test_labels);
      ++scored;
    }
    if (scored == 0)
      throw Error(Errc::TooFewRows,
                  "no cross-validation fold had both classes on both sides");
    double mean = total / scored;
    result.mean_auc.emplace_back(mtry, mean);
    if (!any_scored || mean > best_auc) {
      any_scored = true;
      best_auc = mean;
      result.best_mtry = mtry;
    }
  }
  result.forest = train_forest(training, result.best_mtry, n_trees,
                               derive_seed(seed, "final", 0), workers);
  result.forest.cv_mean_auc = result.mean_auc;
  return result;
}

// Portable text serialisation; numbers use shortest round-trip form, so a
// written model reloads bit-identically.
inline void write_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << "essd-forest 1\n";
  out << "mtry " << forest.mtry << "\n";
  out << "n_trees " << forest.n_trees << "\n";
  out << "seed " << forest.seed << "\n";
  for (const auto& [mtry, mean] : forest.cv_mean_auc)
    out << "cv " << mtry << " " << format_double(mean) << "\n";
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const DecisionTree& tree = forest.trees[t];
    out << "tree " << t << " nodes " << tree.nodes.size() << "\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.feature >= 0)
        out << "node " << i << " split " << (n.feature + 1) << " "
            << format_double(n.threshold) << " " << n.left << " " << n.right
            << "\n";
      else
        out << "node " << i << " leaf " << format_double(n.fraction) << "\n";
    }
  }
  out << "end\n";
  if (!out) throw Error(Errc::IoError, "write failed for " + path);
}

inline Forest read_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  auto fail = [&](const std::string& why) -> Error {
    return Error(Errc::MalformedRow, path + ": " + why);
  };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "essd-forest" || version != 1)
    throw fail("not an essd-forest version 1 file");
  Forest forest;
  if (!(in >> word >> forest.mtry) || word != "mtry") throw fail("bad mtry");
  if (!(in >> word >> forest.n_trees) || word != "n_trees")
    throw fail("bad n_trees");
  if (!(in >> word >> forest.seed) || word != "seed") throw fail("bad seed");
  while (in >> word) {
    if (word == "cv") {
      std::int32_t mtry;
      std::string value;
      if (!(in >> mtry >> value)) throw fail("bad cv line");
      forest.cv_mean_auc.emplace_back(mtry,
                                      parse_double_field(value, path));
      continue;
    }
    if (word == "tree") {
      std::size_t id, count;
      if (!(in >> id >> word >> count) || word != "nodes")
        throw fail("bad tree header");
      if (id != forest.trees.size()) throw fail("tree ids out of order");
      DecisionTree tree;
      tree.nodes.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t node_id;
        std::string kind;
        if (!(in >> word >> node_id >> kind) || word != "node" ||
            node_id != i)
          throw fail("bad node record");
        TreeNode n;
        if (kind == "split") {
          std::string threshold;
          if (!(in >> n.feature >> threshold >> n.left >> n.right))
            throw fail("bad split node");
          n.feature -= 1;
          if (n.feature < 0 || n.feature >= kFeatureCount)
            throw fail("feature index out of range");
          n.threshold = parse_double_field(threshold, path);
        } else if (kind == "leaf") {
          std::string fraction;
          if (!(in >> fraction)) throw fail("bad leaf node");
          n.fraction = parse_double_field(fraction, path);
        } else {
          throw fail("unknown node kind '" + kind + "'");
        }
        tree.nodes[i] = n;
      }
      forest.trees.push_back(std::move(tree));
      continue;
    }
    if (word == "end") {
      if (static_cast<std::int32_t>(forest.trees.size()) != forest.n_trees)
        throw fail("tree count mismatch");
      return forest;
    }
    throw fail("unexpected token '" + word + "'");
  }
  throw fail("missing end marker");
}

}  // namespace essd
