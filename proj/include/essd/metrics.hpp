#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "essd/error.hpp"

namespace essd {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

enum class SignalRule : std::uint8_t {
  greater_equal,  // signal iff score ≥ threshold
  greater,        // signal iff score > threshold
};

inline ConfusionCounts confusion(const std::vector<double>& scores,
                                 const std::vector<std::int32_t>& labels,
                                 double threshold, SignalRule rule) {
  if (scores.size() != labels.size() || scores.empty())
    throw Error(Errc::LengthMismatch,
                std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool signalled = rule == SignalRule::greater_equal
                         ? scores[i] >= threshold
                         : scores[i] > threshold;
    if (labels[i] == 1)
      signalled ? ++c.tp : ++c.fn;
    else
      signalled ? ++c.fp : ++c.tn;
  }
  return c;
}

// A rate with zero denominator is undefined, never coerced to 0.
struct Rates {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> fpr;
};

inline Rates rates(const ConfusionCounts& c) {
  Rates r;
  if (c.tp + c.fn > 0)
    r.sensitivity =
        static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) {
    r.specificity =
        static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    r.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  }
  return r;
}

// Pair-counting AUC: (#concordant + 0.5·#tied) / (#pos·#neg). The numerator
// is accumulated in integers (doubled), so the result is exact.
inline double auc(const std::vector<double>& scores,
                  const std::vector<std::int32_t>& labels) {
  if (scores.size() != labels.size())
    throw Error(Errc::LengthMismatch,
                std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::int32_t y : labels) (y == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw Error(Errc::SingleClassScores, "AUC needs both classes");
  std::uint64_t numer2 = 0;  // 2·concordant + tied
  std::uint64_t neg_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? group_pos : group_neg) += 1;
      ++j;
    }
    numer2 += 2 * group_pos * neg_below + group_pos * group_neg;
    neg_below += group_neg;
    i = j;
  }
  return static_cast<double>(numer2) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Non-interpolated average precision: mean over positives of the precision
// at that positive's rank when rows are sorted by score descending. Equal
// scores are ordered by ascending tie-break key so rankings are
// reproducible.
template <typename Key>
double average_precision(const std::vector<double>& scores,
                         const std::vector<std::int32_t>& labels,
                         const std::vector<Key>& keys) {
  if (scores.size() != labels.size() || scores.size() != keys.size())
    throw Error(Errc::LengthMismatch, "scores, labels, keys must align");
  std::uint64_t n_pos = 0;
  for (std::int32_t y : labels)
    if (y == 1) ++n_pos;
  if (n_pos == 0)
    throw Error(Errc::NoPositives, "average precision needs a positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return keys[a] < keys[b];
  });
  double sum = 0.0;
  std::uint64_t seen_pos = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 1) continue;
    ++seen_pos;
    sum += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(n_pos);
}

// Tie-break by input position when no external key is given.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<std::int32_t>& labels) {
  std::vector<std::size_t> keys(scores.size());
  std::iota(keys.begin(), keys.end(), 0);
  return average_precision(scores, labels, keys);
}

// ROC curve as (fpr, sensitivity) points, one per distinct score threshold,
// sweeping from the strictest threshold down. Endpoints (0,0) and (1,1) are
// included.
inline std::vector<std::pair<double, double>> roc_points(
    const std::vector<double>& scores,
    const std::vector<std::int32_t>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::int32_t y : labels) (y == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw Error(Errc::SingleClassScores, "ROC needs both classes");
  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 0.0);
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                        static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  return points;
}

}  // namespace essd
