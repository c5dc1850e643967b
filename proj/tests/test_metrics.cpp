#include "catch2/catch_amalgamated.hpp"

#include "essd/metrics.hpp"
#include "essd/rng.hpp"
#include "oracles.hpp"

using namespace essd;

TEST_CASE("confusion matrix respects the signal rule") {
  std::vector<double> scores = {0.9, 0.8, 0.3, 0.2};
  std::vector<std::int32_t> labels = {1, 0, 1, 0};
  ConfusionCounts c =
      confusion(scores, labels, 0.5, SignalRule::greater_equal);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);

  // greater_equal admits the threshold itself; greater does not.
  ConfusionCounts ge = confusion({0.5}, {1}, 0.5, SignalRule::greater_equal);
  CHECK(ge.tp == 1);
  ConfusionCounts gt = confusion({0.5}, {1}, 0.5, SignalRule::greater);
  CHECK(gt.fn == 1);
  // The per-design rule: a zero score is no signal under strict greater.
  ConfusionCounts zero = confusion({0.0}, {0}, 0.0, SignalRule::greater);
  CHECK(zero.tn == 1);

  CHECK_THROWS_AS(confusion({0.1}, {1, 0}, 0.5, SignalRule::greater), Error);
  CHECK_THROWS_AS(confusion({}, {}, 0.5, SignalRule::greater), Error);
}

TEST_CASE("rates become undefined when a denominator is empty") {
  ConfusionCounts c{3, 1, 1, 5};
  Rates r = rates(c);
  CHECK(r.sensitivity == 0.75);
  CHECK(r.specificity == 5.0 / 6.0);
  CHECK(r.fpr == 1.0 / 6.0);

  Rates no_pos = rates(ConfusionCounts{0, 2, 0, 3});
  CHECK_FALSE(no_pos.sensitivity.has_value());
  CHECK(no_pos.specificity == 0.6);

  Rates no_neg = rates(ConfusionCounts{2, 0, 1, 0});
  CHECK(no_neg.sensitivity == 2.0 / 3.0);
  CHECK_FALSE(no_neg.specificity.has_value());
  CHECK_FALSE(no_neg.fpr.has_value());

  ConfusionCounts sum{1, 2, 3, 4};
  sum += ConfusionCounts{10, 20, 30, 40};
  CHECK(sum.tp == 11);
  CHECK(sum.tn == 44);
}

TEST_CASE("auc and average precision match the worked examples") {
  CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0}) == 0.75);
  CHECK(auc({0.9, 0.8}, {1, 0}) == 1.0);
  CHECK(auc({0.8, 0.9}, {1, 0}) == 0.0);
  CHECK(auc({0.5, 0.5}, {1, 0}) == 0.5);  // tie: half credit

  // Ranked [1, 0, 1, 0]: precision 1/1 at rank 1 and 2/3 at rank 3.
  CHECK(average_precision({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0}) ==
        (1.0 + 2.0 / 3.0) / 2.0);
  CHECK(average_precision({0.1, 0.9}, {1, 0}) == 0.5);
  CHECK(average_precision({0.9, 0.1}, {1, 0}) == 1.0);

  CHECK_THROWS_AS(auc({0.5, 0.6}, {1, 1}), Error);
  CHECK_THROWS_AS(auc({0.5, 0.6}, {0, 0}), Error);
  CHECK_THROWS_AS(average_precision({0.5}, {0}), Error);
  CHECK_THROWS_AS(auc({0.5}, {1, 0}), Error);
}

TEST_CASE("score ties in average precision break on the key") {
  // Two tied scores, opposite labels. With the positive's key first the
  // positive ranks 1; the other way it ranks 2.
  std::vector<double> scores = {0.7, 0.7};
  std::vector<std::int32_t> labels = {1, 0};
  CHECK(average_precision(scores, labels,
                          std::vector<std::string>{"a", "b"}) == 1.0);
  CHECK(average_precision(scores, labels,
                          std::vector<std::string>{"b", "a"}) == 0.5);
}

TEST_CASE("auc and ap equal the exhaustive oracle on random inputs") {
  Rng rng(314159);
  const double alphabet[4] = {0.1, 0.4, 0.4, 0.9};  // duplicates force ties
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 2 + rng.below(30);
    std::vector<double> scores;
    std::vector<std::int32_t> labels;
    std::vector<int> oracle_labels;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(alphabet[rng.below(4)]);
      std::int32_t l = rng.below(2) == 0 ? 0 : 1;
      labels.push_back(l);
      oracle_labels.push_back(l);
    }
    bool has_pos = false, has_neg = false;
    for (auto l : labels) (l == 1 ? has_pos : has_neg) = true;
    if (has_pos && has_neg) {
      INFO("trial " << trial);
      CHECK(auc(scores, labels) == oracle::auc(scores, oracle_labels));
    }
    if (has_pos)
      CHECK(average_precision(scores, labels) ==
            oracle::average_precision(scores, oracle_labels));
  }
}

TEST_CASE("roc points trace thresholds from none to all") {
  auto pts = roc_points({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  REQUIRE(pts.size() == 5);
  CHECK(pts[0] == std::pair{0.0, 0.0});
  CHECK(pts[1] == std::pair{0.0, 0.5});   // 0.9 admitted
  CHECK(pts[2] == std::pair{0.5, 0.5});   // 0.8 admitted
  CHECK(pts[3] == std::pair{0.5, 1.0});   // 0.3 admitted
  CHECK(pts[4] == std::pair{1.0, 1.0});   // everything admitted
  // Tied scores enter together as one step.
  auto tied = roc_points({0.5, 0.5, 0.1}, {1, 0, 0});
  REQUIRE(tied.size() == 3);
  CHECK(tied[1] == std::pair{0.5, 1.0});
  CHECK_THROWS_AS(roc_points({0.5}, {1}), Error);
}
