#include "ensemblekit/combiner.hpp"
#include "ensemblekit/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace ensemblekit;

namespace {

LabelSet labels_of(std::size_t k) { return LabelSet(ektest::class_names(k)); }

// Brute-force top-k membership: sort class ids by (confidence desc, id asc).
bool in_top_k(std::span<const double> row, ClassId truth, std::size_t k) {
  std::vector<std::size_t> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return row[a] > row[b]; });
  return std::find(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                   static_cast<std::size_t>(truth)) != ids.begin() + static_cast<std::ptrdiff_t>(k);
}

} // namespace

TEST(Score, AllCorrect) {
  const std::vector<ClassId> y{0, 1, 2, 1, 0};
  const auto r = score(y, y, labels_of(3));
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.error, 0.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  for (const auto& c : r.per_class)
    EXPECT_EQ(c.f1, 1.0);
  EXPECT_TRUE(r.misclassified.empty());
}

TEST(Score, HandComputedTwoClass) {
  const std::vector<ClassId> truth{0, 0, 1, 1};
  const std::vector<ClassId> pred{0, 1, 1, 1};
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const auto r = score(pred, truth, labels_of(2), ids);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.per_class[1].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.per_class[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[1].f1, 0.8);
  EXPECT_NEAR(r.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
  EXPECT_NEAR(r.macro_f1, 0.733, 5e-4);
  ASSERT_EQ(r.misclassified.size(), 1u);
  EXPECT_EQ(r.misclassified[0].sample_id, "b");
  EXPECT_EQ(r.misclassified[0].true_class, 0);
  EXPECT_EQ(r.misclassified[0].predicted, 1);
}

TEST(Score, FifteenWrongOutOf2691) {
  std::vector<ClassId> truth(2691, 0), pred(2691, 0);
  for (int i = 0; i < 15; ++i)
    pred[static_cast<std::size_t>(i * 100)] = 1;
  const auto r = score(pred, truth, labels_of(2));
  EXPECT_EQ(format_fixed(r.error, 3), "0.006");
  EXPECT_EQ(r.error, 1.0 - r.accuracy);
}

TEST(Score, ZeroDenominatorsScoreZero) {
  // class 2 is never true and never predicted
  const std::vector<ClassId> truth{0, 1, 1};
  const std::vector<ClassId> pred{1, 1, 1};
  const auto r = score(pred, truth, labels_of(3));
  EXPECT_EQ(r.per_class[0].precision, 0.0); // never predicted
  EXPECT_EQ(r.per_class[0].f1, 0.0);
  EXPECT_EQ(r.per_class[2].recall, 0.0);
  EXPECT_EQ(r.per_class[2].support, 0u);
  EXPECT_NEAR(r.macro_f1, (0.0 + 0.8 + 0.0) / 3.0, 1e-15);
}

TEST(Score, RejectsMismatchedLengths) {
  const std::vector<ClassId> a{0, 1}, b{0};
  EXPECT_THROW(score(a, b, labels_of(2)), ValidationError);
  EXPECT_THROW(score(std::vector<ClassId>{}, std::vector<ClassId>{}, labels_of(2)),
               ValidationError);
}

TEST(Score, AccuracyIsSupportWeightedRecall) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng() % 8, n = 1 + rng() % 150;
    std::uniform_int_distribution<int> cls(0, static_cast<int>(k) - 1);
    std::vector<ClassId> truth(n), pred(n);
    for (std::size_t s = 0; s < n; ++s) {
      truth[s] = cls(rng);
      pred[s] = rng() % 3 == 0 ? truth[s] : cls(rng);
    }
    const auto r = score(pred, truth, labels_of(k));
    double weighted = 0.0;
    for (const auto& c : r.per_class)
      weighted += c.recall * static_cast<double>(c.support) / static_cast<double>(n);
    EXPECT_NEAR(weighted, r.accuracy, 1e-12);
  }
}

TEST(Score, MacroF1InvariantUnderRelabeling) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng() % 6, n = 10 + rng() % 100;
    std::uniform_int_distribution<int> cls(0, static_cast<int>(k) - 1);
    std::vector<ClassId> truth(n), pred(n);
    for (std::size_t s = 0; s < n; ++s) {
      truth[s] = cls(rng);
      pred[s] = rng() % 2 ? truth[s] : cls(rng);
    }
    std::vector<ClassId> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<ClassId> truth2(n), pred2(n);
    for (std::size_t s = 0; s < n; ++s) {
      truth2[s] = perm[static_cast<std::size_t>(truth[s])];
      pred2[s] = perm[static_cast<std::size_t>(pred[s])];
    }
    EXPECT_NEAR(score(pred, truth, labels_of(k)).macro_f1,
                score(pred2, truth2, labels_of(k)).macro_f1, 1e-12);
  }
}

TEST(TopK, FullRankingAndK1) {
  std::mt19937_64 rng(23);
  const auto run = ektest::random_run(1, 50, 6, rng);
  const auto curve = top_k_curve(run.model(0), run.truth(), run.labels(), 6);
  EXPECT_EQ(curve.accuracy.back(), 1.0);
  EXPECT_EQ(curve.macro_f1.back(), 1.0);
  const auto r = score(argmax_rows(run.model(0)), run.truth(), run.labels());
  EXPECT_EQ(curve.accuracy.front(), r.accuracy);
  EXPECT_EQ(curve.macro_f1.front(), r.macro_f1);
}

TEST(TopK, MatchesBruteForceMembership) {
  std::mt19937_64 rng(24);
  const auto run = ektest::random_run(1, 50, 6, rng);
  const auto curve = top_k_curve(run.model(0), run.truth(), run.labels(), 6);
  for (std::size_t k = 1; k <= 6; ++k) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < 50; ++s)
      hits += in_top_k(run.model(0).row(s), run.truth()[s], k);
    EXPECT_EQ(curve.accuracy[k - 1], static_cast<double>(hits) / 50.0) << "k=" << k;
    if (k > 1) {
      EXPECT_GE(curve.accuracy[k - 1], curve.accuracy[k - 2]);
    }
  }
}

TEST(TopK, TiedConfidencesRankLowerIdFirst) {
  const ConfidenceMatrix m("m", {"a", "b"}, 3, {0.4, 0.3, 0.3, 0.4, 0.3, 0.3});
  const std::vector<ClassId> truth{2, 1};
  const auto curve = top_k_curve(m, truth, labels_of(3), 3);
  EXPECT_EQ(curve.accuracy[0], 0.0);
  EXPECT_EQ(curve.accuracy[1], 0.5); // class 1 beats class 2 on the tie
  EXPECT_EQ(curve.accuracy[2], 1.0);
}

TEST(TopK, RejectsOutOfRangeK) {
  const ConfidenceMatrix m("m", {"a"}, 3, {0.4, 0.3, 0.3});
  const std::vector<ClassId> truth{0};
  EXPECT_THROW(top_k_curve(m, truth, labels_of(3), 0), ValidationError);
  EXPECT_THROW(top_k_curve(m, truth, labels_of(3), 4), ValidationError);
}

TEST(ClassWeights, Examples) {
  std::vector<ClassId> truth(10, 0);
  truth.resize(40, 1);
  auto w = class_weights(truth, labels_of(2));
  EXPECT_DOUBLE_EQ(w.weights[0], 2.0);
  EXPECT_DOUBLE_EQ(w.weights[1], 40.0 / 60.0);
  EXPECT_TRUE(w.warnings.empty());

  const std::vector<ClassId> balanced{0, 1, 2, 0, 1, 2};
  for (double v : class_weights(balanced, labels_of(3)).weights)
    EXPECT_DOUBLE_EQ(v, 1.0);

  const std::vector<ClassId> gap{0, 0, 0, 0, 0, 2, 2, 2, 2, 2};
  w = class_weights(gap, labels_of(3));
  EXPECT_DOUBLE_EQ(w.weights[0], 1.0);
  EXPECT_EQ(w.weights[1], 0.0);
  EXPECT_DOUBLE_EQ(w.weights[2], 1.0);
  ASSERT_EQ(w.warnings.size(), 1u);
  EXPECT_NE(w.warnings[0].find("c1"), std::string::npos);
}

TEST(Baseline, RelativeErrorChange) {
  auto b = compare_to_baseline(0.999, 0.992);
  EXPECT_EQ(format_percent(*b.relative_error_change), "-87.50%");
  EXPECT_EQ(format_percent(b.absolute_improvement), "0.70%");
  b = compare_to_baseline(1.0, 0.992);
  EXPECT_EQ(*b.relative_error_change, -1.0);
  EXPECT_EQ(format_percent(*b.relative_error_change), "-100.00%");
  b = compare_to_baseline(0.95, 0.95);
  EXPECT_EQ(*b.relative_error_change, 0.0);
  b = compare_to_baseline(0.9, 1.0);
  EXPECT_FALSE(b.relative_error_change.has_value());
  EXPECT_THROW(compare_to_baseline(1.2, 0.9), ValidationError);
}
