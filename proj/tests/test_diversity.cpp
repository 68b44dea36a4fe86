#include "ensemblekit/combiner.hpp"
#include "ensemblekit/diversity.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace ensemblekit;

namespace {

std::vector<double> one_hot(std::size_t k, std::size_t c) {
  std::vector<double> v(k, 0.0);
  v[c] = 1.0;
  return v;
}

// Each entry of `votes` is (m0, m1, m2) predicted classes; truth is class 0 throughout.
EnsembleRun vote_run(const std::vector<std::array<std::size_t, 3>>& votes, std::size_t k = 3) {
  std::vector<std::vector<std::vector<double>>> rows(3);
  for (const auto& v : votes)
    for (std::size_t i = 0; i < 3; ++i)
      rows[i].push_back(one_hot(k, v[i]));
  return ektest::run_from_rows(rows, std::vector<int>(votes.size(), 0));
}

double naive_similarity(const EnsembleRun& run) {
  double total = 0.0;
  for (std::size_t s = 0; s < run.n_samples(); ++s) {
    double acc = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < run.n_models(); ++i)
      for (std::size_t j = 0; j < run.n_models(); ++j) {
        if (j <= i)
          continue;
        for (std::size_t c = 0; c < run.n_classes(); ++c)
          acc += run.model(i).at(s, c) * run.model(j).at(s, c);
        ++pairs;
      }
    total += acc / pairs;
  }
  return total / static_cast<double>(run.n_samples());
}

} // namespace

TEST(Similarity, IdenticalOneHotIsOne) {
  const auto run = vote_run({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}});
  const auto s = similarity(run);
  EXPECT_EQ(s.mean_S, 1.0);
  EXPECT_EQ(s.standard_error, 0.0);
  EXPECT_EQ(s.n_pairs, 3u);
}

TEST(Similarity, DisjointOneHotIsZero) {
  const auto run = vote_run({{0, 1, 2}, {2, 0, 1}});
  EXPECT_EQ(similarity(run).mean_S, 0.0);
}

TEST(Similarity, MatchesNaiveLoop) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto run = ektest::random_run(2 + rng() % 5, 1 + rng() % 60, 2 + rng() % 10, rng);
    EXPECT_NEAR(similarity(run).mean_S, naive_similarity(run), 1e-12);
  }
}

TEST(Similarity, OneHotEqualsPairwiseAgreementRate) {
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<std::size_t> cls(0, 3);
  std::vector<std::array<std::size_t, 3>> votes(200);
  std::size_t agree = 0;
  for (auto& v : votes) {
    v = {cls(rng), cls(rng), cls(rng)};
    agree += (v[0] == v[1]) + (v[0] == v[2]) + (v[1] == v[2]);
  }
  const auto run = vote_run(votes, 4);
  EXPECT_NEAR(similarity(run).mean_S, static_cast<double>(agree) / (3.0 * 200.0), 1e-12);
}

TEST(Similarity, StandardErrorFromSampleStd) {
  // per-sample S: 1, 0
  const auto run = vote_run({{0, 0, 0}, {0, 1, 2}});
  const auto s = similarity(run);
  EXPECT_DOUBLE_EQ(s.mean_S, 0.5);
  EXPECT_DOUBLE_EQ(s.standard_deviation, std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(s.standard_error, 0.5);
}

TEST(Similarity, NeedsTwoModels) {
  std::mt19937_64 rng(33);
  EXPECT_THROW(similarity(ektest::random_run(1, 5, 3, rng)), ValidationError);
}

TEST(Similarity, InvariantToModelOrderAndClassPermutation) {
  std::mt19937_64 rng(34);
  const auto run = ektest::random_run(4, 40, 5, rng);
  std::vector<std::vector<std::vector<double>>> reordered(4), relabeled(4);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t s = 0; s < 40; ++s) {
      const auto row = run.model(3 - i).row(s);
      reordered[i].emplace_back(row.begin(), row.end());
      std::vector<double> p(5);
      for (std::size_t c = 0; c < 5; ++c)
        p[perm[c]] = run.model(i).at(s, c);
      relabeled[i].push_back(p);
    }
  std::vector<int> truth(run.truth().begin(), run.truth().end());
  EXPECT_EQ(similarity(ektest::run_from_rows(reordered, truth)).mean_S, similarity(run).mean_S);
  EXPECT_NEAR(similarity(ektest::run_from_rows(relabeled, truth)).mean_S, similarity(run).mean_S,
              1e-15);
}

TEST(Histogram, HandCountedPatterns) {
  const auto run = vote_run({{0, 0, 0}, {0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 1}, {1, 2, 1}});
  const auto h = agreement_histogram(run);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 1, 2, 2})); // WWW, RWW, RRW, RRR
  EXPECT_EQ(h.total(), 6u);
  EXPECT_EQ(pattern_label(2, 3), "RRW");
  EXPECT_EQ(pattern_label(0, 3), "WWW");
}

TEST(Histogram, RestrictedCountsSumToEnsembleCorrect) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const auto run = ektest::random_run(2 + rng() % 4, 50, 3 + rng() % 4, rng);
    for (Rule rule : {Rule::arithmetic, Rule::geometric}) {
      const auto result = combine(run, rule);
      std::size_t correct = 0;
      for (std::size_t s = 0; s < run.n_samples(); ++s)
        correct += result.predicted[s] == run.truth()[s];
      const auto h = agreement_histogram(run, &result);
      EXPECT_EQ(h.total(), correct);
    }
  }
}

TEST(Histogram, IdenticalModelsOnlyFillExtremes) {
  std::mt19937_64 rng(36);
  const auto base = ektest::random_run(1, 80, 4, rng);
  std::vector<std::vector<std::vector<double>>> rows(3);
  for (std::size_t s = 0; s < 80; ++s)
    for (auto& r : rows)
      r.emplace_back(base.model(0).row(s).begin(), base.model(0).row(s).end());
  const auto run =
      ektest::run_from_rows(rows, std::vector<int>(base.truth().begin(), base.truth().end()));
  const auto h = agreement_histogram(run);
  EXPECT_EQ(h.counts[1], 0u);
  EXPECT_EQ(h.counts[2], 0u);
  EXPECT_EQ(h.counts[0] + h.counts[3], 80u);
}

TEST(Split, HandCountedAndMatchesSingleRightBin) {
  const auto run =
      vote_run({{0, 1, 1}, {1, 0, 1}, {2, 2, 0}, {0, 1, 2}, {1, 0, 2}, {0, 0, 0}, {1, 1, 1}});
  const auto split = wrong_agreement_split(run);
  EXPECT_EQ(split.same_wrong, 3u);
  EXPECT_EQ(split.different_wrong, 2u);
  EXPECT_EQ(split.same_wrong + split.different_wrong, agreement_histogram(run).counts[1]);
}

TEST(Split, RequiresThreeModels) {
  std::mt19937_64 rng(37);
  try {
    wrong_agreement_split(ektest::random_run(4, 5, 3, rng));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported configuration"), std::string::npos);
  }
}

TEST(Split, RandomRunsMatchSingleRightBin) {
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 30; ++trial) {
    const auto run = ektest::random_run(3, 100, 5, rng);
    const auto split = wrong_agreement_split(run);
    EXPECT_EQ(split.same_wrong + split.different_wrong, agreement_histogram(run).counts[1]);
  }
}
