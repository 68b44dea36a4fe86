#pragma once

// Inter-model agreement: mean pairwise similarity of confidence vectors and
// right/wrong pattern counts.

#include "ensemblekit/combiner.hpp"
#include "ensemblekit/error.hpp"
#include "ensemblekit/predictions.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ensemblekit {

struct SimilarityReport {
  double mean_S = 0.0;
  double standard_error = 0.0; // sample std of per-sample S over sqrt(N)
  double standard_deviation = 0.0;
  std::size_t n_pairs = 0;
  std::vector<double> per_sample;
};

/// Per sample, the mean over unordered model pairs of the dot product of their
/// confidence vectors; then averaged over samples.
inline SimilarityReport similarity(const EnsembleRun& run) {
  const std::size_t n = run.n_models();
  if (n < 2)
    throw ValidationError("similarity needs at least two models, got " + std::to_string(n));
  SimilarityReport out;
  out.n_pairs = n * (n - 1) / 2;
  out.per_sample.resize(run.n_samples());
  std::vector<double> dots(out.n_pairs);
  for (std::size_t s = 0; s < run.n_samples(); ++s) {
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto a = run.model(i).row(s);
        const auto b = run.model(j).row(s);
        double dot = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c)
          dot += a[c] * b[c];
        dots[p++] = dot;
      }
    out.per_sample[s] = detail::order_free_sum(dots) / static_cast<double>(out.n_pairs);
  }

  const double count = static_cast<double>(run.n_samples());
  double sum = 0.0;
  for (double v : out.per_sample)
    sum += v;
  out.mean_S = sum / count;
  if (run.n_samples() > 1) {
    double ss = 0.0;
    for (double v : out.per_sample)
      ss += (v - out.mean_S) * (v - out.mean_S);
    out.standard_deviation = std::sqrt(ss / (count - 1.0));
    out.standard_error = out.standard_deviation / std::sqrt(count);
  }
  return out;
}

enum class Restriction { all, ensemble_correct_aa, ensemble_correct_ga };

inline const char* restriction_name(Restriction r) noexcept {
  switch (r) {
  case Restriction::all:
    return "all";
  case Restriction::ensemble_correct_aa:
    return "ensemble-correct-aa";
  case Restriction::ensemble_correct_ga:
    return "ensemble-correct-ga";
  }
  return "all";
}

struct AgreementHistogram {
  Restriction restriction = Restriction::all;
  /// counts[r]: samples on which exactly r models predicted the true class.
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept {
    std::size_t t = 0;
    for (auto c : counts)
      t += c;
    return t;
  }
};

/// Pattern name for r right out of n, e.g. "RRW" for r=2, n=3.
inline std::string pattern_label(std::size_t right, std::size_t n) {
  return std::string(right, 'R') + std::string(n - right, 'W');
}

namespace detail {

inline void check_result_matches(const EnsembleRun& run, const EnsembleResult& result) {
  if (result.predicted.size() != run.n_samples() ||
      result.per_model_predicted.size() != run.n_models() ||
      result.combined.sample_ids() != run.sample_ids() ||
      result.combined.cols() != run.n_classes())
    throw ValidationError("ensemble result was not built from this run");
}

inline Restriction restriction_of(const EnsembleResult* result) {
  if (!result)
    return Restriction::all;
  return result->rule == Rule::arithmetic ? Restriction::ensemble_correct_aa
                                          : Restriction::ensemble_correct_ga;
}

inline std::vector<std::vector<ClassId>> member_predictions(const EnsembleRun& run,
                                                            const EnsembleResult* result) {
  if (result)
    return result->per_model_predicted;
  std::vector<std::vector<ClassId>> out;
  for (const auto& m : run.models())
    out.push_back(argmax_rows(m));
  return out;
}

} // namespace detail

/// Counts samples by how many members were right. With `restrict_to`, only samples
/// that ensemble classified correctly are counted.
inline AgreementHistogram agreement_histogram(const EnsembleRun& run,
                                              const EnsembleResult* restrict_to = nullptr) {
  if (restrict_to)
    detail::check_result_matches(run, *restrict_to);
  const auto members = detail::member_predictions(run, restrict_to);
  AgreementHistogram h;
  h.restriction = detail::restriction_of(restrict_to);
  h.counts.assign(run.n_models() + 1, 0);
  for (std::size_t s = 0; s < run.n_samples(); ++s) {
    const ClassId t = run.truth()[s];
    if (restrict_to && restrict_to->predicted[s] != t)
      continue;
    std::size_t right = 0;
    for (const auto& m : members)
      right += m[s] == t;
    ++h.counts[right];
  }
  return h;
}

struct WrongAgreementSplit {
  Restriction restriction = Restriction::all;
  std::size_t same_wrong = 0;      // (R, W1, W1)
  std::size_t different_wrong = 0; // (R, W1, W2)
};

/// Among samples where exactly one of three members is right, whether the two wrong
/// members picked the same class. Defined for three-model runs only.
inline WrongAgreementSplit wrong_agreement_split(const EnsembleRun& run,
                                                 const EnsembleResult* restrict_to = nullptr) {
  if (run.n_models() != 3)
    throw ValidationError("unsupported configuration: the (R,W1,W1)/(R,W1,W2) split is "
                          "defined for exactly 3 models, run has " +
                          std::to_string(run.n_models()));
  if (restrict_to)
    detail::check_result_matches(run, *restrict_to);
  const auto members = detail::member_predictions(run, restrict_to);
  WrongAgreementSplit out;
  out.restriction = detail::restriction_of(restrict_to);
  for (std::size_t s = 0; s < run.n_samples(); ++s) {
    const ClassId t = run.truth()[s];
    if (restrict_to && restrict_to->predicted[s] != t)
      continue;
    std::vector<ClassId> wrong;
    for (const auto& m : members)
      if (m[s] != t)
        wrong.push_back(m[s]);
    if (wrong.size() != 2)
      continue;
    if (wrong[0] == wrong[1])
      ++out.same_wrong;
    else
      ++out.different_wrong;
  }
  return out;
}

} // namespace ensemblekit
