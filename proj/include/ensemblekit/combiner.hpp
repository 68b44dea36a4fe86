#pragma once

// Soft-voting combination of n confidence matrices: arithmetic mean or geometric
// mean (product rule), each followed by an argmax with lowest-class-id tie-breaking.

#include "ensemblekit/error.hpp"
#include "ensemblekit/format.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/predictions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ensemblekit {

enum class Rule { arithmetic, geometric };

inline constexpr double kDefaultGeometricFloor = 1e-12;

inline const char* rule_name(Rule r) noexcept {
  return r == Rule::arithmetic ? "arithmetic" : "geometric";
}

/// Index of the largest value; ties go to the lowest index.
inline ClassId argmax(std::span<const double> row) noexcept {
  ClassId best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[static_cast<std::size_t>(best)])
      best = static_cast<ClassId>(c);
  return best;
}

inline std::vector<ClassId> argmax_rows(const ConfidenceMatrix& m) {
  std::vector<ClassId> out(m.rows());
  for (std::size_t s = 0; s < m.rows(); ++s)
    out[s] = argmax(m.row(s));
  return out;
}

struct EnsembleResult {
  Rule rule;
  ConfidenceMatrix combined;
  std::vector<ClassId> predicted;
  /// per_model_predicted[i][s]: argmax of model i on sample s.
  std::vector<std::vector<ClassId>> per_model_predicted;
};

namespace detail {

// Sums in ascending value order so the result does not depend on model order.
inline double order_free_sum(std::span<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms)
    sum += t;
  return sum;
}

inline constexpr std::size_t kCombineBlock = 1024;

template <class CombineRow>
EnsembleResult combine_with(const EnsembleRun& run, Rule rule, unsigned threads,
                            std::string name, CombineRow&& combine_row) {
  const std::size_t n_samples = run.n_samples();
  const std::size_t k = run.n_classes();
  std::vector<double> combined(n_samples * k);
  parallel_blocks(n_samples, kCombineBlock, threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    std::vector<double> scratch(run.n_models());
                    for (std::size_t s = begin; s < end; ++s)
                      combine_row(s, std::span<double>(combined.data() + s * k, k), scratch);
                  });

  std::vector<std::vector<ClassId>> per_model;
  per_model.reserve(run.n_models());
  for (const auto& m : run.models())
    per_model.push_back(argmax_rows(m));

  ConfidenceMatrix matrix(std::move(name), run.sample_ids(), k, std::move(combined));
  auto predicted = argmax_rows(matrix);
  return EnsembleResult{rule, std::move(matrix), std::move(predicted), std::move(per_model)};
}

} // namespace detail

/// combined[s][a] = (1/n) sum_i c_i[s][a]
inline EnsembleResult combine_arithmetic(const EnsembleRun& run, unsigned threads = 1) {
  const double n = static_cast<double>(run.n_models());
  return detail::combine_with(
      run, Rule::arithmetic, threads, "ensemble_aa",
      [&](std::size_t s, std::span<double> out, std::vector<double>& scratch) {
        for (std::size_t c = 0; c < out.size(); ++c) {
          for (std::size_t i = 0; i < run.n_models(); ++i)
            scratch[i] = run.model(i).at(s, c);
          out[c] = detail::order_free_sum(scratch) / n;
        }
      });
}

/// Geometric mean of the members' confidences, renormalized to sum to 1 per row.
///
/// Computed in log space with each confidence floored at `floor` first, so a single
/// near-zero vote suppresses a class (veto) without producing log(0). The argmax is
/// that of the plain product rule.
inline EnsembleResult combine_geometric(const EnsembleRun& run,
                                        double floor = kDefaultGeometricFloor,
                                        unsigned threads = 1) {
  if (!(floor > 0.0) || floor > 1.0)
    throw ValidationError("geometric floor must lie in (0, 1], got " + format_double(floor));
  const double n = static_cast<double>(run.n_models());
  return detail::combine_with(
      run, Rule::geometric, threads, "ensemble_ga",
      [&](std::size_t s, std::span<double> out, std::vector<double>& scratch) {
        double max_log = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < out.size(); ++c) {
          for (std::size_t i = 0; i < run.n_models(); ++i)
            scratch[i] = std::log(std::max(run.model(i).at(s, c), floor));
          out[c] = detail::order_free_sum(scratch) / n;
          max_log = std::max(max_log, out[c]);
        }
        double total = 0.0;
        for (double& v : out) {
          v = std::exp(v - max_log);
          total += v;
        }
        for (double& v : out)
          v /= total;
      });
}

inline EnsembleResult combine(const EnsembleRun& run, Rule rule,
                              double floor = kDefaultGeometricFloor, unsigned threads = 1) {
  return rule == Rule::arithmetic ? combine_arithmetic(run, threads)
                                  : combine_geometric(run, floor, threads);
}

struct RuleAgreement {
  bool agree;
  ClassId aa_class;
  ClassId ga_class;
};

struct RuleComparison {
  std::vector<RuleAgreement> samples;
  std::size_t n_disagree = 0;
  /// Disagreements where exactly one rule is right.
  std::size_t aa_only_correct = 0;
  std::size_t ga_only_correct = 0;
};

/// Per-sample comparison of the arithmetic and geometric predictions.
inline RuleComparison compare_rules(const EnsembleRun& run, double floor = kDefaultGeometricFloor,
                                    unsigned threads = 1) {
  const auto aa = combine_arithmetic(run, threads);
  const auto ga = combine_geometric(run, floor, threads);
  RuleComparison out;
  out.samples.reserve(run.n_samples());
  for (std::size_t s = 0; s < run.n_samples(); ++s) {
    const ClassId a = aa.predicted[s];
    const ClassId g = ga.predicted[s];
    out.samples.push_back({a == g, a, g});
    if (a != g) {
      ++out.n_disagree;
      if (a == run.truth()[s])
        ++out.aa_only_correct;
      else if (g == run.truth()[s])
        ++out.ga_only_correct;
    }
  }
  return out;
}

} // namespace ensemblekit
