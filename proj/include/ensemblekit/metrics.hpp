#pragma once

#include "ensemblekit/error.hpp"
#include "ensemblekit/format.hpp"
#include "ensemblekit/predictions.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ensemblekit {

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0; // number of samples whose true class is this one
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

struct Misclassification {
  std::string sample_id;
  ClassId true_class;
  ClassId predicted;
};

struct MetricsReport {
  std::size_t n_samples = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  double error = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  std::vector<Misclassification> misclassified;
};

/// Precision, recall and F1 per class plus accuracy and macro-F1.
///
/// A ratio with a zero denominator is reported as 0. Macro-F1 averages over every
/// class of the label set, including classes absent from both truth and predictions.
/// `sample_ids`, when non-empty, names the entries of the misclassified list.
inline MetricsReport score(std::span<const ClassId> predicted, std::span<const ClassId> truth,
                           const LabelSet& labels, std::span<const std::string> sample_ids = {}) {
  if (predicted.size() != truth.size())
    throw ValidationError("score: " + std::to_string(predicted.size()) +
                          " predictions for " + std::to_string(truth.size()) + " samples");
  if (predicted.empty())
    throw ValidationError("score: no samples");
  if (!sample_ids.empty() && sample_ids.size() != truth.size())
    throw ValidationError("score: sample id count does not match sample count");

  const std::size_t k = labels.size();
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0), support(k, 0);
  MetricsReport report;
  report.n_samples = truth.size();
  for (std::size_t s = 0; s < truth.size(); ++s) {
    const ClassId t = truth[s];
    const ClassId p = predicted[s];
    if (!labels.valid(t) || !labels.valid(p))
      throw ValidationError("score: class id out of range at sample " + std::to_string(s));
    ++support[static_cast<std::size_t>(t)];
    if (p == t) {
      ++tp[static_cast<std::size_t>(t)];
      ++report.n_correct;
    } else {
      ++fn[static_cast<std::size_t>(t)];
      ++fp[static_cast<std::size_t>(p)];
      report.misclassified.push_back(
          {sample_ids.empty() ? std::to_string(s) : sample_ids[s], t, p});
    }
  }

  report.accuracy = static_cast<double>(report.n_correct) / static_cast<double>(report.n_samples);
  report.error = 1.0 - report.accuracy;

  double f1_sum = 0.0;
  report.per_class.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics m;
    m.name = labels.name(static_cast<ClassId>(c));
    m.support = support[c];
    m.true_positives = tp[c];
    m.false_positives = fp[c];
    m.false_negatives = fn[c];
    const std::size_t pred_pos = tp[c] + fp[c];
    const std::size_t real_pos = tp[c] + fn[c];
    m.precision = pred_pos ? static_cast<double>(tp[c]) / static_cast<double>(pred_pos) : 0.0;
    m.recall = real_pos ? static_cast<double>(tp[c]) / static_cast<double>(real_pos) : 0.0;
    const double pr = m.precision + m.recall;
    m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    f1_sum += m.f1;
    report.per_class.push_back(std::move(m));
  }
  report.macro_f1 = f1_sum / static_cast<double>(k);
  return report;
}

struct TopKCurve {
  /// accuracy[k-1] = A_k, macro_f1[k-1] = F_k for k = 1..K_max.
  std::vector<double> accuracy;
  std::vector<double> macro_f1;

  std::size_t k_max() const noexcept { return accuracy.size(); }
};

/// Position of class `c` in the descending ranking of `row`; ties rank the lower id first.
inline std::size_t rank_of(std::span<const double> row, ClassId c) noexcept {
  const double v = row[static_cast<std::size_t>(c)];
  std::size_t rank = 0;
  for (std::size_t b = 0; b < row.size(); ++b)
    if (row[b] > v || (row[b] == v && static_cast<ClassId>(b) < c))
      ++rank;
  return rank;
}

/// Top-k accuracy and top-k macro-F1 for k = 1..k_max.
///
/// For F_k the effective prediction of a sample is its true class when that class is
/// among the top k, and the top-1 class otherwise; F_1 is the plain macro-F1 and
/// F_K (K = number of classes) is 1.
inline TopKCurve top_k_curve(const ConfidenceMatrix& confidences, std::span<const ClassId> truth,
                             const LabelSet& labels, std::size_t k_max) {
  if (k_max < 1 || k_max > labels.size())
    throw ValidationError("top-k: K_max must lie in [1, " + std::to_string(labels.size()) +
                          "], got " + std::to_string(k_max));
  if (confidences.cols() != labels.size())
    throw ValidationError("top-k: confidence matrix has the wrong number of classes");
  if (confidences.rows() != truth.size())
    throw ValidationError("top-k: confidence rows do not match ground truth");
  const std::size_t n = truth.size();
  std::vector<std::size_t> true_rank(n);
  std::vector<ClassId> top1(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = confidences.row(s);
    true_rank[s] = rank_of(row, truth[s]);
    ClassId best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[static_cast<std::size_t>(best)])
        best = static_cast<ClassId>(c);
    top1[s] = best;
  }

  TopKCurve curve;
  std::vector<ClassId> effective(n);
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const bool hit = true_rank[s] < k;
      hits += hit;
      effective[s] = hit ? truth[s] : top1[s];
    }
    curve.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(n));
    curve.macro_f1.push_back(score(effective, truth, labels).macro_f1);
  }
  return curve;
}

struct ClassWeights {
  std::vector<double> weights;
  std::vector<std::size_t> counts;
  std::vector<std::string> warnings;
};

/// Balanced inverse-frequency weights w_c = N / (K_present * n_c); absent classes get 0.
inline ClassWeights class_weights(std::span<const ClassId> truth, const LabelSet& labels) {
  ClassWeights out;
  out.counts.assign(labels.size(), 0);
  for (ClassId t : truth) {
    if (!labels.valid(t))
      throw ValidationError("class_weights: class id out of range");
    ++out.counts[static_cast<std::size_t>(t)];
  }
  std::size_t present = 0;
  for (auto c : out.counts)
    present += c > 0;
  out.weights.assign(labels.size(), 0.0);
  const double total = static_cast<double>(truth.size());
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (out.counts[c] == 0) {
      out.warnings.push_back("class '" + labels.name(static_cast<ClassId>(c)) +
                             "' has no samples; weight set to 0");
      continue;
    }
    out.weights[c] =
        total / (static_cast<double>(present) * static_cast<double>(out.counts[c]));
  }
  return out;
}

struct BaselineComparison {
  double baseline_accuracy = 0.0;
  double new_accuracy = 0.0;
  double baseline_error = 0.0;
  double new_error = 0.0;
  double absolute_improvement = 0.0; // accuracy delta
  /// (new_error - baseline_error) / baseline_error; empty when the baseline error is 0.
  std::optional<double> relative_error_change;
};

inline BaselineComparison compare_to_baseline(double new_accuracy, double baseline_accuracy) {
  for (double a : {new_accuracy, baseline_accuracy})
    if (!(a >= 0.0 && a <= 1.0))
      throw ValidationError("accuracy must lie in [0, 1], got " + format_double(a));
  BaselineComparison out;
  out.baseline_accuracy = baseline_accuracy;
  out.new_accuracy = new_accuracy;
  out.baseline_error = 1.0 - baseline_accuracy;
  out.new_error = 1.0 - new_accuracy;
  out.absolute_improvement = new_accuracy - baseline_accuracy;
  if (out.baseline_error > 0.0)
    out.relative_error_change = (out.new_error - out.baseline_error) / out.baseline_error;
  return out;
}

inline BaselineComparison compare_to_baseline(const MetricsReport& report,
                                              double baseline_accuracy) {
  return compare_to_baseline(report.accuracy, baseline_accuracy);
}

} // namespace ensemblekit
