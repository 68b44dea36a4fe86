#pragma once

// JSON serialization of analysis results, plus the human-readable summary table and
// plot-data CSVs. Tables round to 3 decimals; JSON and CSV keep full precision.

#include "ensemblekit/combiner.hpp"
#include "ensemblekit/diversity.hpp"
#include "ensemblekit/format.hpp"
#include "ensemblekit/gaussmodel.hpp"
#include "ensemblekit/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace ensemblekit {

using ordered_json = nlohmann::ordered_json;

inline ordered_json baseline_to_json(const BaselineComparison& b) {
  ordered_json j;
  j["baseline_accuracy"] = b.baseline_accuracy;
  j["baseline_error"] = b.baseline_error;
  j["new_error"] = b.new_error;
  j["absolute_improvement"] = b.absolute_improvement;
  if (b.relative_error_change)
    j["relative_error_change"] = *b.relative_error_change;
  else
    j["relative_error_change"] = nullptr; // undefined for a perfect baseline
  return j;
}

inline ordered_json top_k_to_json(const TopKCurve& curve) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < curve.k_max(); ++i)
    arr.push_back({{"k", i + 1}, {"accuracy", curve.accuracy[i]}, {"macro_f1", curve.macro_f1[i]}});
  return arr;
}

inline ordered_json metrics_to_json(const MetricsReport& r, const LabelSet& labels,
                                    const std::optional<TopKCurve>& top_k,
                                    const std::optional<BaselineComparison>& baseline) {
  ordered_json j;
  j["accuracy"] = r.accuracy;
  j["error"] = r.error;
  j["macro_f1"] = r.macro_f1;
  j["n_samples"] = r.n_samples;
  j["n_correct"] = r.n_correct;
  ordered_json per_class = ordered_json::array();
  for (const auto& c : r.per_class)
    per_class.push_back({{"class", c.name},
                         {"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support}});
  j["per_class"] = std::move(per_class);
  j["top_k"] = top_k ? top_k_to_json(*top_k) : ordered_json::array();
  ordered_json mis = ordered_json::array();
  for (const auto& m : r.misclassified)
    mis.push_back({{"sample_id", m.sample_id},
                   {"true", labels.name(m.true_class)},
                   {"predicted", labels.name(m.predicted)}});
  j["misclassified"] = std::move(mis);
  j["baseline_comparison"] = baseline ? baseline_to_json(*baseline) : ordered_json(nullptr);
  return j;
}

inline ordered_json class_weights_to_json(const ClassWeights& w, const LabelSet& labels) {
  ordered_json arr = ordered_json::array();
  for (std::size_t c = 0; c < labels.size(); ++c)
    arr.push_back({{"class", labels.name(static_cast<ClassId>(c))},
                   {"count", w.counts[c]},
                   {"weight", w.weights[c]}});
  return arr;
}

inline ordered_json histogram_to_json(const AgreementHistogram& h) {
  ordered_json j;
  j["restriction"] = restriction_name(h.restriction);
  ordered_json counts;
  const std::size_t n = h.counts.size() - 1;
  // most-right pattern first: RRR, RRW, RWW, WWW
  for (std::size_t r = n + 1; r-- > 0;)
    counts[pattern_label(r, n)] = h.counts[r];
  j["counts"] = std::move(counts);
  j["total"] = h.total();
  return j;
}

inline ordered_json split_to_json(const WrongAgreementSplit& s) {
  return {{"restriction", restriction_name(s.restriction)},
          {"R_W1_W1", s.same_wrong},
          {"R_W1_W2", s.different_wrong}};
}

inline ordered_json similarity_to_json(const SimilarityReport& s) {
  ordered_json j;
  j["mean_S"] = s.mean_S;
  j["se_S"] = s.standard_error;
  j["sd_S"] = s.standard_deviation;
  j["n_pairs"] = s.n_pairs;
  return j;
}

inline ordered_json scenario_to_json(const ScenarioResult& r) {
  ordered_json j;
  j["p_mis_B"] = r.p_mis_B;
  j["p_mis_C"] = r.p_mis_C;
  if (std::isfinite(r.ratio_R))
    j["ratio_R"] = r.ratio_R;
  else
    j["ratio_R"] = "inf";
  j["p_correct_channel"] = r.p_correct_channel;
  j["degenerate"] = r.degenerate;
  return j;
}

inline ordered_json simulation_to_json(const SimulationResult& r) {
  ordered_json j;
  j["n_replicas"] = r.n_replicas;
  j["mis_B"] = r.mis_B;
  j["mis_C"] = r.mis_C;
  j["p_mis_B"] = r.p_mis_B;
  j["p_mis_C"] = r.p_mis_C;
  return j;
}

/// One line of the summary table.
struct ReportRow {
  std::string name;
  MetricsReport metrics;
  std::optional<BaselineComparison> baseline;
  std::optional<TopKCurve> top_k;
};

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width)
    s.append(width - s.size(), ' ');
  return s;
}

/// Fixed-width summary; a relative error column appears when any row has a baseline.
inline std::string render_table(const std::vector<ReportRow>& rows) {
  const bool with_baseline =
      std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.baseline; });
  std::size_t name_w = 6;
  for (const auto& r : rows)
    name_w = std::max(name_w, r.name.size());
  name_w += 2;

  std::vector<std::string> head{"accuracy", "error", "macro_f1"};
  if (with_baseline) {
    head.insert(head.end(), {"base_err", "abs_impr", "rel_err"});
  }
  std::string out = pad_right("report", name_w);
  for (const auto& h : head)
    out += pad_right(h, 11);
  while (!out.empty() && out.back() == ' ')
    out.pop_back();
  out += "\n";
  for (const auto& r : rows) {
    std::string line = pad_right(r.name, name_w);
    line += pad_right(format_fixed(r.metrics.accuracy, 3), 11);
    line += pad_right(format_fixed(r.metrics.error, 3), 11);
    line += pad_right(format_fixed(r.metrics.macro_f1, 3), 11);
    if (with_baseline) {
      if (r.baseline) {
        line += pad_right(format_fixed(r.baseline->baseline_error, 3), 11);
        line += pad_right(format_percent(r.baseline->absolute_improvement), 11);
        line += pad_right(r.baseline->relative_error_change
                              ? format_percent(*r.baseline->relative_error_change)
                              : std::string("undefined"),
                          11);
      } else {
        line += pad_right("-", 11) + pad_right("-", 11) + pad_right("-", 11);
      }
    }
    while (!line.empty() && line.back() == ' ')
      line.pop_back();
    out += line + "\n";
  }
  return out;
}

/// Plot data for error bars: one row per report, full precision.
inline std::string errors_csv(const std::vector<ReportRow>& rows) {
  std::string out = "report,accuracy,error,macro_f1,baseline_error,relative_error_change\n";
  for (const auto& r : rows) {
    out += detail::quote_csv_field(r.name) + "," + format_double(r.metrics.accuracy) + "," +
           format_double(r.metrics.error) + "," + format_double(r.metrics.macro_f1) + ",";
    if (r.baseline) {
      out += format_double(r.baseline->baseline_error) + ",";
      if (r.baseline->relative_error_change)
        out += format_double(*r.baseline->relative_error_change);
    } else {
      out += ",";
    }
    out += "\n";
  }
  return out;
}

/// One row per k: k, A_k, F_k.
inline std::string top_k_csv(const TopKCurve& curve) {
  std::string out = "k,accuracy,macro_f1\n";
  for (std::size_t i = 0; i < curve.k_max(); ++i)
    out += std::to_string(i + 1) + "," + format_double(curve.accuracy[i]) + "," +
           format_double(curve.macro_f1[i]) + "\n";
  return out;
}

inline std::string predictions_csv(const EnsembleResult& r, const LabelSet& labels) {
  std::string out = "sample_id,predicted_class\n";
  for (std::size_t s = 0; s < r.predicted.size(); ++s)
    out += detail::quote_csv_field(r.combined.sample_ids()[s]) + "," +
           detail::quote_csv_field(labels.name(r.predicted[s])) + "\n";
  return out;
}

} // namespace ensemblekit
