#pragma once

// Domain types for per-model confidence matrices, plus CSV / manifest I/O.

#include "ensemblekit/detail/csv.hpp"
#include "ensemblekit/error.hpp"
#include "ensemblekit/format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ensemblekit {

inline constexpr double kDefaultRowSumTol = 1e-3;
inline constexpr double kStrictRowSumTol = 1e-9;
/// Values outside [0,1] by at most this much are clamped; anything further is rejected.
inline constexpr double kClampTol = 1e-9;

using ClassId = int;

class LabelSet {
public:
  explicit LabelSet(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.empty())
      throw ValidationError("label set is empty");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i].empty())
        throw ValidationError("label set contains an empty class name");
      if (!index_.emplace(classes_[i], static_cast<ClassId>(i)).second)
        throw ValidationError("duplicate class name '" + classes_[i] + "'");
    }
  }

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<std::string>& names() const noexcept { return classes_; }
  const std::string& name(ClassId id) const { return classes_.at(static_cast<std::size_t>(id)); }

  std::optional<ClassId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
      return std::nullopt;
    return it->second;
  }

  bool valid(ClassId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < classes_.size();
  }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.classes_ == b.classes_; }

private:
  std::vector<std::string> classes_;
  std::unordered_map<std::string, ClassId> index_;
};

/// One model's confidences: rows are samples, columns are classes, values in [0,1].
///
/// Construction checks shape, finiteness, range and sample-id uniqueness. Row sums are
/// checked separately (see check_row_sums) so that near-valid dumps can still be
/// loaded and repaired with renormalize().
class ConfidenceMatrix {
public:
  ConfidenceMatrix(std::string model_name, std::vector<std::string> sample_ids,
                   std::size_t n_classes, std::vector<double> values)
      : model_name_(std::move(model_name)), sample_ids_(std::move(sample_ids)),
        n_classes_(n_classes), values_(std::move(values)) {
    if (n_classes_ == 0)
      throw ValidationError("model '" + model_name_ + "': zero classes");
    if (values_.size() != sample_ids_.size() * n_classes_)
      throw ValidationError("model '" + model_name_ + "': value count " +
                            std::to_string(values_.size()) + " does not match " +
                            std::to_string(sample_ids_.size()) + " samples x " +
                            std::to_string(n_classes_) + " classes");
    index_.reserve(sample_ids_.size());
    for (std::size_t s = 0; s < sample_ids_.size(); ++s)
      if (!index_.emplace(sample_ids_[s], s).second)
        throw ValidationError("model '" + model_name_ + "': duplicate sample id '" +
                              sample_ids_[s] + "'");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      double& v = values_[i];
      if (!std::isfinite(v))
        throw ValidationError(describe(i) + ": non-finite confidence");
      if (v < 0.0 || v > 1.0) {
        if (v < -kClampTol || v > 1.0 + kClampTol)
          throw ValidationError(describe(i) + ": confidence " + format_double(v) +
                                " outside [0,1]");
        v = std::clamp(v, 0.0, 1.0);
        ++clamped_;
      }
    }
  }

  const std::string& model_name() const noexcept { return model_name_; }
  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
  std::size_t rows() const noexcept { return sample_ids_.size(); }
  std::size_t cols() const noexcept { return n_classes_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const double> row(std::size_t s) const noexcept {
    return {values_.data() + s * n_classes_, n_classes_};
  }
  double at(std::size_t s, std::size_t c) const noexcept { return values_[s * n_classes_ + c]; }

  std::optional<std::size_t> find_sample(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      return std::nullopt;
    return it->second;
  }

  /// Number of entries that were within kClampTol outside [0,1] and got clamped.
  std::size_t clamped_count() const noexcept { return clamped_; }

  ConfidenceMatrix renamed(std::string name) const {
    ConfidenceMatrix copy = *this;
    copy.model_name_ = std::move(name);
    return copy;
  }

  friend bool operator==(const ConfidenceMatrix& a, const ConfidenceMatrix& b) {
    return a.model_name_ == b.model_name_ && a.n_classes_ == b.n_classes_ &&
           a.sample_ids_ == b.sample_ids_ && a.values_ == b.values_;
  }

private:
  std::string describe(std::size_t flat) const {
    const std::size_t s = flat / n_classes_;
    return "model '" + model_name_ + "', sample '" + sample_ids_[s] + "', class " +
           std::to_string(flat % n_classes_);
  }

  std::string model_name_;
  std::vector<std::string> sample_ids_;
  std::size_t n_classes_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t clamped_ = 0;
};

struct RowSumDeviation {
  std::size_t row;
  double sum;
};

/// Row whose sum deviates most from 1 (first such row on ties).
inline std::optional<RowSumDeviation> worst_row_sum(const ConfidenceMatrix& m) {
  std::optional<RowSumDeviation> worst;
  double worst_dev = -1.0;
  for (std::size_t s = 0; s < m.rows(); ++s) {
    double sum = 0.0;
    for (double v : m.row(s))
      sum += v;
    const double dev = std::abs(sum - 1.0);
    if (dev > worst_dev) {
      worst_dev = dev;
      worst = RowSumDeviation{s, sum};
    }
  }
  return worst;
}

inline void check_row_sums(const ConfidenceMatrix& m, double tol) {
  auto worst = worst_row_sum(m);
  if (worst && std::abs(worst->sum - 1.0) > tol)
    throw ValidationError("model '" + m.model_name() + "': row sum " + format_trimmed(worst->sum, 6) + " exceeds tolerance " + format_double(tol) + " (worst row: sample '" +
                          m.sample_ids()[worst->row] + "')");
}

/// Divides every row by its sum. Argmax of each row is unchanged.
inline ConfidenceMatrix renormalize(const ConfidenceMatrix& m) {
  std::vector<double> out(m.values().begin(), m.values().end());
  for (std::size_t s = 0; s < m.rows(); ++s) {
    double sum = 0.0;
    for (double v : m.row(s))
      sum += v;
    if (!(sum > 0.0))
      throw ValidationError("model '" + m.model_name() + "', sample '" + m.sample_ids()[s] +
                            "': cannot renormalize a row with sum " + format_double(sum));
    for (std::size_t c = 0; c < m.cols(); ++c)
      out[s * m.cols() + c] /= sum;
  }
  return ConfidenceMatrix(m.model_name(), m.sample_ids(), m.cols(), std::move(out));
}

/// Reorders rows to `order`. The sample sets must be identical.
inline ConfidenceMatrix reindex(const ConfidenceMatrix& m, std::span<const std::string> order) {
  if (order.size() != m.rows())
    throw ValidationError("sample-set mismatch: model '" + m.model_name() + "' has " +
                          std::to_string(m.rows()) + " samples, expected " +
                          std::to_string(order.size()));
  std::vector<double> out;
  out.reserve(m.values().size());
  for (const auto& id : order) {
    auto s = m.find_sample(id);
    if (!s)
      throw ValidationError("sample-set mismatch: model '" + m.model_name() +
                            "' lacks sample '" + id + "'");
    auto r = m.row(*s);
    out.insert(out.end(), r.begin(), r.end());
  }
  return ConfidenceMatrix(m.model_name(), std::vector<std::string>(order.begin(), order.end()),
                          m.cols(), std::move(out));
}

class GroundTruth {
public:
  GroundTruth(const LabelSet& labels, std::vector<std::pair<std::string, ClassId>> entries) {
    index_.reserve(entries.size());
    for (auto& [id, cls] : entries) {
      if (!labels.valid(cls))
        throw ValidationError("ground truth for sample '" + id + "': invalid class id " +
                              std::to_string(cls));
      if (!index_.emplace(id, cls).second)
        throw ValidationError("ground truth: duplicate sample id '" + id + "'");
    }
  }

  std::optional<ClassId> find(const std::string& sample_id) const {
    auto it = index_.find(sample_id);
    if (it == index_.end())
      return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return index_.size(); }

private:
  std::unordered_map<std::string, ClassId> index_;
};

/// n >= 1 models over one label set and one sample set, with ground truth.
///
/// Models are re-indexed to the first model's sample order; truth is stored aligned
/// to that order.
class EnsembleRun {
public:
  EnsembleRun(LabelSet labels, std::vector<ConfidenceMatrix> models, const GroundTruth& truth)
      : labels_(std::move(labels)) {
    if (models.empty())
      throw ValidationError("ensemble run needs at least one model");
    std::unordered_map<std::string, int> names;
    for (const auto& m : models) {
      if (m.cols() != labels_.size())
        throw ValidationError("class-set mismatch: model '" + m.model_name() + "' has " +
                              std::to_string(m.cols()) + " columns, label set has " +
                              std::to_string(labels_.size()));
      if (!names.emplace(m.model_name(), 0).second)
        throw ValidationError("duplicate model name '" + m.model_name() + "'");
    }
    const auto order = models.front().sample_ids();
    models_.reserve(models.size());
    for (auto& m : models) {
      if (m.sample_ids() == order)
        models_.push_back(std::move(m));
      else
        models_.push_back(reindex(m, order));
    }
    truth_.reserve(order.size());
    for (const auto& id : order) {
      auto cls = truth.find(id);
      if (!cls)
        throw ValidationError("ground truth does not cover sample '" + id + "'");
      truth_.push_back(*cls);
    }
  }

  const LabelSet& labels() const noexcept { return labels_; }
  const std::vector<ConfidenceMatrix>& models() const noexcept { return models_; }
  const ConfidenceMatrix& model(std::size_t i) const { return models_.at(i); }
  std::size_t n_models() const noexcept { return models_.size(); }
  std::size_t n_samples() const noexcept { return truth_.size(); }
  std::size_t n_classes() const noexcept { return labels_.size(); }
  const std::vector<std::string>& sample_ids() const noexcept {
    return models_.front().sample_ids();
  }
  /// True class of each sample, in sample order.
  std::span<const ClassId> truth() const noexcept { return truth_; }

  std::optional<std::size_t> find_model(const std::string& name) const {
    for (std::size_t i = 0; i < models_.size(); ++i)
      if (models_[i].model_name() == name)
        return i;
    return std::nullopt;
  }

private:
  LabelSet labels_;
  std::vector<ConfidenceMatrix> models_;
  std::vector<ClassId> truth_;
};

// ---------------------------------------------------------------------------
// File formats

struct LoadOptions {
  double row_sum_tol = kDefaultRowSumTol;
  /// Renormalize rows after the tolerance check.
  bool renormalize = false;
};

inline ConfidenceMatrix read_confidence_csv(const std::filesystem::path& path,
                                            const LabelSet& labels, std::string model_name) {
  const auto table = detail::read_csv(path);
  const auto& header = table.header;
  if (header.empty() || header[0] != "sample_id")
    throw ValidationError(path.string() + ": header must start with 'sample_id'");
  if (header.size() - 1 != labels.size())
    throw ValidationError("class-set mismatch: " + path.string() + " has " +
                          std::to_string(header.size() - 1) + " class columns, manifest has " +
                          std::to_string(labels.size()));
  // column -> class id; the file may order classes differently
  std::vector<std::size_t> column_class(header.size() - 1);
  std::vector<bool> seen(labels.size(), false);
  for (std::size_t j = 1; j < header.size(); ++j) {
    auto id = labels.find(header[j]);
    if (!id)
      throw ValidationError("class-set mismatch: " + path.string() + " has unknown class '" +
                            header[j] + "'");
    if (seen[*id])
      throw ValidationError(path.string() + ": duplicate class column '" + header[j] + "'");
    seen[*id] = true;
    column_class[j - 1] = static_cast<std::size_t>(*id);
  }

  const std::size_t k = labels.size();
  std::vector<std::string> ids;
  std::vector<double> values(table.rows.size() * k);
  ids.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ids.push_back(row[0]);
    for (std::size_t j = 1; j < row.size(); ++j) {
      double v;
      if (!parse_double(row[j], v))
        throw ValidationError(path.string() + ":" + std::to_string(table.line_numbers[r]) +
                              ": cannot parse '" + row[j] + "' as a number");
      values[r * k + column_class[j - 1]] = v;
    }
  }
  return ConfidenceMatrix(std::move(model_name), std::move(ids), k, std::move(values));
}

inline GroundTruth read_labels_csv(const std::filesystem::path& path, const LabelSet& labels) {
  const auto table = detail::read_csv(path);
  if (table.header.size() != 2 || table.header[0] != "sample_id" ||
      table.header[1] != "true_class")
    throw ValidationError(path.string() + ": header must be 'sample_id,true_class'");
  std::vector<std::pair<std::string, ClassId>> entries;
  entries.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto id = labels.find(table.rows[r][1]);
    if (!id)
      throw ValidationError(path.string() + ":" + std::to_string(table.line_numbers[r]) +
                            ": unknown class '" + table.rows[r][1] + "' in labels");
    entries.emplace_back(table.rows[r][0], *id);
  }
  return GroundTruth(labels, std::move(entries));
}

struct ManifestModel {
  std::string name;
  std::filesystem::path path;
};

struct Manifest {
  std::vector<std::string> classes;
  std::filesystem::path labels;
  std::vector<ManifestModel> models;
};

/// Parses a manifest; relative paths are resolved against the manifest's directory.
inline Manifest read_manifest(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  Manifest m;
  try {
    if (!j.is_object())
      throw ValidationError(path.string() + ": manifest must be a JSON object");
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.labels = resolve(j.at("labels").get<std::string>());
    for (const auto& entry : j.at("models"))
      m.models.push_back({entry.at("name").get<std::string>(),
                         resolve(entry.at("path").get<std::string>())});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed manifest: " + e.what());
  }
  if (m.models.empty())
    throw ValidationError(path.string() + ": manifest lists no models");
  return m;
}

/// Loads and validates a manifest and everything it references.
/// Non-fatal findings (clamped values) are appended to `warnings` when given.
inline EnsembleRun load_run(const std::filesystem::path& manifest_path,
                            const LoadOptions& options = {},
                            std::vector<std::string>* warnings = nullptr) {
  const Manifest manifest = read_manifest(manifest_path);
  LabelSet labels(manifest.classes);
  std::vector<ConfidenceMatrix> models;
  models.reserve(manifest.models.size());
  for (const auto& entry : manifest.models) {
    auto m = read_confidence_csv(entry.path, labels, entry.name);
    if (m.clamped_count() > 0 && warnings)
      warnings->push_back("model '" + m.model_name() + "': clamped " +
                          std::to_string(m.clamped_count()) +
                          " value(s) lying within 1e-9 outside [0,1]");
    check_row_sums(m, options.row_sum_tol);
    models.push_back(options.renormalize ? renormalize(m) : std::move(m));
  }
  const GroundTruth truth = read_labels_csv(manifest.labels, labels);
  return EnsembleRun(std::move(labels), std::move(models), truth);
}

inline std::string confidence_csv_text(const ConfidenceMatrix& m, const LabelSet& labels) {
  std::string out = "sample_id";
  for (const auto& name : labels.names())
    out += "," + detail::quote_csv_field(name);
  out += "\n";
  for (std::size_t s = 0; s < m.rows(); ++s) {
    out += detail::quote_csv_field(m.sample_ids()[s]);
    for (double v : m.row(s)) {
      out += ",";
      out += format_double(v);
    }
    out += "\n";
  }
  return out;
}

inline void write_confidence_csv(const std::filesystem::path& path, const ConfidenceMatrix& m,
                                 const LabelSet& labels) {
  detail::write_text_file(path, confidence_csv_text(m, labels));
}

inline void write_labels_csv(const std::filesystem::path& path, const EnsembleRun& run) {
  std::string out = "sample_id,true_class\n";
  for (std::size_t s = 0; s < run.n_samples(); ++s)
    out += detail::quote_csv_field(run.sample_ids()[s]) + "," +
           detail::quote_csv_field(run.labels().name(run.truth()[s])) + "\n";
  detail::write_text_file(path, out);
}

/// Writes manifest.json, labels.csv and one CSV per model into `dir` (created if needed).
/// Returns the manifest path.
inline std::filesystem::path write_run(const std::filesystem::path& dir, const EnsembleRun& run) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError(dir.string(), "cannot create directory: " + ec.message());
  nlohmann::ordered_json j;
  j["classes"] = run.labels().names();
  j["labels"] = "labels.csv";
  j["models"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < run.n_models(); ++i) {
    const auto& m = run.model(i);
    std::string file = "model_" + std::to_string(i) + ".csv";
    write_confidence_csv(dir / file, m, run.labels());
    j["models"].push_back({{"name", m.model_name()}, {"path", file}});
  }
  write_labels_csv(dir / "labels.csv", run);
  const auto manifest = dir / "manifest.json";
  detail::write_text_file(manifest, j.dump(2) + "\n");
  return manifest;
}

} // namespace ensemblekit
