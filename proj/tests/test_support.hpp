#pragma once

#include "ensemblekit/predictions.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ektest {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(ENSEMBLEKIT_FIXTURES) / rel;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ensemblekit_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  ensemblekit::detail::write_text_file(p, text);
}

inline std::string read_file(const std::filesystem::path& p) {
  return ensemblekit::detail::read_text_file(p);
}

/// Random probability vector (flat Dirichlet via normalized exponentials).
template <class Rng>
std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto& x : v) {
    x = e(rng);
    sum += x;
  }
  for (auto& x : v)
    x /= sum;
  return v;
}

inline std::vector<std::string> class_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c)
    out.push_back("c" + std::to_string(c));
  return out;
}

inline std::vector<std::string> sample_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < n; ++s)
    out.push_back("s" + std::to_string(s));
  return out;
}

/// n models x samples x k classes of random probability rows with uniform random truth.
template <class Rng>
ensemblekit::EnsembleRun random_run(std::size_t n_models, std::size_t n_samples, std::size_t k,
                                    Rng& rng) {
  using namespace ensemblekit;
  LabelSet labels(class_names(k));
  const auto ids = sample_names(n_samples);
  std::vector<ConfidenceMatrix> models;
  for (std::size_t i = 0; i < n_models; ++i) {
    std::vector<double> values;
    for (std::size_t s = 0; s < n_samples; ++s) {
      auto row = random_simplex(k, rng);
      values.insert(values.end(), row.begin(), row.end());
    }
    models.emplace_back("m" + std::to_string(i), ids, k, std::move(values));
  }
  std::uniform_int_distribution<int> cls(0, static_cast<int>(k) - 1);
  std::vector<std::pair<std::string, ClassId>> truth;
  for (const auto& id : ids)
    truth.emplace_back(id, cls(rng));
  GroundTruth gt(labels, std::move(truth));
  return EnsembleRun(std::move(labels), std::move(models), gt);
}

/// Run built from explicit rows: rows[i][s] is model i's vector on sample s.
inline ensemblekit::EnsembleRun
run_from_rows(const std::vector<std::vector<std::vector<double>>>& rows,
              const std::vector<int>& truth) {
  using namespace ensemblekit;
  const std::size_t k = rows.at(0).at(0).size();
  const std::size_t n = rows.at(0).size();
  LabelSet labels(class_names(k));
  const auto ids = sample_names(n);
  std::vector<ConfidenceMatrix> models;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> values;
    for (const auto& r : rows[i])
      values.insert(values.end(), r.begin(), r.end());
    models.emplace_back("m" + std::to_string(i), ids, k, std::move(values));
  }
  std::vector<std::pair<std::string, ClassId>> gt;
  for (std::size_t s = 0; s < n; ++s)
    gt.emplace_back(ids[s], truth.at(s));
  GroundTruth g(labels, std::move(gt));
  return EnsembleRun(std::move(labels), std::move(models), g);
}

} // namespace ektest
