#pragma once

// Gaussian model of rank-sorted confidence vectors and the misclassification
// probabilities it implies for a three-model arithmetic ensemble in which one member
// is right and the two wrong members disagree, i.e. the (R, W1, W2) pattern.
//
// Each member's sorted confidence vector is modelled as C + sigma * z with
// independent standard normal components. With the true class A and wrong classes
// B, C, the members assign ranks as
//
//            A    B    C
//     m0:   C0   C1   C2
//     m1:   C1   C0   C2
//     m2:   C1   C2   C0
//
// so that 3*(c_ens(A) - c_ens(B)) ~ N(C1 - C2, 2s0^2 + 3s1^2 + s2^2) and
//         3*(c_ens(A) - c_ens(C)) ~ N(2(C1 - C2), 2s0^2 + 2s1^2 + 2s2^2).

#include "ensemblekit/combiner.hpp"
#include "ensemblekit/detail/csv.hpp"
#include "ensemblekit/error.hpp"
#include "ensemblekit/format.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/predictions.hpp"
#include "ensemblekit/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace ensemblekit {

/// Rank-sorted mean confidence C (non-increasing) and per-rank standard deviation.
class ConfidenceProfile {
public:
  static constexpr double kSumTol = 1e-6;

  ConfidenceProfile(std::vector<double> mean, std::vector<double> sigma)
      : mean_(std::move(mean)), sigma_(std::move(sigma)) {
    if (mean_.empty())
      throw ValidationError("confidence profile is empty");
    if (mean_.size() != sigma_.size())
      throw ValidationError("confidence profile: C has " + std::to_string(mean_.size()) +
                            " components but sigma has " + std::to_string(sigma_.size()));
    double sum = 0.0;
    for (std::size_t r = 0; r < mean_.size(); ++r) {
      if (!std::isfinite(mean_[r]) || mean_[r] < 0.0 || mean_[r] > 1.0)
        throw ValidationError("confidence profile: C[" + std::to_string(r) + "] = " +
                              format_double(mean_[r]) + " outside [0,1]");
      if (!std::isfinite(sigma_[r]) || sigma_[r] < 0.0)
        throw ValidationError("confidence profile: sigma[" + std::to_string(r) +
                              "] must be finite and >= 0");
      if (r > 0 && mean_[r] > mean_[r - 1])
        throw ValidationError("confidence profile: C must be non-increasing (C[" +
                              std::to_string(r) + "] > C[" + std::to_string(r - 1) + "])");
      sum += mean_[r];
    }
    if (std::abs(sum - 1.0) > kSumTol)
      throw ValidationError("confidence profile: C sums to " + format_double(sum) +
                            ", expected 1 within 1e-6");
  }

  std::size_t size() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& sigma() const noexcept { return sigma_; }
  double mean(std::size_t rank) const { return mean_.at(rank); }
  double sigma(std::size_t rank) const { return sigma_.at(rank); }

private:
  std::vector<double> mean_;
  std::vector<double> sigma_;
};

enum class SigmaDivisor { population, sample };

/// Sorts every row in descending order, then takes per-rank mean and standard deviation.
/// Rows are scaled to sum to exactly 1 first, so files within the loader's row-sum
/// tolerance still give a profile whose means sum to 1.
inline ConfidenceProfile estimate_profile(const ConfidenceMatrix& m,
                                          SigmaDivisor divisor = SigmaDivisor::population) {
  if (m.rows() < 2)
    throw ValidationError("estimate_profile needs at least 2 samples, got " +
                          std::to_string(m.rows()));
  const std::size_t k = m.cols();
  std::vector<double> sorted(m.values().begin(), m.values().end());
  for (std::size_t s = 0; s < m.rows(); ++s) {
    const auto first = sorted.begin() + static_cast<std::ptrdiff_t>(s * k);
    const auto last = first + static_cast<std::ptrdiff_t>(k);
    std::sort(first, last, std::greater<>{});
    const double sum = std::accumulate(first, last, 0.0);
    if (!(sum > 0.0))
      throw ValidationError("estimate_profile: sample '" + m.sample_ids()[s] +
                            "' has an all-zero confidence row");
    if (sum != 1.0)
      std::for_each(first, last, [sum](double& v) { v /= sum; });
  }

  const double n = static_cast<double>(m.rows());
  std::vector<double> mean(k, 0.0), sigma(k, 0.0);
  for (std::size_t s = 0; s < m.rows(); ++s)
    for (std::size_t r = 0; r < k; ++r)
      mean[r] += sorted[s * k + r];
  for (auto& v : mean)
    v /= n;
  for (std::size_t s = 0; s < m.rows(); ++s)
    for (std::size_t r = 0; r < k; ++r) {
      const double d = sorted[s * k + r] - mean[r];
      sigma[r] += d * d;
    }
  const double denom = divisor == SigmaDivisor::population ? n : n - 1.0;
  for (auto& v : sigma)
    v = std::sqrt(v / denom);
  // Rounding can leave adjacent means out of order by an ulp when they are equal.
  for (std::size_t r = 1; r < k; ++r)
    mean[r] = std::min(mean[r], mean[r - 1]);
  return ConfidenceProfile(std::move(mean), std::move(sigma));
}

struct ScenarioResult {
  double p_mis_B = 0.0;           // P(c_ens(A) < c_ens(B))
  double p_mis_C = 0.0;           // P(c_ens(A) < c_ens(C))
  double ratio_R = 0.0;           // (C1 - C2) / sqrt(2s0^2 + 3s1^2 + s2^2)
  double p_correct_channel = 0.0; // 1 - p_mis_B = (1 + erf(R / sqrt 2)) / 2
  bool degenerate = false;        // zero spread and C1 == C2
};

/// Closed-form (R, W1, W2) probabilities for a profile with at least three ranks.
inline ScenarioResult scenario_probabilities(const ConfidenceProfile& profile) {
  if (profile.size() < 3)
    throw ValidationError("scenario needs at least 3 classes, profile has " +
                          std::to_string(profile.size()));
  const double s0 = profile.sigma(0), s1 = profile.sigma(1), s2 = profile.sigma(2);
  const double gap = profile.mean(1) - profile.mean(2);
  const double var_b = 2 * s0 * s0 + 3 * s1 * s1 + s2 * s2;
  const double var_c = 2 * s0 * s0 + 2 * s1 * s1 + 2 * s2 * s2;

  ScenarioResult out;
  // (1 + erf(-x)) / 2 == erfc(x) / 2, which keeps precision in the tail.
  if (var_b > 0.0) {
    out.p_mis_B = 0.5 * std::erfc(gap / std::sqrt(2.0 * var_b));
    out.ratio_R = gap / std::sqrt(var_b);
  } else {
    out.p_mis_B = gap > 0.0 ? 0.0 : 0.5;
    out.ratio_R = gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  if (var_c > 0.0)
    out.p_mis_C = 0.5 * std::erfc(2.0 * gap / std::sqrt(2.0 * var_c));
  else
    out.p_mis_C = gap > 0.0 ? 0.0 : 0.5;
  out.degenerate = var_b == 0.0 && gap == 0.0;
  out.p_correct_channel = 1.0 - out.p_mis_B;
  return out;
}

struct SimulationResult {
  std::uint64_t n_replicas = 0;
  std::uint64_t mis_B = 0;
  std::uint64_t mis_C = 0;
  double p_mis_B = 0.0;
  double p_mis_C = 0.0;
};

namespace detail {

inline constexpr std::size_t kReplicaBlock = std::size_t{1} << 15;

// Draws one member's full sorted confidence vector, clipped at 0 and renormalized.
template <class Rng>
void draw_legal_vector(const ConfidenceProfile& p, Rng& rng, std::normal_distribution<double>& z,
                       std::vector<double>& out) {
  double sum = 0.0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    out[r] = std::max(0.0, p.mean(r) + p.sigma(r) * z(rng));
    sum += out[r];
  }
  if (sum > 0.0)
    for (auto& v : out)
      v /= sum;
  else
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
}

} // namespace detail

/// Monte Carlo estimate of the (R, W1, W2) misclassification probabilities.
///
/// With `renormalize` false, component draws are raw Gaussians (they may leave [0,1])
/// and the estimate converges to scenario_probabilities(). With `renormalize` true,
/// each member's full vector is clipped at 0 and renormalized before ensembling.
/// Replicas are split into fixed blocks with counter-derived substreams, so the
/// counts depend only on (seed, n_replicas), never on `threads`.
inline SimulationResult simulate_rww(const ConfidenceProfile& profile, std::uint64_t n_replicas,
                                     std::uint64_t seed, bool renormalize = false,
                                     unsigned threads = 1) {
  if (n_replicas < 1)
    throw ValidationError("simulation needs at least one replica");
  if (profile.size() < 3)
    throw ValidationError("scenario needs at least 3 classes, profile has " +
                          std::to_string(profile.size()));
  const std::size_t n = static_cast<std::size_t>(n_replicas);
  const std::size_t n_blocks = (n + detail::kReplicaBlock - 1) / detail::kReplicaBlock;
  std::vector<std::uint64_t> block_b(n_blocks, 0), block_c(n_blocks, 0);

  const double m0 = profile.mean(0), m1 = profile.mean(1), m2 = profile.mean(2);
  const double s0 = profile.sigma(0), s1 = profile.sigma(1), s2 = profile.sigma(2);

  parallel_blocks(n, detail::kReplicaBlock, threads,
                  [&](std::size_t block, std::size_t begin, std::size_t end) {
                    auto rng = substream(seed, block);
                    std::normal_distribution<double> z(0.0, 1.0);
                    std::vector<double> v0(profile.size()), v1(profile.size()),
                        v2(profile.size());
                    std::uint64_t hits_b = 0, hits_c = 0;
                    for (std::size_t i = begin; i < end; ++i) {
                      double a, b, c;
                      if (!renormalize) {
                        // member m0, m1, m2 values for classes A, B, C
                        const double a0 = m0 + s0 * z(rng), b0 = m1 + s1 * z(rng),
                                     c0 = m2 + s2 * z(rng);
                        const double a1 = m1 + s1 * z(rng), b1 = m0 + s0 * z(rng),
                                     c1 = m2 + s2 * z(rng);
                        const double a2 = m1 + s1 * z(rng), b2 = m2 + s2 * z(rng),
                                     c2 = m0 + s0 * z(rng);
                        a = a0 + a1 + a2;
                        b = b0 + b1 + b2;
                        c = c0 + c1 + c2;
                      } else {
                        detail::draw_legal_vector(profile, rng, z, v0);
                        detail::draw_legal_vector(profile, rng, z, v1);
                        detail::draw_legal_vector(profile, rng, z, v2);
                        a = v0[0] + v1[1] + v2[1];
                        b = v0[1] + v1[0] + v2[2];
                        c = v0[2] + v1[2] + v2[0];
                      }
                      hits_b += a < b;
                      hits_c += a < c;
                    }
                    block_b[block] = hits_b;
                    block_c[block] = hits_c;
                  });

  SimulationResult out;
  out.n_replicas = n_replicas;
  out.mis_B = std::accumulate(block_b.begin(), block_b.end(), std::uint64_t{0});
  out.mis_C = std::accumulate(block_c.begin(), block_c.end(), std::uint64_t{0});
  out.p_mis_B = static_cast<double>(out.mis_B) / static_cast<double>(n_replicas);
  out.p_mis_C = static_cast<double>(out.mis_C) / static_cast<double>(n_replicas);
  return out;
}

/// Parameters of a synthetic ensemble run drawn from a confidence profile.
///
/// `correlation` is the probability that a member reuses the per-sample shared draw
/// (rank-to-class assignment and values) instead of drawing its own: at 1 all members
/// are identical, at 0 they are independent. Every member has the same marginal
/// distribution whatever the correlation.
struct SyntheticRunConfig {
  ConfidenceProfile profile;
  std::size_t n_models = 3;
  std::size_t n_samples = 1000;
  double correlation = 0.0;
  std::uint64_t seed = 0;
  bool renormalize = true;
};

namespace detail {

// One member's confidence row for a sample whose true class is `truth`. The true class
// lands on rank r with probability C_r; the other classes fill the remaining ranks in
// random order.
template <class Rng>
void draw_member_row(const ConfidenceProfile& p, ClassId truth, bool renormalize, Rng& rng,
                     std::vector<std::size_t>& others, std::vector<double>& row) {
  const std::size_t k = p.size();
  std::discrete_distribution<std::size_t> rank_of_truth(p.mean().begin(), p.mean().end());
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t true_rank = rank_of_truth(rng);

  others.clear();
  for (std::size_t c = 0; c < k; ++c)
    if (static_cast<ClassId>(c) != truth)
      others.push_back(c);
  std::shuffle(others.begin(), others.end(), rng);

  double sum = 0.0;
  std::size_t next_other = 0;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t cls =
        r == true_rank ? static_cast<std::size_t>(truth) : others[next_other++];
    const double v = std::clamp(p.mean(r) + p.sigma(r) * z(rng), 0.0, 1.0);
    row[cls] = v;
    sum += v;
  }
  if (renormalize) {
    if (sum > 0.0)
      for (auto& v : row)
        v /= sum;
    else
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(k));
  }
}

inline std::string padded_id(const char* prefix, std::size_t i, std::size_t count) {
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(i);
  return prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
}

inline constexpr std::size_t kSampleBlock = 256;

} // namespace detail

/// Draws a deterministic synthetic run. Each sample uses its own counter-derived
/// random substream, so the output depends only on the config.
inline EnsembleRun generate_synthetic_run(const SyntheticRunConfig& config,
                                          unsigned threads = 1) {
  if (!(config.correlation >= 0.0 && config.correlation <= 1.0))
    throw ValidationError("correlation must lie in [0, 1], got " +
                          format_double(config.correlation));
  if (config.n_models < 1)
    throw ValidationError("synthetic run needs at least one model");
  if (config.n_samples < 1)
    throw ValidationError("synthetic run needs at least one sample");
  const auto& profile = config.profile;
  const std::size_t k = profile.size();
  if (k < 2)
    throw ValidationError("synthetic run needs at least 2 classes");

  const std::size_t n = config.n_samples;
  std::vector<std::vector<double>> values(config.n_models, std::vector<double>(n * k));
  std::vector<ClassId> truth(n);

  parallel_blocks(n, detail::kSampleBlock, threads,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    std::vector<std::size_t> others;
                    others.reserve(k);
                    std::vector<double> shared(k), own(k);
                    for (std::size_t s = begin; s < end; ++s) {
                      auto rng = substream(config.seed, s);
                      std::uniform_int_distribution<std::size_t> pick_class(0, k - 1);
                      std::uniform_real_distribution<double> coin(0.0, 1.0);
                      const auto t = static_cast<ClassId>(pick_class(rng));
                      truth[s] = t;
                      detail::draw_member_row(profile, t, config.renormalize, rng, others,
                                              shared);
                      for (std::size_t i = 0; i < config.n_models; ++i) {
                        const double u = coin(rng);
                        const std::vector<double>* row = &shared;
                        if (!(u < config.correlation)) {
                          detail::draw_member_row(profile, t, config.renormalize, rng, others,
                                                  own);
                          row = &own;
                        }
                        std::copy(row->begin(), row->end(),
                                  values[i].begin() + static_cast<std::ptrdiff_t>(s * k));
                      }
                    }
                  });

  std::vector<std::string> classes, ids;
  for (std::size_t c = 0; c < k; ++c)
    classes.push_back(detail::padded_id("class_", c, k));
  std::vector<std::pair<std::string, ClassId>> labels;
  labels.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    ids.push_back(detail::padded_id("s", s, n));
    labels.emplace_back(ids.back(), truth[s]);
  }
  LabelSet label_set(classes);
  GroundTruth gt(label_set, std::move(labels));
  std::vector<ConfidenceMatrix> models;
  for (std::size_t i = 0; i < config.n_models; ++i)
    models.emplace_back(detail::padded_id("model_", i, config.n_models), ids, k,
                        std::move(values[i]));
  return EnsembleRun(std::move(label_set), std::move(models), gt);
}

struct EnsembleGain {
  double ensemble_accuracy = 0.0;
  double best_single_accuracy = 0.0;
  double mean_single_accuracy = 0.0;
  double gain() const noexcept { return ensemble_accuracy - best_single_accuracy; }
};

/// Ensemble accuracy against the best and mean member accuracy.
inline EnsembleGain ensemble_gain(const EnsembleRun& run, Rule rule = Rule::arithmetic,
                                  double floor = kDefaultGeometricFloor, unsigned threads = 1) {
  const auto result = combine(run, rule, floor, threads);
  EnsembleGain g;
  g.ensemble_accuracy = score(result.predicted, run.truth(), run.labels()).accuracy;
  double sum = 0.0;
  for (const auto& pred : result.per_model_predicted) {
    const double acc = score(pred, run.truth(), run.labels()).accuracy;
    g.best_single_accuracy = std::max(g.best_single_accuracy, acc);
    sum += acc;
  }
  g.mean_single_accuracy = sum / static_cast<double>(run.n_models());
  return g;
}

inline ConfidenceProfile profile_from_json(const nlohmann::json& j) {
  try {
    return ConfidenceProfile(j.at("C").get<std::vector<double>>(),
                             j.at("sigma").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed profile: ") + e.what());
  }
}

inline nlohmann::ordered_json profile_to_json(const ConfidenceProfile& p) {
  nlohmann::ordered_json j;
  j["C"] = p.mean();
  j["sigma"] = p.sigma();
  return j;
}

inline ConfidenceProfile read_profile(const std::filesystem::path& path) {
  const std::string text = detail::read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return profile_from_json(j);
}

} // namespace ensemblekit
