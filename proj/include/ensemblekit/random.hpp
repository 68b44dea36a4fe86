#pragma once

#include <cstdint>
#include <limits>

namespace ensemblekit {

/// SplitMix64 (Steele, Lea & Flood), usable as a UniformRandomBitGenerator.
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

/// Seed of substream `stream` under `master`. Substreams are addressed by counter,
/// so the draws a work item sees do not depend on which thread runs it.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  SplitMix64 mix(master);
  std::uint64_t a = mix();
  SplitMix64 mix2(a ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  mix2();
  return mix2();
}

inline SplitMix64 substream(std::uint64_t master, std::uint64_t stream) noexcept {
  return SplitMix64(substream_seed(master, stream));
}

} // namespace ensemblekit
