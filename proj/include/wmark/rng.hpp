#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace wmark {

// splitmix64 output function. Pure; used to derive seeds from keys and tokens.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Sebastiano Vigna's splitmix64 stream. All randomness in the toolkit flows
/// through this generator so partitions, samples and attacks are bit-exact
/// across platforms and standard libraries.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGolden;
    return splitmix64_mix(state_);
  }

  // Unbiased integer in [0, bound). bound must be nonzero.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  constexpr double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

using Rng = SplitMix64;

// Independent stream for item `index` of a run seeded with `seed`. Work split
// across texts uses one stream per text, so the order of evaluation never
// changes outputs.
constexpr Rng derive_stream(std::uint64_t seed, std::uint64_t index) noexcept {
  return Rng(splitmix64_mix(seed ^ splitmix64_mix(index + 1)));
}

// In-place Fisher-Yates, walking from the back: for i = n-1..1 swap ids[i]
// with ids[below(i+1)].
template <typename T>
void fisher_yates(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

inline std::vector<std::uint32_t> shuffled_ids(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  SplitMix64 rng(seed);
  fisher_yates(std::span<std::uint32_t>(ids), rng);
  return ids;
}

}  // namespace wmark
