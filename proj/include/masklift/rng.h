#pragma once

#include <cstdint>
#include <initializer_list>

namespace masklift {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds an ordered list of stream identifiers into one key.
constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> ids) {
  std::uint64_t key = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t id : ids) key = mix64(key ^ mix64(id));
  return key;
}

// Named substream identifiers. Values are part of the on-disk determinism
// contract: changing one changes every seeded artifact downstream.
enum class Stream : std::uint64_t {
  kCorrupt = 1,
  kPermute = 2,
  kMatches = 3,
  kLeiden = 4,
  kTrainRays = 5,
  kTrainJitter = 6,
  kMergeViews = 7,
  kFastRegions = 8,
  kLocSamples = 9,
  kSceneGen = 10,
  kFieldInit = 11,
};

// Counter-based generator: the i-th draw is mix(key, i), so a stream's
// output depends only on its key and never on other streams' consumption.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::initializer_list<std::uint64_t> ids) : key_(stream_key(ids)) {}

  std::uint64_t next_u64() {
    return mix64(key_ ^ mix64(counter_++ * 0xd1b54a32d192ed03ULL + 1));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive. Rejection sampling keeps
  // the result unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller (one value per call, two draws).
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace masklift
