#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace krcps {

// Counter-based generator (SplitMix64). Each draw hashes an incrementing
// counter, so substreams derived from (seed, index) are independent of
// scheduling and identical across platforms.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<std::uint64_t>::max();
  }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Stable substream id: hash-combines a base seed with a stream index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  g();
  return g();
}

inline SplitMix64 stream_for(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(mix_seed(seed, stream));
}

// Uniform double in (0, 1].
inline double uniform01(SplitMix64& g) {
  return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

// One standard normal via Box-Muller (cosine branch only, so every draw
// consumes exactly two 64-bit words and stays reproducible).
inline double normal01(SplitMix64& g) {
  const double u1 = uniform01(g);
  const double u2 = uniform01(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::vector<double> normal_vec(SplitMix64& g, std::size_t d) {
  std::vector<double> out(d);
  for (auto& v : out) v = normal01(g);
  return out;
}

// Fisher-Yates permutation of {0, ..., n-1}.
inline std::vector<std::size_t> random_permutation(std::size_t n,
                                                   SplitMix64& g) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(g() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace krcps
