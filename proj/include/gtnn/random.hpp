#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace gtnn {

/// SplitMix64 finalizer; used to derive independent stream seeds from a root.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based split: stream `k` of root seed `root`.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t k) {
  return mix_seed(mix_seed(root) ^ mix_seed(k + 0x632be59bd9b4e019ULL));
}

/// Named sub-streams so that adding a consumer never shifts another's draws.
enum class Stream : std::uint64_t {
  kSynthGraph = 1,
  kSynthText = 2,
  kNegatives = 3,
  kSplit = 4,
  kInit = 5,
  kShuffle = 6,
  kRandomEmbedding = 7,
  kPositives = 8,
};

/// Portable RNG: std::mt19937_64 is fully specified, but the std
/// distributions are not, so integer/real draws are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, Stream stream)
      : engine_(derive_seed(root, static_cast<std::uint64_t>(stream))) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gtnn
