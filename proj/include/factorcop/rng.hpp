#pragma once

#include <cmath>
#include <cstdint>

namespace factorcop {

/// Counter-based random stream.
///
/// Output k of stream (seed, id) is splitmix64_mix(key + (k + 1) * golden)
/// where key = mix(seed ^ mix(id + tag)). Any draw can be recomputed from
/// (seed, id, tag, k) alone, so streams handed to different workers never
/// depend on scheduling.
class Stream {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  Stream(std::uint64_t seed, std::uint64_t id, std::uint64_t tag = 0)
      : key_(mix(seed ^ mix(id * kGolden + tag + 0x632BE59BD9B4E019ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Binomial(n, p) as a sum of Bernoulli draws (n is small here).
  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace factorcop
