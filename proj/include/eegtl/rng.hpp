#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace eegtl {

/// Seedable generator with platform-independent distributions.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so all
/// derived draws (uniform, normal, bounded integers, shuffles) are computed
/// here from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Box-Muller transform (both outputs used).
  double normal();

  /// Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound);

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Sub-seed for a named stage of an experiment, e.g.
/// derive_seed(seed, "standard", subject). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0);

}  // namespace eegtl
