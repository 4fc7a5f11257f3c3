#pragma once

#include <cstdint>
#include <random>

namespace histo {

/// Seeded stream used everywhere randomness is needed.
///
/// The engine is `std::mt19937_64`, whose output sequence is fixed by the C++
/// standard. The distribution helpers are implemented here rather than with
/// `<random>` distributions (whose algorithms are implementation-defined) so a
/// given seed yields the same draws on every toolchain.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % bound;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace histo
