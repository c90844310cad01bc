#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace synplug {

// Seedable 64-bit generator used everywhere randomness is needed.
// mt19937_64 output is pinned by the standard and the mappings below avoid
// std::*_distribution, so identical seeds give identical streams across
// platforms, not just within one build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [lo, hi) via the top 53 bits.
  double uniform(double lo, double hi) {
    double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  // Unbiased index in [0, n) by rejection sampling.
  std::size_t index(std::size_t n) {
    if (n <= 1) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return static_cast<std::size_t>(x % n);
  }

  // Inclusive range.
  int int_in(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }

  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace synplug
