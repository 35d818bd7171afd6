// Deterministic random number generation. All stochastic code in the library
// takes an explicit Rng so runs are reproducible from recorded seeds.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cte/common.hpp"

namespace cte {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), initial_seed_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    require(n > 0, "Rng::index on empty range");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % n);
  }

  // Standard normal via Box-Muller (engine-only state, no cached spare).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Independent stream for a named sub-process of this stream's seed.
  Rng child(const std::string& name) const {
    return Rng(derive_seed(initial_seed_, name));
  }

  std::uint64_t seed_of() const { return initial_seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t initial_seed_;
};

}  // namespace cte
