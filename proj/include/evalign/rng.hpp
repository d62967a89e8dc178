#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evalign {

/// Deterministic random source. The transforms are hand-rolled on top of
/// std::mt19937_64 so that a given seed produces the same sequence on every
/// platform (the std::*_distribution classes are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  bool coin() { return (eng_() & 1u) != 0; }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // keep u1 away from 0 for the log
    u1 = 1.0 - u1;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Poisson count by Knuth's product method, chunked so large means do not
  /// underflow exp().
  std::uint64_t poisson(double lambda) {
    std::uint64_t total = 0;
    while (lambda > 0.0) {
      const double chunk = lambda > 500.0 ? 500.0 : lambda;
      lambda -= chunk;
      const double limit = std::exp(-chunk);
      double prod = 1.0;
      std::uint64_t k = 0;
      do {
        ++k;
        prod *= uniform();
      } while (prod > limit);
      total += k - 1;
    }
    return total;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace evalign
