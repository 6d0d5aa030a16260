#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace sbo {

// Counter-based pseudorandom generator built on SplitMix64 finalizers.
// A stream is identified by a 64-bit key derived from any number of ids
// (seed, replication, iteration, inner sample, ...); draws within a stream
// consume an incrementing counter.  Output is a pure function of
// (key, counter), so results are reproducible across runs and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), counter_(0) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derive a stream key from a base key and a sequence of ids.
  static std::uint64_t derive(std::uint64_t base) { return mix(base); }
  template <typename... Ids>
  static std::uint64_t derive(std::uint64_t base, std::uint64_t id,
                              Ids... rest) {
    return derive(mix(base ^ mix(id)), rest...);
  }

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }

  // Uniform on (0, 1): 53-bit mantissa, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one normal per call (two uniforms consumed).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  // Exact Poisson draw.  Splits large means into chunks of <= 16 and sums
  // inversion samples (a sum of independent Poissons is Poisson).
  std::uint64_t poisson(double mean) {
    std::uint64_t total = 0;
    while (mean > 16.0) {
      total += poisson_inversion(16.0);
      mean -= 16.0;
    }
    return total + poisson_inversion(mean);
  }

  // Index in [0, n) uniformly.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) %
           (n == 0 ? 1 : n);
  }

 private:
  std::uint64_t poisson_inversion(double mean) {
    if (mean <= 0.0) return 0;
    double p = std::exp(-mean);
    double cdf = p;
    double u = uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace sbo
