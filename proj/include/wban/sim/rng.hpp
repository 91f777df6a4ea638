#pragma once

// Named random substreams: one generator per (seed, node, purpose).

#include <cmath>
#include <cstdint>
#include <random>

namespace wban::sim {

enum class Purpose : std::uint64_t { Arrivals = 1, Backoff, Channel, Bcc, Phase, Scenario };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Draws are computed from raw 64-bit output so runs are identical across
// standard library implementations.
class Stream {
 public:
  Stream(std::uint64_t seed, int node, Purpose p)
      : gen_(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(node + 1) * 0x100000001B3ULL) ^
                        splitmix64(static_cast<std::uint64_t>(p)))) {}

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  // uniform integer in [0, n]
  std::uint64_t upto(std::uint64_t n) {
    if (n == UINT64_MAX) return gen_();
    const std::uint64_t range = n + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t v;
    do v = gen_();
    while (v >= limit);
    return v % range;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace wban::sim
