#pragma once
// Deterministic random streams.  All stochastic code in the library draws from
// Rng (mt19937_64 + fixed transforms), and parallel work derives per-task
// streams with derive_stream() instead of splitting a shared generator, so
// results do not depend on thread scheduling or worker count.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace gardner {

inline constexpr const char* rng_algorithm = "mt19937_64";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream derivation: splitmix64(splitmix64(splitmix64(seed) ^ fnv1a64(label)) ^ index).
// Distinct (seed, label, index) triples give distinct, uncorrelated seeds.
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view label,
                                   std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ fnv1a64(label)) ^ index);
}

// Wraps mt19937_64 with explicit variate transforms.  The standard library
// distributions are implementation-defined, so we do not use them: the
// transforms below are part of the reproducibility contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform on [0, 1): top 53 bits of the raw draw
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; second variate cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  double exponential() { return -std::log1p(-uniform()); }

  double rademacher() { return (gen_() & 1u) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace gardner
