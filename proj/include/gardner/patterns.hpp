#pragma once
// Quenched pattern matrices shared by the samplers.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

#include <gardner/rng.hpp>

namespace gardner {

enum class PatternMode { binary, gaussian };

struct PatternSet {
  Eigen::MatrixXd xi;  // p rows (patterns) by N columns (couplings)
  int p = 0;
  int N = 0;
  std::uint64_t seed = 0;
  PatternMode mode = PatternMode::binary;
};

// Entries are filled row by row from the "patterns" stream of `seed`, so the
// same (seed, mode, p, N) always rebuilds the identical matrix.
inline PatternSet make_patterns(int p, int N, std::uint64_t seed, PatternMode mode) {
  if (p < 0 || N < 1) throw std::invalid_argument("bad pattern dimensions");
  PatternSet ps{Eigen::MatrixXd(p, N), p, N, seed, mode};
  Rng rng(derive_stream(seed, "patterns", 0));
  for (int mu = 0; mu < p; ++mu)
    for (int i = 0; i < N; ++i)
      ps.xi(mu, i) = mode == PatternMode::binary ? rng.rademacher() : rng.normal();
  return ps;
}

// Rows permuted by a seeded shuffle; estimates over the reordered constraints
// target the same volume, so the spread between orderings is a mixing
// diagnostic.
inline PatternSet shuffled_patterns(const PatternSet& ps, std::uint64_t seed) {
  PatternSet out = ps;
  Rng rng(derive_stream(seed, "level-order", 0));
  for (int i = ps.p - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));  // uniform() < 1, so j <= i
    out.xi.row(i).swap(out.xi.row(j));
  }
  return out;
}

}  // namespace gardner
