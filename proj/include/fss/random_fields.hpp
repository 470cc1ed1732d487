#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fss/grid.hpp"

namespace fss {

/// Generator for trial `trial` of a seeded run. Every trial owns its own
/// stream, so results do not depend on evaluation order.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

/// Sum of one to three Gaussian bumps with random centres, widths and signs.
inline std::vector<double> bump_field(const Grid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 3);
  std::vector<double> v(grid.size(), 0.0);
  int bumps = count(rng);
  for (int b = 0; b < bumps; ++b) {
    Point c{0.0, 0.0};
    double extent = 0.0;
    for (int d = 0; d < grid.dimension(); ++d) {
      c[d] = grid.box.lo[d] + unit(rng) * (grid.box.hi[d] - grid.box.lo[d]);
      extent = std::max(extent, grid.box.hi[d] - grid.box.lo[d]);
    }
    double sigma = (0.1 + 0.4 * unit(rng)) * extent;
    double amp = 2.0 * unit(rng) - 1.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double r2 = 0.0;
      for (int d = 0; d < grid.dimension(); ++d) r2 += (grid.interior[i][d] - c[d]) * (grid.interior[i][d] - c[d]);
      v[i] += amp * std::exp(-0.5 * r2 / (sigma * sigma));
    }
  }
  return v;
}

/// Verification field for trial `trial`: every tenth trial is a smooth bump
/// profile, the rest are independent uniform values in [-1, 1].
inline std::vector<double> random_test_field(const Grid& grid, std::uint64_t seed, std::uint64_t trial) {
  auto rng = trial_rng(seed, trial);
  if (trial % 10 == 9) return bump_field(grid, rng);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(grid.size());
  for (double& x : v) x = dist(rng);
  return v;
}

/// Strictly positive random field with values in [lo, hi].
inline std::vector<double> random_positive_field(std::size_t size, std::uint64_t seed, std::uint64_t trial,
                                                 double lo = 0.05, double hi = 1.0) {
  auto rng = trial_rng(seed, trial);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(size);
  for (double& x : v) x = dist(rng);
  return v;
}

} // namespace fss
