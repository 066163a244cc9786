// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <limits>
#include <vector>

#include "plcor/synth.hpp"
#include "plcor/types.hpp"
#include "plcor/voxelizer.hpp"

namespace plcor {

// Sensor-scale detection grid: x right [-40, 40), y down [-1, 2.5), z forward
// [0, 70), 0.1 m bins.
inline GridSpec make_full_scale_grid() {
  GridSpec g;
  g.origin = Vec3{-40.0, -1.0, 0.0};
  g.bin_size = Vec3{0.1, 0.1, 0.1};
  g.counts = {800, 35, 700};
  g.sigma_sq = 0.01;
  g.neighborhood = Neighborhood::cube26;
  return g;
}

struct BenchReport {
  std::size_t n_points = 0;
  double hard_forward_ms = 0.0;
  double soft_forward_ms = 0.0;
  double soft_backward_ms = 0.0;

  double soft_total_ms() const { return soft_forward_ms + soft_backward_ms; }
};

struct ScalingReport {
  std::vector<BenchReport> rows;
  double worst_doubling_ratio = 0.0;
};

namespace detail {

inline std::vector<Vec3> random_cloud_in_grid(std::size_t n, const GridSpec& grid,
                                              std::uint64_t seed) {
  SynthRng rng(seed);
  const Vec3 extent{grid.bin_size.x * grid.counts[0], grid.bin_size.y * grid.counts[1],
                    grid.bin_size.z * grid.counts[2]};
  std::vector<Vec3> points(n);
  for (std::size_t i = 0; i < n; ++i) {
    points[i] = Vec3{grid.origin.x + rng.next_unit() * extent.x,
                     grid.origin.y + rng.next_unit() * extent.y,
                     grid.origin.z + rng.next_unit() * extent.z};
  }
  return points;
}

// Fastest of `reps` runs. Scheduler interference only ever adds time, so the
// minimum is the robust estimate of the actual cost.
template <typename F>
inline double best_ms(int reps, F&& body) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace detail

// Fastest wall time over `reps` runs for hard voxelization, the soft forward
// pass, and the soft backward pass (unit gradient on every stored bin).
inline BenchReport bench_voxelize(std::size_t n_points, const GridSpec& grid, int reps = 3,
                                  std::uint64_t seed = 0xbe9c4ULL) {
  if (reps < 1) throw validation_error("bench_voxelize: reps must be >= 1");
  grid.validate();
  const std::vector<Vec3> points = detail::random_cloud_in_grid(n_points, grid, seed);

  BenchReport report;
  report.n_points = n_points;
  report.hard_forward_ms =
      detail::best_ms(reps, [&] { (void)hard_voxelize(points, grid); });

  SoftVoxelization sv;
  report.soft_forward_ms =
      detail::best_ms(reps, [&] { sv = soft_voxelize(points, grid); });

  TensorGrad grad;
  grad.reserve(sv.tensor.entries.size());
  for (const BinEntry& e : sv.tensor.entries) grad.push_back({e.bin, 1.0});
  report.soft_backward_ms =
      detail::best_ms(reps, [&] { (void)voxelize_backward(sv.backward, grad, points); });
  return report;
}

// Doubles the cloud size `doublings` times from base_n and reports the worst
// consecutive growth ratio of soft forward+backward time.
inline ScalingReport bench_scaling(std::size_t base_n, int doublings, const GridSpec& grid,
                                   int reps = 3) {
  if (doublings < 1) throw validation_error("bench_scaling: doublings must be >= 1");
  ScalingReport report;
  std::size_t n = base_n;
  for (int i = 0; i <= doublings; ++i, n *= 2)
    report.rows.push_back(bench_voxelize(n, grid, reps));
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const double prev = report.rows[i - 1].soft_total_ms();
    const double cur = report.rows[i].soft_total_ms();
    if (prev > 0.0) report.worst_doubling_ratio = std::max(report.worst_doubling_ratio, cur / prev);
  }
  return report;
}

}  // namespace plcor
