// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "plcor/types.hpp"

namespace plcor {

// Which bins a point's density spills into, besides its own.
enum class Neighborhood { none, cube26 };

// Axis-aligned voxel grid. Cell (ix, iy, iz) covers
//   [origin + i*bin_size, origin + (i+1)*bin_size)
// per axis; a coordinate exactly on a cell edge belongs to the higher-index
// cell (floor division). Linear index = (ix*ny + iy)*nz + iz, so ascending
// linear order is lexicographic (ix, iy, iz) order.
struct GridSpec {
  Vec3 origin{};
  Vec3 bin_size{0.1, 0.1, 0.1};
  std::array<int, 3> counts{};
  double sigma_sq = 0.01;
  Neighborhood neighborhood = Neighborhood::cube26;

  void validate() const {
    if (counts[0] <= 0 || counts[1] <= 0 || counts[2] <= 0)
      throw validation_error("GridSpec: bin counts must be positive");
    if (!(bin_size.x > 0.0) || !(bin_size.y > 0.0) || !(bin_size.z > 0.0))
      throw validation_error("GridSpec: bin sizes must be positive");
    if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
      throw validation_error("GridSpec: origin must be finite");
    if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
      throw validation_error("GridSpec: sigma_sq must be positive and finite");
    if (static_cast<std::int64_t>(counts[0]) * counts[1] * counts[2] >
        (std::int64_t{1} << 40))
      throw validation_error("GridSpec: grid too large");
  }

  std::int64_t n_bins() const {
    return static_cast<std::int64_t>(counts[0]) * counts[1] * counts[2];
  }
  std::int64_t linear_index(int ix, int iy, int iz) const {
    return (static_cast<std::int64_t>(ix) * counts[1] + iy) * counts[2] + iz;
  }
  std::array<int, 3> decompose(std::int64_t bin) const {
    int iz = static_cast<int>(bin % counts[2]);
    std::int64_t rest = bin / counts[2];
    int iy = static_cast<int>(rest % counts[1]);
    int ix = static_cast<int>(rest / counts[1]);
    return {ix, iy, iz};
  }
  Vec3 center(int ix, int iy, int iz) const {
    return Vec3{origin.x + (ix + 0.5) * bin_size.x, origin.y + (iy + 0.5) * bin_size.y,
                origin.z + (iz + 0.5) * bin_size.z};
  }
  Vec3 center(std::int64_t bin) const {
    auto i = decompose(bin);
    return center(i[0], i[1], i[2]);
  }
  bool same_geometry(const GridSpec& o) const {
    return origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z &&
           bin_size.x == o.bin_size.x && bin_size.y == o.bin_size.y &&
           bin_size.z == o.bin_size.z && counts == o.counts;
  }
};

// Per-point linear bin index; kOutOfGrid for points outside the extents.
inline constexpr std::int64_t kOutOfGrid = -1;
using BinAssignment = std::vector<std::int64_t>;

struct BinEntry {
  std::int64_t bin = 0;
  double value = 0.0;
};

// Sparse occupancy values keyed by linear bin index, entries sorted by bin.
// Also used for target occupancies (values in [0,1]) and tensor gradients.
struct OccupancyTensor {
  GridSpec grid;
  std::vector<BinEntry> entries;

  const double* find(std::int64_t bin) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), bin,
                               [](const BinEntry& e, std::int64_t b) { return e.bin < b; });
    if (it == entries.end() || it->bin != bin) return nullptr;
    return &it->value;
  }
  double value_or_zero(std::int64_t bin) const {
    const double* v = find(bin);
    return v ? *v : 0.0;
  }
};

using TargetOccupancy = OccupancyTensor;
using TensorGrad = std::vector<BinEntry>;

inline constexpr double kNeighborShare = 1.0 / 26.0;

inline std::int64_t assign_bin(const Vec3& p, const GridSpec& grid) {
  double fx = std::floor((p.x - grid.origin.x) / grid.bin_size.x);
  double fy = std::floor((p.y - grid.origin.y) / grid.bin_size.y);
  double fz = std::floor((p.z - grid.origin.z) / grid.bin_size.z);
  if (fx < 0.0 || fy < 0.0 || fz < 0.0 || fx >= grid.counts[0] || fy >= grid.counts[1] ||
      fz >= grid.counts[2])
    return kOutOfGrid;
  return grid.linear_index(static_cast<int>(fx), static_cast<int>(fy), static_cast<int>(fz));
}

inline BinAssignment assign_bins(const std::vector<Vec3>& points, const GridSpec& grid) {
  grid.validate();
  BinAssignment bins(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) bins[i] = assign_bin(points[i], grid);
  return bins;
}

// Occupied bins get value 1; out-of-grid points are ignored.
inline OccupancyTensor hard_voxelize(const std::vector<Vec3>& points, const GridSpec& grid) {
  BinAssignment bins = assign_bins(points, grid);
  std::vector<std::int64_t> occupied;
  occupied.reserve(bins.size());
  for (std::int64_t b : bins)
    if (b != kOutOfGrid) occupied.push_back(b);
  std::sort(occupied.begin(), occupied.end());
  occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());

  OccupancyTensor tensor;
  tensor.grid = grid;
  tensor.entries.reserve(occupied.size());
  for (std::int64_t b : occupied) tensor.entries.push_back({b, 1.0});
  return tensor;
}

// Everything the backward pass needs, cached at forward time.
//
// Points are grouped by their own bin: group g covers point_order indices
// [group_start[g], group_start[g+1]), ascending point index within a group,
// groups ascending by bin. For every stored bin m, records
// [stored_start[s], stored_start[s+1]) list the source groups whose points
// contributed to T(m); weights[record_woff[r] + k] caches
// exp(-||p_k - center(m)||^2 / sigma_sq) for the k-th point of the record's
// group. Records of one stored bin appear in ascending source-bin order.
struct VoxelBackwardMap {
  GridSpec grid;
  std::size_t n_points = 0;

  std::vector<std::int64_t> group_bin;
  std::vector<std::uint32_t> group_start;
  std::vector<std::uint32_t> point_order;

  std::vector<std::int64_t> stored_bin;
  std::vector<std::uint32_t> stored_start;
  std::vector<std::uint32_t> record_group;
  std::vector<std::uint64_t> record_woff;
  std::vector<double> weights;
};

struct SoftVoxelization {
  OccupancyTensor tensor;
  VoxelBackwardMap backward;
};

// Soft occupancy, Gaussian density relative to bin centers:
//   T(m, m') = (1/|P_m'|) * sum_{p in P_m'} exp(-||p - c_m||^2 / sigma_sq)
//   T(m)     = T(m, m) + (1/26) * sum_{m' in N_m} T(m, m')
// with N_m the 26-cube neighborhood (empty when neighborhood == none). The
// divisor stays 26 even where parts of the cube fall off the grid. Stored
// bins are exactly those with an occupied bin somewhere in {m} u N_m.
//
// Deterministic accumulation: sources are processed in ascending bin order
// with points in ascending index order, so repeat runs produce bit-identical
// tensors. Out-of-grid points contribute nothing and take zero gradient.
inline SoftVoxelization soft_voxelize(const std::vector<Vec3>& points, const GridSpec& grid) {
  grid.validate();

  SoftVoxelization out;
  out.tensor.grid = grid;
  out.backward.grid = grid;
  out.backward.n_points = points.size();

  // Group in-grid points by bin, ascending (bin, point index).
  std::vector<std::pair<std::int64_t, std::uint32_t>> by_bin;
  by_bin.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::int64_t b = assign_bin(points[i], grid);
    if (b != kOutOfGrid) by_bin.emplace_back(b, static_cast<std::uint32_t>(i));
  }
  std::sort(by_bin.begin(), by_bin.end());

  VoxelBackwardMap& bwd = out.backward;
  std::vector<std::array<int, 3>> group_coord;
  bwd.group_start.push_back(0);
  for (std::size_t i = 0; i < by_bin.size(); ++i) {
    if (i == 0 || by_bin[i].first != by_bin[i - 1].first) {
      bwd.group_bin.push_back(by_bin[i].first);
      if (i != 0) bwd.group_start.push_back(static_cast<std::uint32_t>(i));
      group_coord.push_back(grid.decompose(by_bin[i].first));
    }
    bwd.point_order.push_back(by_bin[i].second);
  }
  if (!by_bin.empty()) bwd.group_start.push_back(static_cast<std::uint32_t>(by_bin.size()));

  const std::size_t n_groups = bwd.group_bin.size();
  if (n_groups == 0) {
    bwd.stored_start.push_back(0);
    return out;  // empty tensor, zero-gradient map
  }

  // Offsets enumerated in a fixed order; (0,0,0) is the self term.
  std::vector<std::array<int, 3>> offsets;
  if (grid.neighborhood == Neighborhood::cube26) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) offsets.push_back({dx, dy, dz});
  } else {
    offsets.push_back({0, 0, 0});
  }

  // Size everything up front.
  const std::size_t n_streams = offsets.size();
  std::vector<std::size_t> per_stream(n_streams, 0);
  std::size_t n_records = 0;
  std::size_t n_weights = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    std::size_t group_size = bwd.group_start[g + 1] - bwd.group_start[g];
    for (std::size_t o = 0; o < n_streams; ++o) {
      int ix = group_coord[g][0] + offsets[o][0];
      int iy = group_coord[g][1] + offsets[o][1];
      int iz = group_coord[g][2] + offsets[o][2];
      if (ix < 0 || iy < 0 || iz < 0 || ix >= grid.counts[0] || iy >= grid.counts[1] ||
          iz >= grid.counts[2])
        continue;
      ++per_stream[o];
      ++n_records;
      n_weights += group_size;
    }
  }

  // One record stream per offset. A fixed offset shifts every linear bin
  // index by the same constant, so targets within one stream ascend strictly
  // with the source bins and the stream never needs sorting.
  struct RecordStream {
    std::vector<std::uint64_t> target;
    std::vector<double> value;
    std::vector<std::uint32_t> group;
    std::vector<std::uint64_t> woff;
  };
  std::vector<RecordStream> streams(n_streams);
  for (std::size_t o = 0; o < n_streams; ++o) {
    streams[o].target.reserve(per_stream[o]);
    streams[o].value.reserve(per_stream[o]);
    streams[o].group.reserve(per_stream[o]);
    streams[o].woff.reserve(per_stream[o]);
  }
  bwd.weights.reserve(n_weights);

  const double inv_sigma_sq = 1.0 / grid.sigma_sq;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::uint32_t begin = bwd.group_start[g];
    const std::uint32_t end = bwd.group_start[g + 1];
    const double inv_count = 1.0 / (end - begin);
    for (std::size_t o = 0; o < n_streams; ++o) {
      int ix = group_coord[g][0] + offsets[o][0];
      int iy = group_coord[g][1] + offsets[o][1];
      int iz = group_coord[g][2] + offsets[o][2];
      if (ix < 0 || iy < 0 || iz < 0 || ix >= grid.counts[0] || iy >= grid.counts[1] ||
          iz >= grid.counts[2])
        continue;

      const Vec3 c = grid.center(ix, iy, iz);
      const std::uint64_t woff = bwd.weights.size();
      double sum = 0.0;
      for (std::uint32_t k = begin; k < end; ++k) {
        const Vec3& p = points[bwd.point_order[k]];
        double dx = p.x - c.x, dy = p.y - c.y, dz = p.z - c.z;
        double w = std::exp(-(dx * dx + dy * dy + dz * dz) * inv_sigma_sq);
        bwd.weights.push_back(w);
        sum += w;
      }
      const bool self = offsets[o][0] == 0 && offsets[o][1] == 0 && offsets[o][2] == 0;
      const double share = self ? 1.0 : kNeighborShare;
      streams[o].target.push_back(static_cast<std::uint64_t>(grid.linear_index(ix, iy, iz)));
      streams[o].value.push_back(share * (sum * inv_count));
      streams[o].group.push_back(static_cast<std::uint32_t>(g));
      streams[o].woff.push_back(woff);
    }
  }

  // K-way merge of the pre-sorted streams through a winner tree. Ties on
  // target break by source group, then by stream order, which reproduces
  // generation order, so per-bin sums accumulate exactly as a bin-keyed
  // accumulator would.
  bwd.record_group.reserve(n_records);
  bwd.record_woff.reserve(n_records);
  constexpr std::uint64_t kDone = std::numeric_limits<std::uint64_t>::max();
  const std::size_t n_leaves = std::bit_ceil(n_streams);
  std::vector<std::uint64_t> head_key(n_leaves, kDone);
  std::vector<std::uint32_t> head_group(n_leaves, 0);
  std::vector<std::size_t> head_pos(n_streams, 0);
  for (std::size_t o = 0; o < n_streams; ++o) {
    if (streams[o].target.empty()) continue;
    head_key[o] = streams[o].target[0];
    head_group[o] = streams[o].group[0];
  }
  // tree[i] holds the winning leaf under node i; leaves sit at n_leaves + o.
  // The left bias on ties keeps the lowest stream in front.
  auto pick = [&](std::uint32_t l, std::uint32_t r) {
    const bool right = head_key[r] < head_key[l] ||
                       (head_key[r] == head_key[l] && head_group[r] < head_group[l]);
    return right ? r : l;
  };
  std::vector<std::uint32_t> tree(2 * n_leaves);
  for (std::size_t o = 0; o < n_leaves; ++o) tree[n_leaves + o] = static_cast<std::uint32_t>(o);
  for (std::size_t i = n_leaves; i-- > 1;) tree[i] = pick(tree[2 * i], tree[2 * i + 1]);

  for (std::size_t emitted = 0; emitted < n_records; ++emitted) {
    const std::uint32_t best = tree[1];
    RecordStream& s = streams[best];
    const std::size_t p = head_pos[best];
    const std::uint64_t target = s.target[p];
    if (emitted == 0 || target != static_cast<std::uint64_t>(bwd.stored_bin.back())) {
      out.tensor.entries.push_back({static_cast<std::int64_t>(target), 0.0});
      bwd.stored_bin.push_back(static_cast<std::int64_t>(target));
      bwd.stored_start.push_back(static_cast<std::uint32_t>(emitted));
    }
    out.tensor.entries.back().value += s.value[p];
    bwd.record_group.push_back(s.group[p]);
    bwd.record_woff.push_back(s.woff[p]);

    const std::size_t next = ++head_pos[best];
    if (next < s.target.size()) {
      head_key[best] = s.target[next];
      head_group[best] = s.group[next];
    } else {
      head_key[best] = kDone;
    }
    for (std::size_t i = (n_leaves + best) / 2; i >= 1; i /= 2)
      tree[i] = pick(tree[2 * i], tree[2 * i + 1]);
  }
  bwd.stored_start.push_back(static_cast<std::uint32_t>(n_records));
  return out;
}

// Chain rule through soft_voxelize. For a gradient g_m on stored bin m and a
// point p counted in source bin m', the contribution is
//   dL/dp += g_m * c(m, m') * (1/|P_m'|) * (-2 (p - c_m) / sigma_sq)
//            * exp(-||p - c_m||^2 / sigma_sq)
// with c(m, m) = 1 and c(m, m') = 1/26. A positive g_m therefore descends by
// pushing the point away from c_m; a negative g_m pulls it toward c_m.
// Contributions accumulate in ascending (stored bin, source bin, point) order.
//
// Every tensor_grad key must be a stored bin; unknown keys are an error (see
// restrict_to_stored for why dropping them would be exact).
inline PointGrad voxelize_backward(const VoxelBackwardMap& bwd, const TensorGrad& tensor_grad,
                                   const std::vector<Vec3>& points) {
  if (points.size() != bwd.n_points)
    throw validation_error("voxelize_backward: cloud size " + std::to_string(points.size()) +
                           " does not match forward pass (" + std::to_string(bwd.n_points) + ")");

  TensorGrad grad = tensor_grad;
  std::sort(grad.begin(), grad.end(),
            [](const BinEntry& a, const BinEntry& b) { return a.bin < b.bin; });
  for (std::size_t i = 1; i < grad.size(); ++i)
    if (grad[i].bin == grad[i - 1].bin)
      throw validation_error("voxelize_backward: duplicate gradient key " +
                             std::to_string(grad[i].bin));

  PointGrad out(points.size());

  const double scale = -2.0 / bwd.grid.sigma_sq;
  std::size_t s = 0;
  for (const BinEntry& ge : grad) {
    while (s < bwd.stored_bin.size() && bwd.stored_bin[s] < ge.bin) ++s;
    if (s == bwd.stored_bin.size() || bwd.stored_bin[s] != ge.bin)
      throw validation_error("voxelize_backward: gradient on unknown bin " +
                             std::to_string(ge.bin));
    if (ge.value == 0.0) continue;

    const Vec3 c = bwd.grid.center(ge.bin);
    for (std::uint32_t r = bwd.stored_start[s]; r < bwd.stored_start[s + 1]; ++r) {
      const std::uint32_t g = bwd.record_group[r];
      const std::uint32_t begin = bwd.group_start[g];
      const std::uint32_t end = bwd.group_start[g + 1];
      const double share = (bwd.group_bin[g] == ge.bin) ? 1.0 : kNeighborShare;
      const double coeff = ge.value * share * scale / (end - begin);
      const std::uint64_t woff = bwd.record_woff[r];
      for (std::uint32_t k = begin; k < end; ++k) {
        const std::uint32_t idx = bwd.point_order[k];
        const Vec3& p = points[idx];
        const double cw = coeff * bwd.weights[woff + (k - begin)];
        out[idx].x += cw * (p.x - c.x);
        out[idx].y += cw * (p.y - c.y);
        out[idx].z += cw * (p.z - c.z);
      }
    }
  }
  return out;
}

// Drops gradient keys that are not stored bins. An unstored bin has no
// occupied bin anywhere in its 27-cube, so its occupancy is identically zero
// no matter how the points move (while bin assignments hold) and its true
// point gradient is exactly zero; dropping such keys loses nothing. Keeps
// the strict precondition of voxelize_backward usable after losses that put
// gradient on unreachable target bins.
inline TensorGrad restrict_to_stored(const VoxelBackwardMap& bwd, const TensorGrad& tensor_grad) {
  TensorGrad kept;
  kept.reserve(tensor_grad.size());
  for (const BinEntry& e : tensor_grad) {
    auto it = std::lower_bound(bwd.stored_bin.begin(), bwd.stored_bin.end(), e.bin);
    if (it != bwd.stored_bin.end() && *it == e.bin) kept.push_back(e);
  }
  return kept;
}

}  // namespace plcor
