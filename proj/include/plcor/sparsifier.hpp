// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "plcor/projection.hpp"
#include "plcor/types.hpp"

namespace plcor {

inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// Angular grid over (theta, phi) used to thin a dense cloud down to a
// beam-like pattern: theta rows play the role of scan lines, phi columns the
// role of per-line samples. Extents follow the points_to_spherical
// conventions (theta = elevation, positive up; phi = azimuth, positive
// right). Points outside the extents are dropped; a coordinate exactly on
// the upper edge falls outside (same floor rule as the voxel grid).
struct SphericalBinSpec {
  double theta_min = -24.9 * kDegToRad;
  double theta_max = 2.0 * kDegToRad;
  int n_theta = 64;
  double phi_min = -45.0 * kDegToRad;
  double phi_max = 45.0 * kDegToRad;
  int n_phi = 1000;

  void validate() const {
    if (n_theta <= 0 || n_phi <= 0)
      throw validation_error("SphericalBinSpec: bin counts must be positive");
    if (!(theta_max > theta_min) || !(phi_max > phi_min))
      throw validation_error("SphericalBinSpec: empty angular extent");
  }
  double theta_step() const { return (theta_max - theta_min) / n_theta; }
  double phi_step() const { return (phi_max - phi_min) / n_phi; }
};

// Builds the default spec: `beams` elevation rows over the usual scanner
// window, azimuth bins of `phi_res_deg` degrees across [-45, +45] degrees.
inline SphericalBinSpec make_beam_spec(int beams = 64, double phi_res_deg = 0.09,
                                       double theta_min_deg = -24.9, double theta_max_deg = 2.0,
                                       double phi_min_deg = -45.0, double phi_max_deg = 45.0) {
  SphericalBinSpec spec;
  spec.theta_min = theta_min_deg * kDegToRad;
  spec.theta_max = theta_max_deg * kDegToRad;
  spec.n_theta = beams;
  spec.phi_min = phi_min_deg * kDegToRad;
  spec.phi_max = phi_max_deg * kDegToRad;
  if (!(phi_res_deg > 0.0)) throw validation_error("make_beam_spec: phi resolution must be > 0");
  spec.n_phi = std::max(1, static_cast<int>(std::ceil((phi_max_deg - phi_min_deg) / phi_res_deg)));
  spec.validate();
  return spec;
}

// Which points survived a selection, in ascending point-index order.
// bin_of_kept[i] is the linear angular bin that kept point i came from, or
// -1 for selections that have no bins (the height filter).
struct KeepMap {
  std::size_t n_points = 0;
  std::vector<std::uint32_t> kept;
  std::vector<std::int64_t> bin_of_kept;
};

// Keeps points at most `y_limit` meters above the camera. Camera y points
// down, so "height above camera" is -y and the kept set is y >= -y_limit.
// Ground points (y > 0) always pass. An infinite y_limit keeps everything.
inline KeepMap filter_height(const std::vector<Vec3>& points, double y_limit) {
  if (std::isnan(y_limit)) throw validation_error("filter_height: y_limit is NaN");
  KeepMap keep;
  keep.n_points = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].y >= -y_limit) {
      keep.kept.push_back(static_cast<std::uint32_t>(i));
      keep.bin_of_kept.push_back(-1);
    }
  }
  return keep;
}

// Keeps one point per nonempty angular bin: the point whose (theta, phi) is
// closest to the bin center (Euclidean in radians), ties broken by smaller
// range r, then by smaller point index. The winner is a total order, so the
// result does not depend on input point order beyond indexing, and applying
// the same sparsification to its own output changes nothing.
inline KeepMap angular_sparsify(const std::vector<Vec3>& points, const SphericalBinSpec& spec) {
  spec.validate();

  struct Winner {
    double dist2;
    double r;
    std::uint32_t index;
  };
  std::unordered_map<std::int64_t, Winner> winners;
  winners.reserve(points.size() / 4 + 16);

  const double t_step = spec.theta_step();
  const double p_step = spec.phi_step();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].z > 0.0))
      throw validation_error("angular_sparsify: point " + std::to_string(i) +
                             " has non-positive z");
    Spherical s = point_to_spherical(points[i]);
    double ft = std::floor((s.theta - spec.theta_min) / t_step);
    double fp = std::floor((s.phi - spec.phi_min) / p_step);
    if (ft < 0.0 || fp < 0.0 || ft >= spec.n_theta || fp >= spec.n_phi) continue;
    int ti = static_cast<int>(ft), pi = static_cast<int>(fp);
    std::int64_t bin = static_cast<std::int64_t>(ti) * spec.n_phi + pi;

    double ct = spec.theta_min + (ti + 0.5) * t_step;
    double cp = spec.phi_min + (pi + 0.5) * p_step;
    double dt = s.theta - ct, dp = s.phi - cp;
    Winner cand{dt * dt + dp * dp, s.r, static_cast<std::uint32_t>(i)};

    auto [it, inserted] = winners.try_emplace(bin, cand);
    if (!inserted) {
      Winner& best = it->second;
      if (cand.dist2 < best.dist2 ||
          (cand.dist2 == best.dist2 &&
           (cand.r < best.r || (cand.r == best.r && cand.index < best.index))))
        best = cand;
    }
  }

  KeepMap keep;
  keep.n_points = points.size();
  keep.kept.reserve(winners.size());
  std::vector<std::pair<std::uint32_t, std::int64_t>> selected;
  selected.reserve(winners.size());
  for (const auto& [bin, w] : winners) selected.emplace_back(w.index, bin);
  std::sort(selected.begin(), selected.end());
  for (const auto& [idx, bin] : selected) {
    keep.kept.push_back(idx);
    keep.bin_of_kept.push_back(bin);
  }
  return keep;
}

// Routes gradients of the kept subset back to full-cloud indexing: kept
// points receive their gradient unchanged, dropped points exactly zero.
inline PointGrad scatter_grads(const KeepMap& keep, const PointGrad& kept_grads) {
  if (keep.kept.size() != kept_grads.size())
    throw validation_error("scatter_grads: keep map selects " + std::to_string(keep.kept.size()) +
                           " points but " + std::to_string(kept_grads.size()) +
                           " gradients were given");
  PointGrad out(keep.n_points);
  for (std::size_t i = 0; i < keep.kept.size(); ++i) {
    if (keep.kept[i] >= keep.n_points)
      throw validation_error("scatter_grads: kept index out of range");
    out[keep.kept[i]] = kept_grads[i];
  }
  return out;
}

// Convenience: the subset of points selected by a keep map.
inline std::vector<Vec3> gather_points(const std::vector<Vec3>& points, const KeepMap& keep) {
  std::vector<Vec3> out;
  out.reserve(keep.kept.size());
  for (std::uint32_t i : keep.kept) out.push_back(points[i]);
  return out;
}

}  // namespace plcor
