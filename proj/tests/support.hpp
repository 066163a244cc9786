// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for the unit suite and the acceptance runner.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "plcor/plcor.hpp"

namespace plcor::testsupport {

struct GradcheckScene {
  DepthImage depth;
  CameraModel cam;
  GridSpec grid;
  TargetOccupancy target;
};

// 8x8 depth map over a 5x5x3 grid, every back-projected point kept clear of
// bin faces so a central difference at h=1e-5 never crosses a membership
// boundary. The target is the hard voxelization of an independent cloud.
inline GradcheckScene make_gradcheck_scene(std::uint64_t seed) {
  GradcheckScene s;
  s.cam = camera_for(8, 8, 16.0);

  s.grid.origin = Vec3{-0.5, -0.5, 0.95};
  s.grid.bin_size = Vec3{0.2, 0.2, 0.3};
  s.grid.counts = {5, 5, 3};
  s.grid.sigma_sq = 0.01;
  s.grid.neighborhood = Neighborhood::cube26;

  detail::SynthRng rng(seed);
  auto offset_ok = [](double coord, double origin, double width) {
    const double f = (coord - origin) / width;
    const double frac = f - std::floor(f);
    return frac > 0.05 && frac < 0.95;
  };

  s.depth = DepthImage(8, 8);
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double z = rng.uniform(1.05, 1.55);
        const Vec3 p{(u - s.cam.c_u) * z / s.cam.f_u, (v - s.cam.c_v) * z / s.cam.f_v, z};
        if (assign_bin(p, s.grid) == kOutOfGrid) continue;
        if (!offset_ok(p.x, s.grid.origin.x, s.grid.bin_size.x) ||
            !offset_ok(p.y, s.grid.origin.y, s.grid.bin_size.y) ||
            !offset_ok(p.z, s.grid.origin.z, s.grid.bin_size.z))
          continue;
        s.depth.set(u, v, z);
        break;
      }
    }
  }

  std::vector<Vec3> target_pts;
  for (int i = 0; i < 20; ++i) {
    target_pts.push_back(Vec3{s.grid.origin.x + rng.next_unit() * 1.0,
                              s.grid.origin.y + rng.next_unit() * 1.0,
                              s.grid.origin.z + rng.next_unit() * 0.9});
  }
  s.target = hard_voxelize(target_pts, s.grid);
  return s;
}

// Full differentiable chain: depth -> cloud -> soft tensor -> surrogate loss.
inline double chain_loss(const DepthImage& depth, const CameraModel& cam, const GridSpec& grid,
                         const TargetOccupancy& target) {
  const ProvenancedCloud cloud = depth_to_points(depth, cam);
  const SoftVoxelization sv = soft_voxelize(cloud.points, grid);
  return surrogate_det_loss(sv.tensor, target).loss;
}

inline DepthGrad chain_grad(const DepthImage& depth, const CameraModel& cam, const GridSpec& grid,
                            const TargetOccupancy& target) {
  const ProvenancedCloud cloud = depth_to_points(depth, cam);
  const SoftVoxelization sv = soft_voxelize(cloud.points, grid);
  const SurrogateDetResult det = surrogate_det_loss(sv.tensor, target);
  const TensorGrad tg = restrict_to_stored(sv.backward, det.grad);
  const PointGrad pg = voxelize_backward(sv.backward, tg, cloud.points);
  return backprop_to_depth(cloud, pg, cam);
}

// Gradient-coverage ratio of the soft-quantized detection path on the full
// cloud of a scene.
inline GradStats quantized_path_stats(const Scene& scene, const GridSpec& grid,
                                      const TargetOccupancy& target) {
  return gradient_stats(chain_grad(scene.z_init, scene.camera, grid, target));
}

// Same loss, but the cloud is angularly sparsified first: only kept points
// can route gradient back to their source pixels.
inline GradStats sparsified_path_stats(const Scene& scene, const GridSpec& grid,
                                       const TargetOccupancy& target,
                                       const SphericalBinSpec& beams) {
  const ProvenancedCloud cloud = depth_to_points(scene.z_init, scene.camera);
  const KeepMap keep = angular_sparsify(cloud.points, beams);
  const std::vector<Vec3> kept_points = gather_points(cloud.points, keep);

  const SoftVoxelization sv = soft_voxelize(kept_points, grid);
  const SurrogateDetResult det = surrogate_det_loss(sv.tensor, target);
  const TensorGrad tg = restrict_to_stored(sv.backward, det.grad);
  const PointGrad kept_grads = voxelize_backward(sv.backward, tg, kept_points);
  const PointGrad full = scatter_grads(keep, kept_grads);
  return gradient_stats(backprop_to_depth(cloud, full, scene.camera));
}

// Ground-truth occupancy for a scene: hard voxelization of the true cloud.
inline TargetOccupancy scene_target(const Scene& scene, const GridSpec& grid) {
  const ProvenancedCloud truth = depth_to_points(scene.z_true, scene.camera);
  return hard_voxelize(truth.points, grid);
}

// Number of 4-connected components among mask==1 pixels.
inline int count_components(const std::vector<std::uint8_t>& mask, int width, int height) {
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<std::pair<int, int>> stack;
  int components = 0;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * width + u;
      if (!mask[i] || seen[i]) continue;
      ++components;
      stack.push_back({u, v});
      seen[i] = 1;
      while (!stack.empty()) {
        auto [cu, cv] = stack.back();
        stack.pop_back();
        const int du[4] = {1, -1, 0, 0};
        const int dv[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nu = cu + du[d], nv = cv + dv[d];
          if (nu < 0 || nu >= width || nv < 0 || nv >= height) continue;
          const std::size_t j = static_cast<std::size_t>(nv) * width + nu;
          if (mask[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back({nu, nv});
          }
        }
      }
    }
  }
  return components;
}

}  // namespace plcor::testsupport
