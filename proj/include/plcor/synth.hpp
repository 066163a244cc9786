// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "plcor/projection.hpp"
#include "plcor/sparsifier.hpp"
#include "plcor/types.hpp"
#include "plcor/voxelizer.hpp"

namespace plcor {

namespace detail {

// splitmix64-seeded xorshift-free generator: std::mt19937_64 is seeded
// identically everywhere, but the distribution classes are not portable,
// so the draws below are hand-rolled from raw 64-bit outputs.
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at these sizes.
  std::uint64_t uniform_int(std::uint64_t n) { return n ? next_u64() % n : 0; }

 private:
  std::uint64_t state_;
};

}  // namespace detail

// Box-object scene recipe. Ground truth is piecewise constant: a background
// plane (invalid everywhere when background_depth <= 0) with object_count
// square boxes in a row, depths linearly spaced over [object_depth_min,
// object_depth_max]. The initial estimate perturbs it per-pixel:
//   object px: + object_bias + object_noise_quantum * k + U[jitter_min, jitter_max],
//              k drawn uniformly from {0, ..., object_noise_levels-1}
//   background px: + background_bias + U[-background_noise, +background_noise]
// All-zero perturbation fields leave z_init bit-identical to z_true.
struct SceneSpec {
  int width = 64;
  int height = 64;
  double focal = 200.0;
  int object_count = 1;
  int object_size_px = 20;
  double object_depth_min = 5.0;
  double object_depth_max = 5.0;
  double background_depth = 12.0;
  double object_bias = 0.0;
  double object_noise_quantum = 0.0;
  int object_noise_levels = 1;
  double object_jitter_min = 0.0;
  double object_jitter_max = 0.0;
  double background_bias = 0.0;
  double background_noise = 0.0;
  std::uint64_t seed = 0x5eedULL;
};

struct Scene {
  DepthImage z_true;
  DepthImage z_init;
  LidarSweep sweep;
  std::vector<std::uint8_t> object_mask;  // row-major, 1 on object pixels
  CameraModel camera;
};

inline CameraModel camera_for(int width, int height, double focal) {
  CameraModel cam;
  cam.f_u = focal;
  cam.f_v = focal;
  cam.c_u = (width - 1) / 2.0;
  cam.c_v = (height - 1) / 2.0;
  cam.image_width = width;
  cam.image_height = height;
  cam.validate();
  return cam;
}

// Back-projects every valid pixel into a float32 sweep, row-major order,
// reflectance fixed at 0.5.
inline LidarSweep sweep_from_depth(const DepthImage& depth, const CameraModel& cam) {
  depth.validate();
  cam.validate();
  LidarSweep sweep;
  sweep.points.reserve(depth.valid_count());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v)) continue;
      const double z = depth.at(u, v);
      LidarPoint p;
      p.x = static_cast<float>((u - cam.c_u) * z / cam.f_u);
      p.y = static_cast<float>((v - cam.c_v) * z / cam.f_v);
      p.z = static_cast<float>(z);
      p.reflectance = 0.5f;
      sweep.points.push_back(p);
    }
  }
  return sweep;
}

inline Scene synth_scene(const SceneSpec& spec) {
  if (spec.width < 4 || spec.height < 4)
    throw validation_error("synth_scene: image must be at least 4x4");
  if (!(spec.focal > 0.0)) throw validation_error("synth_scene: focal must be positive");
  if (spec.object_count < 0) throw validation_error("synth_scene: negative object count");
  if (spec.object_count > 0) {
    const int slot = spec.width / spec.object_count;
    if (spec.object_size_px < 1 || spec.object_size_px > slot - 2 ||
        spec.object_size_px > spec.height - 2)
      throw validation_error("synth_scene: object size does not fit with a 1px gap");
    if (!(spec.object_depth_min > 0.0) || !(spec.object_depth_max > 0.0))
      throw validation_error("synth_scene: object depths must be positive");
  }
  if (spec.object_noise_levels < 1)
    throw validation_error("synth_scene: noise levels must be >= 1");
  if (spec.object_jitter_min > spec.object_jitter_max)
    throw validation_error("synth_scene: jitter range inverted");
  if (spec.background_noise < 0.0)
    throw validation_error("synth_scene: background noise must be >= 0");

  Scene scene;
  scene.camera = camera_for(spec.width, spec.height, spec.focal);
  scene.z_true = DepthImage(spec.width, spec.height);
  scene.object_mask.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

  if (spec.background_depth > 0.0) {
    for (int v = 0; v < spec.height; ++v)
      for (int u = 0; u < spec.width; ++u) scene.z_true.set(u, v, spec.background_depth);
  }

  for (int k = 0; k < spec.object_count; ++k) {
    const int slot = spec.width / spec.object_count;
    const int left = k * slot + (slot - spec.object_size_px) / 2;
    const int top = (spec.height - spec.object_size_px) / 2;
    const double t = spec.object_count > 1
                         ? static_cast<double>(k) / (spec.object_count - 1)
                         : 0.0;
    const double z = spec.object_depth_min + t * (spec.object_depth_max - spec.object_depth_min);
    for (int v = top; v < top + spec.object_size_px; ++v) {
      for (int u = left; u < left + spec.object_size_px; ++u) {
        scene.z_true.set(u, v, z);
        scene.object_mask[scene.z_true.index(u, v)] = 1;
      }
    }
  }

  scene.z_init = scene.z_true;
  detail::SynthRng rng(spec.seed);
  for (int v = 0; v < spec.height; ++v) {
    for (int u = 0; u < spec.width; ++u) {
      if (!scene.z_true.is_valid(u, v)) continue;
      const std::size_t i = scene.z_true.index(u, v);
      double dz;
      if (scene.object_mask[i]) {
        const double ladder =
            spec.object_noise_quantum *
            static_cast<double>(rng.uniform_int(static_cast<std::uint64_t>(spec.object_noise_levels)));
        dz = spec.object_bias + ladder + rng.uniform(spec.object_jitter_min, spec.object_jitter_max);
      } else {
        dz = spec.background_bias + rng.uniform(-spec.background_noise, spec.background_noise);
      }
      scene.z_init.values[i] += dz;
    }
  }
  scene.z_init.validate();

  scene.sweep = sweep_from_depth(scene.z_true, scene.camera);
  return scene;
}

// Sparse supervision map: angularly sparsify the true sweep and keep only the
// surviving pixels of z_true. coverage is kept pixels over all pixels.
struct SparseSupervision {
  DepthImage depth;
  double coverage = 0.0;
};

inline SparseSupervision make_sparse_supervision(const DepthImage& z_true, const CameraModel& cam,
                                                 int beams, double phi_res_deg) {
  const ProvenancedCloud cloud = depth_to_points(z_true, cam);
  const SphericalBinSpec spec = make_beam_spec(beams, phi_res_deg);
  const KeepMap keep = angular_sparsify(cloud.points, spec);

  SparseSupervision out;
  out.depth = DepthImage(z_true.width, z_true.height);
  for (std::uint32_t idx : keep.kept) {
    const PixelIndex px = cloud.source[idx];
    out.depth.set(px.u, px.v, z_true.at(px.u, px.v));
  }
  out.coverage = static_cast<double>(out.depth.valid_count()) /
                 (static_cast<double>(z_true.width) * z_true.height);
  return out;
}

// Ground-plane scene: a flat road below the horizon out to max_depth plus
// vertical boxes standing on it. Used for sensor-scale sweeps where box
// scenes are too small.
struct GroundSceneSpec {
  int width = 1242;
  int height = 480;
  double focal = 1150.0;
  double camera_height = 1.65;
  double max_depth = 79.0;
  int object_count = 3;
  int object_size_px = 80;
  double object_depth_min = 8.0;
  double object_depth_max = 25.0;
};

inline Scene build_ground_scene(const GroundSceneSpec& spec) {
  if (spec.width < 8 || spec.height < 8)
    throw validation_error("build_ground_scene: image must be at least 8x8");
  if (!(spec.focal > 0.0) || !(spec.camera_height > 0.0) || !(spec.max_depth > 0.0))
    throw validation_error("build_ground_scene: focal, camera height and max depth must be positive");

  Scene scene;
  scene.camera = camera_for(spec.width, spec.height, spec.focal);
  scene.z_true = DepthImage(spec.width, spec.height);
  scene.object_mask.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);

  for (int v = 0; v < spec.height; ++v) {
    const double dv = v - scene.camera.c_v;
    if (dv <= 0.0) continue;  // horizon and sky stay invalid
    const double z = spec.focal * spec.camera_height / dv;
    if (z > spec.max_depth) continue;
    for (int u = 0; u < spec.width; ++u) scene.z_true.set(u, v, z);
  }

  for (int k = 0; k < spec.object_count; ++k) {
    const int slot = spec.width / std::max(1, spec.object_count);
    const int left = k * slot + (slot - spec.object_size_px) / 2;
    const double t = spec.object_count > 1
                         ? static_cast<double>(k) / (spec.object_count - 1)
                         : 0.0;
    const double z = spec.object_depth_min + t * (spec.object_depth_max - spec.object_depth_min);
    // Box stands on the ground: bottom row is where the plane reaches depth z.
    const int bottom = static_cast<int>(scene.camera.c_v + spec.focal * spec.camera_height / z);
    const int top = std::max(0, bottom - spec.object_size_px);
    for (int v = top; v <= std::min(bottom, spec.height - 1); ++v) {
      for (int u = std::max(0, left); u < std::min(spec.width, left + spec.object_size_px); ++u) {
        scene.z_true.set(u, v, z);
        scene.object_mask[scene.z_true.index(u, v)] = 1;
      }
    }
  }

  scene.z_init = scene.z_true;
  scene.sweep = sweep_from_depth(scene.z_true, scene.camera);
  return scene;
}

// The standard correction demo: one box floating in the grid, its initial
// depth pushed one z bin behind the truth. Jitter keeps every point in the
// lower half of the wrong bin, so the push off that bin's center and the
// pull from the adjacent target bin both point back toward the truth.
// Background sits far outside the grid and is reachable only through the
// depth loss.
struct DemoSetup {
  SceneSpec scene;
  GridSpec grid;
  int steps = 200;
  double lr = 1e-3;
};

inline DemoSetup make_standard_demo() {
  DemoSetup d;
  d.scene.width = 40;
  d.scene.height = 40;
  d.scene.focal = 200.0;
  d.scene.object_count = 1;
  d.scene.object_size_px = 20;
  d.scene.object_depth_min = 5.01;
  d.scene.object_depth_max = 5.01;
  d.scene.background_depth = 12.0;
  d.scene.object_bias = 0.1;
  d.scene.object_noise_quantum = 0.0;
  d.scene.object_noise_levels = 1;
  d.scene.object_jitter_min = 0.005;
  d.scene.object_jitter_max = 0.035;
  d.scene.background_noise = 0.03;
  d.scene.seed = 0x51a9e5ULL;

  d.grid.origin = Vec3{-0.5, -0.5, 4.9};
  d.grid.bin_size = Vec3{0.05, 0.05, 0.1};
  d.grid.counts = {20, 20, 8};
  d.grid.sigma_sq = 0.01;
  d.grid.neighborhood = Neighborhood::cube26;
  return d;
}

// Coverage-ratio scene: two boxes on a valid background, every supervised
// pixel perturbed away from the truth so depth-loss gradients are nonzero
// exactly on the supervised set.
struct RatioSetup {
  SceneSpec scene;
  GridSpec grid;
  int supervision_beams = 10;
  double supervision_phi_res_deg = 2.0;
};

inline RatioSetup make_ratio_setup() {
  RatioSetup r;
  r.scene.width = 96;
  r.scene.height = 96;
  r.scene.focal = 60.0;
  r.scene.object_count = 2;
  r.scene.object_size_px = 24;
  r.scene.object_depth_min = 6.0;
  r.scene.object_depth_max = 9.0;
  r.scene.background_depth = 18.0;
  r.scene.object_bias = 0.25;
  r.scene.background_bias = 0.05;
  r.scene.background_noise = 0.03;
  r.scene.seed = 0x9a71eULL;

  r.grid.origin = Vec3{-15.0, -15.0, 0.5};
  r.grid.bin_size = Vec3{0.25, 0.25, 0.25};
  r.grid.counts = {120, 120, 73};
  r.grid.sigma_sq = 0.01;
  r.grid.neighborhood = Neighborhood::cube26;
  return r;
}

}  // namespace plcor
