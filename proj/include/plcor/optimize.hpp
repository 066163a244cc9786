// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "plcor/losses.hpp"
#include "plcor/projection.hpp"
#include "plcor/types.hpp"
#include "plcor/voxelizer.hpp"

namespace plcor {

struct OptimStep {
  double loss = 0.0;
  double det_loss = 0.0;
  double depth_loss = 0.0;
  GradStats stats;
  double mean_target_dist = 0.0;
};

// steps[i] is the state at the start of iteration i (the gradients recorded
// there drive update i). final_* fields re-evaluate after the last update.
struct OptimTrace {
  std::vector<OptimStep> steps;
  double final_loss = 0.0;
  double final_det_loss = 0.0;
  double final_depth_loss = 0.0;
  double final_mean_target_dist = 0.0;
};

struct OptimResult {
  OptimTrace trace;
  DepthImage depth;
};

namespace detail {

// Mean distance from current points to the bin centers their ground-truth
// points fall into. Pixels valid in both maps and in-grid under z_star count;
// returns 0 when no pixel qualifies.
inline double mean_target_distance(const DepthImage& z, const DepthImage& z_star,
                                   const CameraModel& cam, const GridSpec& grid) {
  double total = 0.0;
  std::size_t n = 0;
  for (int v = 0; v < z.height; ++v) {
    for (int u = 0; u < z.width; ++u) {
      if (!z.is_valid(u, v) || !z_star.is_valid(u, v)) continue;
      const double zs = z_star.at(u, v);
      const Vec3 p_star{(u - cam.c_u) * zs / cam.f_u, (v - cam.c_v) * zs / cam.f_v, zs};
      const std::int64_t bin = assign_bin(p_star, grid);
      if (bin == kOutOfGrid) continue;
      const double zc = z.at(u, v);
      const Vec3 p{(u - cam.c_u) * zc / cam.f_u, (v - cam.c_v) * zc / cam.f_v, zc};
      total += (p - grid.center(bin)).norm();
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

}  // namespace detail

// Plain gradient descent on total_loss through the soft-quantized path:
//   cloud = depth_to_points(Z); T = soft_voxelize(cloud);
//   L = lambda_det * surrogate_det(T, target) + lambda_depth * depth_loss(Z, Zstar)
// Valid pixels move by -lr * dL/dZ each step. Divergence (non-finite loss)
// reports the iteration index.
inline OptimResult optimize_depth(const DepthImage& z0, const TargetOccupancy& target,
                                  const CameraModel& cam, const GridSpec& grid,
                                  const LossWeights& w, const DepthImage& z_star,
                                  int steps, double lr) {
  if (steps < 1) throw validation_error("optimize_depth: steps must be >= 1");
  if (!(lr > 0.0)) throw validation_error("optimize_depth: lr must be positive");
  z0.validate();
  z_star.validate();
  cam.validate();
  grid.validate();
  if (!grid.same_geometry(target.grid))
    throw validation_error("optimize_depth: target grid does not match");

  OptimResult out;
  out.depth = z0;
  out.trace.steps.reserve(static_cast<std::size_t>(steps));

  auto evaluate = [&](const DepthImage& z, bool want_grad, OptimStep& step, DepthGrad* grad) {
    const ProvenancedCloud cloud = depth_to_points(z, cam);
    const SoftVoxelization sv = soft_voxelize(cloud.points, grid);
    const SurrogateDetResult det = surrogate_det_loss(sv.tensor, target);
    step.det_loss = det.loss;
    double loss = w.lambda_det * det.loss;
    DepthGrad combined(z.width, z.height);
    if (want_grad && w.lambda_det != 0.0) {
      const TensorGrad tg = restrict_to_stored(sv.backward, det.grad);
      const PointGrad pg = voxelize_backward(sv.backward, tg, cloud.points);
      const DepthGrad dg = backprop_to_depth(cloud, pg, cam);
      for (std::size_t i = 0; i < combined.values.size(); ++i)
        combined.values[i] = w.lambda_det * dg.values[i];
    }
    if (w.lambda_depth != 0.0) {
      const DepthLossResult dl = depth_loss(z, z_star);
      step.depth_loss = dl.loss;
      loss += w.lambda_depth * dl.loss;
      if (want_grad)
        for (std::size_t i = 0; i < combined.values.size(); ++i)
          combined.values[i] += w.lambda_depth * dl.grad.values[i];
    }
    step.loss = loss;
    step.mean_target_dist = detail::mean_target_distance(z, z_star, cam, grid);
    if (want_grad) {
      step.stats = gradient_stats(combined);
      *grad = std::move(combined);
    }
  };

  for (int it = 0; it < steps; ++it) {
    OptimStep step;
    DepthGrad grad;
    evaluate(out.depth, true, step, &grad);
    if (!std::isfinite(step.loss))
      throw validation_error("optimize_depth: non-finite loss at iteration " + std::to_string(it));
    out.trace.steps.push_back(step);
    for (int v = 0; v < out.depth.height; ++v) {
      for (int u = 0; u < out.depth.width; ++u) {
        if (!out.depth.is_valid(u, v)) continue;
        out.depth.values[out.depth.index(u, v)] -= lr * grad.at(u, v);
      }
    }
  }

  OptimStep last;
  evaluate(out.depth, false, last, nullptr);
  if (!std::isfinite(last.loss))
    throw validation_error("optimize_depth: non-finite loss after final step");
  out.trace.final_loss = last.loss;
  out.trace.final_det_loss = last.det_loss;
  out.trace.final_depth_loss = last.depth_loss;
  out.trace.final_mean_target_dist = last.mean_target_dist;
  return out;
}

// Root-mean-square difference over pixels valid in both images and selected
// by the mask predicate (mask byte == want).
inline double masked_rmse(const DepthImage& a, const DepthImage& b,
                          const std::vector<std::uint8_t>& mask, std::uint8_t want) {
  if (a.width != b.width || a.height != b.height ||
      mask.size() != static_cast<std::size_t>(a.width) * a.height)
    throw validation_error("masked_rmse: shape mismatch");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != want || !a.valid[i] || !b.valid[i]) continue;
    const double d = a.values[i] - b.values[i];
    total += d * d;
    ++n;
  }
  if (n == 0) throw validation_error("masked_rmse: empty selection");
  return std::sqrt(total / static_cast<double>(n));
}

}  // namespace plcor
