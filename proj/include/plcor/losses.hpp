// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "plcor/types.hpp"
#include "plcor/voxelizer.hpp"

namespace plcor {

struct LossWeights {
  double lambda_depth = 1.0;
  double lambda_det = 0.01;
};

// Huber-style robust penalty, quadratic inside the unit interval and linear
// outside; value and derivative agree at |x| = 1 so it is C1.
inline double smooth_l1(double x) {
  double a = std::fabs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double smooth_l1_deriv(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

struct DepthLossResult {
  double loss = 0.0;
  DepthGrad grad;
};

// Mean smooth-L1 error over the pixels valid in both prediction and ground
// truth. Gradient is smooth_l1'(Z - Z*) / |A| on those pixels, zero
// elsewhere. An empty overlap is an error: the mean would be undefined.
inline DepthLossResult depth_loss(const DepthImage& pred, const DepthImage& truth) {
  if (pred.width != truth.width || pred.height != truth.height)
    throw validation_error("depth_loss: prediction and ground truth sizes differ");

  std::size_t overlap = 0;
  for (std::size_t i = 0; i < pred.valid.size(); ++i)
    overlap += (pred.valid[i] && truth.valid[i]);
  if (overlap == 0) throw validation_error("depth_loss: no pixels are valid in both images");

  DepthLossResult res;
  res.grad = DepthGrad(pred.width, pred.height);
  const double inv = 1.0 / static_cast<double>(overlap);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.valid.size(); ++i) {
    if (!pred.valid[i] || !truth.valid[i]) continue;
    double err = pred.values[i] - truth.values[i];
    acc += smooth_l1(err);
    res.grad.values[i] = smooth_l1_deriv(err) * inv;
  }
  res.loss = acc * inv;
  return res;
}

struct SurrogateDetResult {
  double loss = 0.0;
  TensorGrad grad;
};

// Quadratic stand-in for a detector: L = 1/2 * sum (T(m) - T*(m))^2 over the
// union of predicted and target keys, gradient T(m) - T*(m) on that union.
// Bins absent from one side count as zero there. Grids must be geometrically
// identical or the comparison is meaningless.
inline SurrogateDetResult surrogate_det_loss(const OccupancyTensor& pred,
                                             const TargetOccupancy& target) {
  if (!pred.grid.same_geometry(target.grid))
    throw validation_error("surrogate_det_loss: prediction and target grids differ");
  for (const BinEntry& e : target.entries)
    if (e.value < 0.0 || e.value > 1.0)
      throw validation_error("surrogate_det_loss: target value outside [0,1] at bin " +
                             std::to_string(e.bin));

  SurrogateDetResult res;
  res.grad.reserve(pred.entries.size() + target.entries.size());
  std::size_t i = 0, j = 0;
  while (i < pred.entries.size() || j < target.entries.size()) {
    std::int64_t bin;
    double t = 0.0, tstar = 0.0;
    if (j == target.entries.size() ||
        (i < pred.entries.size() && pred.entries[i].bin < target.entries[j].bin)) {
      bin = pred.entries[i].bin;
      t = pred.entries[i].value;
      ++i;
    } else if (i == pred.entries.size() || target.entries[j].bin < pred.entries[i].bin) {
      bin = target.entries[j].bin;
      tstar = target.entries[j].value;
      ++j;
    } else {
      bin = pred.entries[i].bin;
      t = pred.entries[i].value;
      tstar = target.entries[j].value;
      ++i;
      ++j;
    }
    double diff = t - tstar;
    res.loss += 0.5 * diff * diff;
    if (diff != 0.0) res.grad.push_back({bin, diff});
  }
  return res;
}

inline double total_loss(const LossWeights& w, double det_loss, double depth_loss_value) {
  return w.lambda_det * det_loss + w.lambda_depth * depth_loss_value;
}

// Ratio / mean / sum summary of a depth-gradient field, all on absolute
// values: ratio = fraction of all pixels with a nonzero gradient, mean =
// mean |g| over those pixels, sum = total |g| over the map.
struct GradStats {
  double ratio = 0.0;
  double mean = 0.0;
  double sum = 0.0;
};

inline GradStats gradient_stats(const DepthGrad& grad) {
  if (grad.width <= 0 || grad.height <= 0 || grad.values.empty())
    throw validation_error("gradient_stats: empty gradient map");
  GradStats s;
  std::size_t nonzero = 0;
  for (double g : grad.values) {
    if (g != 0.0) {
      ++nonzero;
      s.sum += std::fabs(g);
    }
  }
  s.ratio = static_cast<double>(nonzero) / static_cast<double>(grad.values.size());
  s.mean = nonzero ? s.sum / static_cast<double>(nonzero) : 0.0;
  return s;
}

inline std::string stats_csv_row(const std::string& loss_name, const GradStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g", loss_name.c_str(), s.ratio, s.mean,
                s.sum);
  return buf;
}

}  // namespace plcor
