// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "plcor/types.hpp"

namespace plcor {

using LossFn = std::function<double(const DepthImage&)>;
using GradFn = std::function<DepthGrad(const DepthImage&)>;

struct GradCheckReport {
  double h = 0.0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  PixelIndex worst{-1, -1};
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of an analytic depth gradient:
//   numeric = (L(Z + h e_uv) - L(Z - h e_uv)) / (2h)
//   rel     = |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
// over the given pixels (all valid pixels when the list is empty). The loss
// must stay finite at every probe; perturbing an invalid pixel is an error.
inline GradCheckReport finite_diff_check(const DepthImage& depth, const LossFn& loss_fn,
                                         const GradFn& grad_fn, double h,
                                         const std::vector<PixelIndex>& pixels = {}) {
  if (!(h > 0.0)) throw validation_error("finite_diff_check: step h must be positive");
  depth.validate();

  std::vector<PixelIndex> probe = pixels;
  if (probe.empty()) {
    for (int v = 0; v < depth.height; ++v)
      for (int u = 0; u < depth.width; ++u)
        if (depth.is_valid(u, v)) probe.push_back({u, v});
  }
  if (probe.empty()) throw validation_error("finite_diff_check: nothing to perturb");

  DepthGrad analytic = grad_fn(depth);
  if (analytic.width != depth.width || analytic.height != depth.height)
    throw validation_error("finite_diff_check: gradient size does not match depth");

  GradCheckReport report;
  report.h = h;
  DepthImage probe_img = depth;
  for (const PixelIndex& px : probe) {
    if (!depth.in_bounds(px.u, px.v) || !depth.is_valid(px.u, px.v))
      throw validation_error("finite_diff_check: pixel (" + std::to_string(px.u) + "," +
                             std::to_string(px.v) + ") is not a valid depth pixel");
    const std::size_t i = depth.index(px.u, px.v);
    const double z0 = depth.values[i];

    probe_img.values[i] = z0 + h;
    const double lp = loss_fn(probe_img);
    probe_img.values[i] = z0 - h;
    const double lm = loss_fn(probe_img);
    probe_img.values[i] = z0;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw validation_error("finite_diff_check: non-finite loss at pixel (" +
                             std::to_string(px.u) + "," + std::to_string(px.v) + ")");

    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic.at(px.u, px.v);
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
    const double rel = std::fabs(a - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = px;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace plcor
