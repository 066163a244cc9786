// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plcor/types.hpp"

namespace plcor {

// Back-projects every valid depth pixel through the pinhole model:
//   x = (u - c_u) * z / f_u,  y = (v - c_v) * z / f_v,  z = Z(u, v).
// Points are emitted in row-major pixel order (v outer, u inner), so point
// order is deterministic and source[] records the producing pixel.
inline ProvenancedCloud depth_to_points(const DepthImage& depth, const CameraModel& cam) {
  cam.validate();
  depth.validate();
  if (depth.width != cam.image_width || depth.height != cam.image_height)
    throw validation_error("depth_to_points: depth size does not match camera image size");

  ProvenancedCloud cloud;
  std::size_t n = depth.valid_count();
  if (n == 0) throw validation_error("depth_to_points: depth image has no valid pixels");
  cloud.points.reserve(n);
  cloud.source.reserve(n);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v)) continue;
      double z = depth.at(u, v);
      cloud.points.push_back(Vec3{(u - cam.c_u) * z / cam.f_u, (v - cam.c_v) * z / cam.f_v, z});
      cloud.source.push_back(PixelIndex{u, v});
    }
  }
  return cloud;
}

// Pulls per-point gradients back onto the depth grid. The point produced by
// pixel (u, v) moves along ((u-c_u)/f_u, (v-c_v)/f_v, 1) per unit of depth, so
//   dL/dZ(u,v) += gx*(u-c_u)/f_u + gy*(v-c_v)/f_v + gz,
// accumulated in ascending point-index order. Pixels no point maps to stay 0.
inline DepthGrad backprop_to_depth(const ProvenancedCloud& cloud, const PointGrad& point_grads,
                                   const CameraModel& cam) {
  cam.validate();
  cloud.validate();
  if (cloud.points.size() != point_grads.size())
    throw validation_error("backprop_to_depth: cloud has " + std::to_string(cloud.points.size()) +
                           " points but " + std::to_string(point_grads.size()) + " gradients");

  DepthGrad grad(cam.image_width, cam.image_height);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const PixelIndex& px = cloud.source[i];
    if (px.u < 0 || px.u >= cam.image_width || px.v < 0 || px.v >= cam.image_height)
      throw validation_error("backprop_to_depth: source pixel out of image at point " +
                             std::to_string(i));
    const Vec3& g = point_grads[i];
    grad.at(px.u, px.v) +=
        g.x * (px.u - cam.c_u) / cam.f_u + g.y * (px.v - cam.c_v) / cam.f_v + g.z;
  }
  return grad;
}

// Spherical coordinates of a camera-frame point (y down, z forward):
//   r     = ||p||
//   theta = elevation above the horizontal plane, atan2(-y, hypot(x, z))
//   phi   = azimuth from the forward axis, atan2(x, z), positive to the right.
// Angles in radians. theta > 0 is above the optical axis.
struct Spherical {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

inline Spherical point_to_spherical(const Vec3& p) {
  double r = p.norm();
  if (!(r > 0.0)) throw validation_error("points_to_spherical: zero-norm point");
  return Spherical{r, std::atan2(-p.y, std::hypot(p.x, p.z)), std::atan2(p.x, p.z)};
}

inline Vec3 spherical_to_point(const Spherical& s) {
  double ct = std::cos(s.theta);
  return Vec3{s.r * ct * std::sin(s.phi), -s.r * std::sin(s.theta), s.r * ct * std::cos(s.phi)};
}

// Cloud points must be in front of the camera (z > 0); the angular ranges
// used downstream assume a frontal view.
inline std::vector<Spherical> points_to_spherical(const std::vector<Vec3>& points) {
  std::vector<Spherical> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].z > 0.0))
      throw validation_error("points_to_spherical: point " + std::to_string(i) +
                             " has non-positive z");
    out.push_back(point_to_spherical(points[i]));
  }
  return out;
}

}  // namespace plcor
