// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plcor {

// Thrown when input data violates a documented contract (bad values,
// mismatched sizes, malformed file content).
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when the underlying I/O fails (missing file, short read, ...).
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Pinhole camera intrinsics plus the image size the intrinsics refer to.
// u runs along columns (width), v along rows (height); pixel coordinates
// are integer pixel centers with no half-pixel offset.
struct CameraModel {
  double f_u = 0.0;
  double f_v = 0.0;
  double c_u = 0.0;
  double c_v = 0.0;
  int image_width = 0;
  int image_height = 0;

  void validate() const {
    if (!(f_u > 0.0) || !(f_v > 0.0))
      throw validation_error("CameraModel: focal lengths must be positive");
    if (image_width <= 0 || image_height <= 0)
      throw validation_error("CameraModel: image size must be positive");
    if (!(c_u >= 0.0) || !(c_u < image_width) || !(c_v >= 0.0) || !(c_v < image_height))
      throw validation_error("CameraModel: principal point outside image");
  }
};

// One raw LiDAR return. Stored as float to keep file round-trips bit-exact.
struct LidarPoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float reflectance = 0.0f;
};

struct LidarSweep {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
};

// Dense depth map in meters. Invalid pixels hold value 0 and valid==0;
// the mask is authoritative. Row-major storage, index = v*width + u.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0) throw validation_error("DepthImage: size must be positive");
  }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  double at(int u, int v) const { return values[index(u, v)]; }
  void set(int u, int v, double z) {
    values[index(u, v)] = z;
    valid[index(u, v)] = 1;
  }
  void clear_pixel(int u, int v) {
    values[index(u, v)] = 0.0;
    valid[index(u, v)] = 0;
  }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto m : valid) n += (m != 0);
    return n;
  }

  // Valid pixels must carry finite positive depth.
  void validate() const {
    if (width <= 0 || height <= 0) throw validation_error("DepthImage: empty image");
    if (values.size() != valid.size() ||
        values.size() != static_cast<std::size_t>(width) * height)
      throw validation_error("DepthImage: storage size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (valid[i] && (!std::isfinite(values[i]) || values[i] <= 0.0))
        throw validation_error("DepthImage: valid pixel with non-positive or non-finite depth at offset " +
                               std::to_string(i));
    }
  }
};

struct PixelIndex {
  int u = 0;  // column
  int v = 0;  // row
};

// Point cloud that remembers which depth pixel produced each point.
// points[i] came from source[i]; z > 0 for every point.
struct ProvenancedCloud {
  std::vector<Vec3> points;
  std::vector<PixelIndex> source;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.size() != source.size())
      throw validation_error("ProvenancedCloud: points/source length mismatch");
  }
};

// dL/d(point) for each point of a cloud, parallel to ProvenancedCloud::points.
using PointGrad = std::vector<Vec3>;

// dL/dZ on the depth grid. Dense row-major; zero outside touched pixels.
struct DepthGrad {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  DepthGrad() = default;
  DepthGrad(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  double at(int u, int v) const { return values[index(u, v)]; }
  double& at(int u, int v) { return values[index(u, v)]; }
};

}  // namespace plcor
