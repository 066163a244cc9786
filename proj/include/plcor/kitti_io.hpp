// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "plcor/types.hpp"

namespace plcor {

// ---------------------------------------------------------------------------
// Velodyne sweeps: flat binary files of 16-byte records, four little-endian
// IEEE-754 float32 per point (x, y, z, reflectance), no header.
// ---------------------------------------------------------------------------

namespace detail {

inline float read_f32_le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                       (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void write_f32_le(unsigned char* p, float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  p[0] = static_cast<unsigned char>(bits & 0xffu);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xffu);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xffu);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xffu);
}

}  // namespace detail

inline LidarSweep read_velodyne(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("read_velodyne: cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read_velodyne: read failure on '" + path + "'");

  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0) {
    std::size_t good = (bytes.size() / kRecord) * kRecord;
    throw validation_error("read_velodyne: '" + path + "' truncated, file length " +
                           std::to_string(bytes.size()) +
                           " is not a multiple of 16; trailing data begins at offset " +
                           std::to_string(good));
  }

  LidarSweep sweep;
  sweep.points.resize(bytes.size() / kRecord);
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const unsigned char* rec = bytes.data() + i * kRecord;
    LidarPoint& pt = sweep.points[i];
    pt.x = detail::read_f32_le(rec + 0);
    pt.y = detail::read_f32_le(rec + 4);
    pt.z = detail::read_f32_le(rec + 8);
    pt.reflectance = detail::read_f32_le(rec + 12);
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z) ||
        !std::isfinite(pt.reflectance))
      throw validation_error("read_velodyne: non-finite value, record " + std::to_string(i) +
                             " rejected");
    if (pt.reflectance < 0.0f || pt.reflectance > 1.0f)
      throw validation_error("read_velodyne: reflectance out of [0,1], record " +
                             std::to_string(i) + " rejected");
  }
  return sweep;
}

// Validates the sweep before opening the output file: an invalid point writes
// nothing rather than leaving a partial file behind.
inline void write_velodyne(const std::string& path, const LidarSweep& sweep) {
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const LidarPoint& pt = sweep.points[i];
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z) ||
        !std::isfinite(pt.reflectance))
      throw validation_error("write_velodyne: non-finite value in record " + std::to_string(i));
    if (pt.reflectance < 0.0f || pt.reflectance > 1.0f)
      throw validation_error("write_velodyne: reflectance out of [0,1] in record " +
                             std::to_string(i));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("write_velodyne: cannot open '" + path + "' for writing");
  std::vector<unsigned char> rec(16);
  for (const LidarPoint& pt : sweep.points) {
    detail::write_f32_le(rec.data() + 0, pt.x);
    detail::write_f32_le(rec.data() + 4, pt.y);
    detail::write_f32_le(rec.data() + 8, pt.z);
    detail::write_f32_le(rec.data() + 12, pt.reflectance);
    out.write(reinterpret_cast<const char*>(rec.data()), 16);
  }
  out.flush();
  if (!out) throw io_error("write_velodyne: write failure on '" + path + "'");
}

// ---------------------------------------------------------------------------
// Calibration files: text lines of the form "KEY: f0 f1 ... f11" carrying a
// row-major 3x4 projection matrix per key. An optional LiDAR-to-camera
// extrinsic (also row-major 3x4) may be present under its own key; when the
// key is absent the transform is the identity.
// ---------------------------------------------------------------------------

using Mat3x4 = std::array<double, 12>;

inline constexpr Mat3x4 kIdentityExtrinsic = {1, 0, 0, 0,  //
                                              0, 1, 0, 0,  //
                                              0, 0, 1, 0};

struct Calibration {
  CameraModel camera;
  std::optional<Mat3x4> velo_to_cam;

  Mat3x4 extrinsic_or_identity() const { return velo_to_cam.value_or(kIdentityExtrinsic); }
};

namespace detail {

inline std::optional<Mat3x4> parse_matrix_line(const std::string& key, const std::string& line,
                                               int line_no) {
  auto colon = line.find(':');
  if (colon == std::string::npos) return std::nullopt;
  std::string name = line.substr(0, colon);
  // Trim trailing whitespace from the key.
  while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
  if (name != key) return std::nullopt;

  std::istringstream fields(line.substr(colon + 1));
  Mat3x4 m{};
  for (int i = 0; i < 12; ++i) {
    std::string tok;
    if (!(fields >> tok))
      throw validation_error("parse_calibration: line " + std::to_string(line_no) + ": key '" +
                             key + "' has fewer than 12 values");
    try {
      std::size_t used = 0;
      m[i] = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw validation_error("parse_calibration: line " + std::to_string(line_no) +
                             ": malformed float '" + tok + "' for key '" + key + "'");
    }
  }
  return m;
}

}  // namespace detail

// Reads intrinsics from `projection_key` (f_u = P[0][0], f_v = P[1][1],
// c_u = P[0][2], c_v = P[1][2]). Image dimensions are not stored in KITTI
// calibration files, so the caller supplies them.
inline Calibration parse_calibration(const std::string& path, const std::string& projection_key,
                                     int image_width, int image_height,
                                     const std::string& extrinsic_key = "Tr_velo_to_cam") {
  std::ifstream in(path);
  if (!in) throw io_error("parse_calibration: cannot open '" + path + "'");

  std::optional<Mat3x4> proj;
  std::optional<Mat3x4> extr;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!proj)
      if (auto m = detail::parse_matrix_line(projection_key, line, line_no)) proj = m;
    if (!extr && !extrinsic_key.empty())
      if (auto m = detail::parse_matrix_line(extrinsic_key, line, line_no)) extr = m;
  }
  if (in.bad()) throw io_error("parse_calibration: read failure on '" + path + "'");
  if (!proj)
    throw validation_error("parse_calibration: key '" + projection_key + "' not found in '" +
                           path + "'");

  Calibration calib;
  calib.camera.f_u = (*proj)[0];
  calib.camera.f_v = (*proj)[5];
  calib.camera.c_u = (*proj)[2];
  calib.camera.c_v = (*proj)[6];
  calib.camera.image_width = image_width;
  calib.camera.image_height = image_height;
  calib.camera.validate();
  calib.velo_to_cam = extr;
  return calib;
}

// Applies a row-major 3x4 rigid transform to every point. Math in double,
// stored back as float (the sweep's storage precision).
inline LidarSweep transform_sweep(const LidarSweep& sweep, const Mat3x4& m) {
  LidarSweep out;
  out.points.resize(sweep.points.size());
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const LidarPoint& p = sweep.points[i];
    double x = p.x, y = p.y, z = p.z;
    out.points[i].x = static_cast<float>(m[0] * x + m[1] * y + m[2] * z + m[3]);
    out.points[i].y = static_cast<float>(m[4] * x + m[5] * y + m[6] * z + m[7]);
    out.points[i].z = static_cast<float>(m[8] * x + m[9] * y + m[10] * z + m[11]);
    out.points[i].reflectance = p.reflectance;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Projecting a sweep into a sparse ground-truth depth image.
// ---------------------------------------------------------------------------

// The sweep must already be in camera coordinates (z forward, y down); apply
// transform_sweep first when the calibration carries an extrinsic. Pixel
// coordinates round to nearest (half away from zero); points behind the
// camera (z <= 0) and points projecting outside the image are skipped. When
// several points land on one pixel the smallest z wins.
inline DepthImage lidar_to_depth(const LidarSweep& sweep, const CameraModel& cam) {
  cam.validate();
  DepthImage depth(cam.image_width, cam.image_height);
  for (const LidarPoint& p : sweep.points) {
    double z = p.z;
    if (!(z > 0.0)) continue;
    long u = std::lround(cam.f_u * p.x / z + cam.c_u);
    long v = std::lround(cam.f_v * p.y / z + cam.c_v);
    if (u < 0 || u >= cam.image_width || v < 0 || v >= cam.image_height) continue;
    int ui = static_cast<int>(u), vi = static_cast<int>(v);
    if (!depth.is_valid(ui, vi) || z < depth.at(ui, vi)) depth.set(ui, vi, z);
  }
  return depth;
}

}  // namespace plcor
