// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "plcor/types.hpp"

namespace plcor {

// Depth maps travel as 16-bit grayscale PNG: meters = raw / 256.0, raw 0
// marks an invalid pixel. The representable range for valid pixels is
// therefore (0, 65535/256] meters at a quantum of 1/256 m.
inline constexpr double kDepthPngQuantum = 1.0 / 256.0;
inline constexpr double kDepthPngCap = 65535.0 / 256.0;

inline DepthImage read_depth_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;

  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw io_error("read_depth_png: '" + path + "': " + msg);
  }
  // PNG_FORMAT_LINEAR_Y is exactly "16-bit, one gray channel"; anything else
  // (8-bit, color, alpha) is the wrong encoding for a depth map.
  if (image.format != PNG_FORMAT_LINEAR_Y) {
    png_image_free(&image);
    throw validation_error("read_depth_png: '" + path +
                           "' is not a 16-bit single-channel grayscale PNG");
  }

  std::vector<png_uint_16> raw(static_cast<std::size_t>(image.width) * image.height);
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw io_error("read_depth_png: '" + path + "': " + msg);
  }

  DepthImage depth(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != 0) {
      depth.values[i] = raw[i] * kDepthPngQuantum;
      depth.valid[i] = 1;
    }
  }
  return depth;
}

// Encodes round-to-nearest raw units. A valid pixel that would round to raw 0
// (depth < 1/512 m) or overflow 16 bits is a validation error: it could not
// survive a round-trip.
inline void write_depth_png(const std::string& path, const DepthImage& depth) {
  depth.validate();
  std::vector<png_uint_16> raw(depth.values.size(), 0);
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (!depth.valid[i]) continue;
    long r = std::lround(depth.values[i] / kDepthPngQuantum);
    if (r < 1)
      throw validation_error("write_depth_png: depth " + std::to_string(depth.values[i]) +
                             " m at offset " + std::to_string(i) +
                             " is below the representable minimum (1/512 m)");
    if (r > 65535)
      throw validation_error("write_depth_png: depth " + std::to_string(depth.values[i]) +
                             " m at offset " + std::to_string(i) + " exceeds the 16-bit cap (" +
                             std::to_string(kDepthPngCap) + " m)");
    raw[i] = static_cast<png_uint_16>(r);
  }

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(depth.width);
  image.height = static_cast<png_uint_32>(depth.height);
  image.format = PNG_FORMAT_LINEAR_Y;

  if (!png_image_write_to_file(&image, path.c_str(), 0, raw.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw io_error("write_depth_png: '" + path + "': " + msg);
  }
}

}  // namespace plcor
