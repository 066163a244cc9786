// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "plcor/depth_png.hpp"
#include "plcor/kitti_io.hpp"

namespace fs = std::filesystem;
using namespace plcor;

namespace {

// Every fixture is built at the byte level so the parser is checked against
// the wire format, not against the writer.
fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "plcor_kitti_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

void append_f32(std::vector<unsigned char>& bytes, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  bytes.push_back(static_cast<unsigned char>(bits & 0xffu));
  bytes.push_back(static_cast<unsigned char>((bits >> 8) & 0xffu));
  bytes.push_back(static_cast<unsigned char>((bits >> 16) & 0xffu));
  bytes.push_back(static_cast<unsigned char>((bits >> 24) & 0xffu));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("velodyne parser reads hand-built records", "[kitti_io]") {
  std::vector<unsigned char> bytes;
  append_f32(bytes, 1.5f);
  append_f32(bytes, -2.25f);
  append_f32(bytes, 10.0f);
  append_f32(bytes, 0.5f);
  append_f32(bytes, 0.0f);
  append_f32(bytes, 0.0f);
  append_f32(bytes, -0.0f);
  append_f32(bytes, 1.0f);
  const fs::path p = temp_file("two_records.bin");
  write_bytes(p, bytes);

  const LidarSweep sweep = read_velodyne(p.string());
  REQUIRE(sweep.points.size() == 2);
  CHECK(sweep.points[0].x == 1.5f);
  CHECK(sweep.points[0].y == -2.25f);
  CHECK(sweep.points[0].z == 10.0f);
  CHECK(sweep.points[0].reflectance == 0.5f);
  CHECK(std::bit_cast<std::uint32_t>(sweep.points[1].z) ==
        std::bit_cast<std::uint32_t>(-0.0f));
  CHECK(sweep.points[1].reflectance == 1.0f);
}

TEST_CASE("velodyne parser rejects trailing bytes naming the offset", "[kitti_io]") {
  std::vector<unsigned char> bytes(16 * 2 + 8, 0);
  const fs::path p = temp_file("trailing.bin");
  write_bytes(p, bytes);
  REQUIRE_THROWS_MATCHES(read_velodyne(p.string()), validation_error,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("32")));
}

TEST_CASE("velodyne parser rejects non-finite and out-of-range records", "[kitti_io]") {
  SECTION("NaN coordinate names the record") {
    std::vector<unsigned char> bytes;
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, std::numeric_limits<float>::quiet_NaN());
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    const fs::path p = temp_file("nan.bin");
    write_bytes(p, bytes);
    REQUIRE_THROWS_MATCHES(
        read_velodyne(p.string()), validation_error,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("record 1")));
  }
  SECTION("reflectance above 1 is rejected") {
    std::vector<unsigned char> bytes;
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, 0.0f);
    append_f32(bytes, 1.5f);
    const fs::path p = temp_file("refl.bin");
    write_bytes(p, bytes);
    REQUIRE_THROWS_AS(read_velodyne(p.string()), validation_error);
  }
}

TEST_CASE("velodyne write/read round-trip is bit-exact", "[kitti_io]") {
  LidarSweep sweep;
  sweep.points.push_back({1.0f, 2.0f, 3.0f, 0.0f});
  sweep.points.push_back({-0.0f, 1e-38f, 123456.78f, 1.0f});
  sweep.points.push_back({0.1f, -0.2f, 0.3f, 0.25f});
  const fs::path p = temp_file("roundtrip.bin");
  write_velodyne(p.string(), sweep);
  const LidarSweep back = read_velodyne(p.string());
  REQUIRE(back.points.size() == sweep.points.size());
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    CHECK(std::bit_cast<std::uint32_t>(back.points[i].x) ==
          std::bit_cast<std::uint32_t>(sweep.points[i].x));
    CHECK(std::bit_cast<std::uint32_t>(back.points[i].y) ==
          std::bit_cast<std::uint32_t>(sweep.points[i].y));
    CHECK(std::bit_cast<std::uint32_t>(back.points[i].z) ==
          std::bit_cast<std::uint32_t>(sweep.points[i].z));
    CHECK(std::bit_cast<std::uint32_t>(back.points[i].reflectance) ==
          std::bit_cast<std::uint32_t>(sweep.points[i].reflectance));
  }
  CHECK(fs::file_size(p) == sweep.points.size() * 16);
}

TEST_CASE("velodyne writer rejects invalid sweeps without touching the file", "[kitti_io]") {
  LidarSweep sweep;
  sweep.points.push_back({0.0f, 0.0f, 0.0f, 2.0f});
  const fs::path p = temp_file("never_written.bin");
  fs::remove(p);
  REQUIRE_THROWS_AS(write_velodyne(p.string(), sweep), validation_error);
  CHECK(!fs::exists(p));
}

TEST_CASE("missing velodyne file raises io_error", "[kitti_io]") {
  REQUIRE_THROWS_AS(read_velodyne((temp_file("absent") / "nope.bin").string()), io_error);
}

TEST_CASE("calibration parser extracts intrinsics from the projection row", "[kitti_io]") {
  const fs::path p = temp_file("calib.txt");
  write_text(p,
             "P0: 90 0 45 0 0 90 30 0 0 0 1 0\n"
             "P2: 100 0 50 0 0 100 40 0 0 0 1 0\n"
             "Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0.27\n");
  const Calibration calib = parse_calibration(p.string(), "P2", 101, 81);
  CHECK(calib.camera.f_u == 100.0);
  CHECK(calib.camera.f_v == 100.0);
  CHECK(calib.camera.c_u == 50.0);
  CHECK(calib.camera.c_v == 40.0);
  CHECK(calib.camera.image_width == 101);
  REQUIRE(calib.velo_to_cam.has_value());
  CHECK((*calib.velo_to_cam)[11] == 0.27);

  SECTION("missing extrinsic falls back to identity") {
    const fs::path q = temp_file("calib_noext.txt");
    write_text(q, "P2: 100 0 50 0 0 100 40 0 0 0 1 0\n");
    const Calibration c2 = parse_calibration(q.string(), "P2", 101, 81);
    CHECK(!c2.velo_to_cam.has_value());
    CHECK(c2.extrinsic_or_identity() == kIdentityExtrinsic);
  }
}

TEST_CASE("calibration parser failure modes", "[kitti_io]") {
  SECTION("missing projection key names it") {
    const fs::path p = temp_file("calib_missing.txt");
    write_text(p, "P0: 90 0 45 0 0 90 30 0 0 0 1 0\n");
    REQUIRE_THROWS_MATCHES(
        parse_calibration(p.string(), "P2", 100, 80), validation_error,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("P2")));
  }
  SECTION("malformed float reports the line number") {
    const fs::path p = temp_file("calib_bad.txt");
    write_text(p, "# comment\nP2: 100 0 xyz 0 0 100 40 0 0 0 1 0\n");
    REQUIRE_THROWS_MATCHES(
        parse_calibration(p.string(), "P2", 100, 80), validation_error,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 2")));
  }
  SECTION("wrong element count is rejected") {
    const fs::path p = temp_file("calib_short.txt");
    write_text(p, "P2: 100 0 50 0 0 100 40 0 0 0 1\n");
    REQUIRE_THROWS_AS(parse_calibration(p.string(), "P2", 100, 80), validation_error);
  }
}

TEST_CASE("transform_sweep applies a rigid extrinsic in double precision", "[kitti_io]") {
  LidarSweep sweep;
  sweep.points.push_back({1.0f, 2.0f, 3.0f, 0.5f});
  // Axis swap plus translation: (x,y,z) -> (-y, -z, x + 0.27).
  const Mat3x4 m = {0, -1, 0, 0,  //
                    0, 0, -1, 0,  //
                    1, 0, 0, 0.27};
  const LidarSweep out = transform_sweep(sweep, m);
  REQUIRE(out.points.size() == 1);
  CHECK(out.points[0].x == -2.0f);
  CHECK(out.points[0].y == -3.0f);
  CHECK(out.points[0].z == Catch::Approx(1.27).margin(1e-6));
  CHECK(out.points[0].reflectance == 0.5f);

  const LidarSweep same = transform_sweep(sweep, kIdentityExtrinsic);
  CHECK(same.points[0].x == sweep.points[0].x);
  CHECK(same.points[0].y == sweep.points[0].y);
  CHECK(same.points[0].z == sweep.points[0].z);
}

TEST_CASE("lidar_to_depth keeps the nearest return per pixel", "[kitti_io]") {
  CameraModel cam;
  cam.f_u = 100.0;
  cam.f_v = 100.0;
  cam.c_u = 50.0;
  cam.c_v = 40.0;
  cam.image_width = 101;
  cam.image_height = 81;

  LidarSweep sweep;
  sweep.points.push_back({1.0f, -1.0f, 10.0f, 0.0f});   // pixel (60, 30)
  sweep.points.push_back({0.5f, -0.5f, 5.0f, 0.0f});    // same pixel, nearer
  sweep.points.push_back({0.0f, 0.0f, -3.0f, 0.0f});    // behind the camera
  sweep.points.push_back({100.0f, 0.0f, 1.0f, 0.0f});   // projects off-image
  const DepthImage depth = lidar_to_depth(sweep, cam);
  CHECK(depth.valid_count() == 1);
  REQUIRE(depth.is_valid(60, 30));
  CHECK(depth.at(60, 30) == 5.0);
}

TEST_CASE("depth png round-trip stays within the encode quantum", "[kitti_io]") {
  DepthImage depth(5, 3);
  depth.set(0, 0, 12.5);                  // exactly representable: raw 3200
  depth.set(1, 0, 0.004);                 // rounds to raw 1
  depth.set(2, 0, kDepthPngCap);          // top of range
  depth.set(3, 1, 7.123456);
  depth.set(4, 2, 0.25);
  const fs::path p = temp_file("depth.png");
  write_depth_png(p.string(), depth);
  const DepthImage back = read_depth_png(p.string());
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  for (int v = 0; v < 3; ++v) {
    for (int u = 0; u < 5; ++u) {
      REQUIRE(back.is_valid(u, v) == depth.is_valid(u, v));
      if (depth.is_valid(u, v))
        CHECK(std::fabs(back.at(u, v) - depth.at(u, v)) <= 0.5 * kDepthPngQuantum);
    }
  }
  CHECK(back.at(0, 0) == 12.5);
  CHECK(back.at(1, 0) == 1.0 / 256.0);
  CHECK(back.at(2, 0) == kDepthPngCap);
}

TEST_CASE("depth png writer rejects out-of-range values", "[kitti_io]") {
  SECTION("above cap") {
    DepthImage depth(1, 1);
    depth.set(0, 0, kDepthPngCap + 1.0);
    REQUIRE_THROWS_AS(write_depth_png(temp_file("over.png").string(), depth), validation_error);
  }
  SECTION("below half quantum would encode as invalid") {
    DepthImage depth(1, 1);
    depth.set(0, 0, 1.0 / 1024.0);
    REQUIRE_THROWS_AS(write_depth_png(temp_file("under.png").string(), depth), validation_error);
  }
}

TEST_CASE("depth png reader rejects wrong formats", "[kitti_io]") {
  SECTION("garbage bytes") {
    const fs::path p = temp_file("garbage.png");
    write_bytes(p, {0x12, 0x34, 0x56, 0x78, 0x9a});
    REQUIRE_THROWS_AS(read_depth_png(p.string()), io_error);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(read_depth_png((temp_file("absent2") / "nope.png").string()), io_error);
  }
}
