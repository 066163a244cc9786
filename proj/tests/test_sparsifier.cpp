// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "plcor/projection.hpp"
#include "plcor/sparsifier.hpp"
#include "plcor/synth.hpp"

using namespace plcor;

namespace {

// Brute-force census: group points by angular bin straight from the
// definition and pick the winner by (distance to bin centre, range, index).
struct CensusWinner {
  double dist2;
  double r;
  std::size_t index;
};

std::map<std::pair<int, int>, CensusWinner> census(const std::vector<Vec3>& points,
                                                   const SphericalBinSpec& spec) {
  std::map<std::pair<int, int>, CensusWinner> bins;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    const double theta = std::atan2(-p.y, std::hypot(p.x, p.z));
    const double phi = std::atan2(p.x, p.z);
    if (theta < spec.theta_min || theta >= spec.theta_max) continue;
    if (phi < spec.phi_min || phi >= spec.phi_max) continue;
    const int bt = static_cast<int>((theta - spec.theta_min) / spec.theta_step());
    const int bp = static_cast<int>((phi - spec.phi_min) / spec.phi_step());
    const double tc = spec.theta_min + (bt + 0.5) * spec.theta_step();
    const double pc = spec.phi_min + (bp + 0.5) * spec.phi_step();
    const double dt = theta - tc, dp = phi - pc;
    const CensusWinner cand{dt * dt + dp * dp, r, i};
    auto [it, fresh] = bins.try_emplace({bt, bp}, cand);
    if (!fresh) {
      const CensusWinner& cur = it->second;
      if (cand.dist2 < cur.dist2 || (cand.dist2 == cur.dist2 && cand.r < cur.r) ||
          (cand.dist2 == cur.dist2 && cand.r == cur.r && cand.index < cur.index))
        it->second = cand;
    }
  }
  return bins;
}

}  // namespace

TEST_CASE("beam spec defaults describe a 64-beam sensor window", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  CHECK(spec.n_theta == 64);
  CHECK(spec.theta_min == Catch::Approx(-24.9 * kDegToRad).epsilon(1e-12));
  CHECK(spec.theta_max == Catch::Approx(2.0 * kDegToRad).epsilon(1e-12));
  CHECK(spec.n_phi == 1000);  // 90 degrees at 0.09 degree resolution
  REQUIRE_NOTHROW(spec.validate());

  REQUIRE_THROWS_AS(make_beam_spec(0, 0.09), validation_error);
  REQUIRE_THROWS_AS(make_beam_spec(64, 0.0), validation_error);
}

TEST_CASE("a single in-window point survives sparsification", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  const std::vector<Vec3> pts = {Vec3{0.0, 0.0, 10.0}};
  const KeepMap keep = angular_sparsify(pts, spec);
  REQUIRE(keep.kept.size() == 1);
  CHECK(keep.kept[0] == 0);
  CHECK(keep.n_points == 1);
  CHECK(keep.bin_of_kept[0] >= 0);
}

TEST_CASE("nearer of two same-bin points wins", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  // Same boresight ray, different ranges: both angles are exactly zero, so
  // the bin and the distance-to-centre tie exactly and the range tiebreak
  // keeps the nearer return.
  const std::vector<Vec3> pts = {Vec3{0.0, 0.0, 20.0}, Vec3{0.0, 0.0, 10.0}};
  const KeepMap keep = angular_sparsify(pts, spec);
  REQUIRE(keep.kept.size() == 1);
  CHECK(keep.kept[0] == 1);
}

TEST_CASE("identical points fall back to the index tiebreak", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  const std::vector<Vec3> pts = {Vec3{0.3, 0.1, 5.0}, Vec3{0.3, 0.1, 5.0}};
  const KeepMap keep = angular_sparsify(pts, spec);
  REQUIRE(keep.kept.size() == 1);
  CHECK(keep.kept[0] == 0);
}

TEST_CASE("points outside the angular window are dropped", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  // Steeply upward (elevation above +2 deg) and far sideways (azimuth beyond
  // +45 deg) both fall outside the window.
  const std::vector<Vec3> pts = {Vec3{0.0, -5.0, 5.0}, Vec3{10.0, 0.0, 5.0},
                                 Vec3{0.0, 0.3, 8.0}};
  const KeepMap keep = angular_sparsify(pts, spec);
  REQUIRE(keep.kept.size() == 1);
  CHECK(keep.kept[0] == 2);
}

TEST_CASE("sparsifier rejects non-forward points", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  REQUIRE_THROWS_AS(angular_sparsify({Vec3{0.0, 0.0, -1.0}}, spec), validation_error);
  REQUIRE_THROWS_AS(angular_sparsify({Vec3{1.0, 1.0, 0.0}}, spec), validation_error);
}

TEST_CASE("sparsify agrees with the brute-force census", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec(16, 1.0);
  detail::SynthRng rng(0xca15ULL);
  std::vector<Vec3> pts(4000);
  for (Vec3& p : pts)
    p = Vec3{rng.uniform(-8.0, 8.0), rng.uniform(-2.0, 2.0), rng.uniform(0.5, 30.0)};

  const KeepMap keep = angular_sparsify(pts, spec);
  const auto oracle = census(pts, spec);
  REQUIRE(keep.kept.size() == oracle.size());
  std::map<std::size_t, bool> kept_set;
  for (auto& [bin, w] : oracle) kept_set[w.index] = true;
  for (std::uint32_t idx : keep.kept) CHECK(kept_set.count(idx) == 1);
  // Ascending index order is part of the contract.
  for (std::size_t i = 1; i < keep.kept.size(); ++i) CHECK(keep.kept[i] > keep.kept[i - 1]);
}

TEST_CASE("sparsification is idempotent on the kept subset", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec(32, 0.5);
  detail::SynthRng rng(0x1de3ULL);
  std::vector<Vec3> pts(2000);
  for (Vec3& p : pts)
    p = Vec3{rng.uniform(-5.0, 5.0), rng.uniform(-1.5, 1.5), rng.uniform(1.0, 40.0)};

  const KeepMap first = angular_sparsify(pts, spec);
  const std::vector<Vec3> kept_points = gather_points(pts, first);
  const KeepMap second = angular_sparsify(kept_points, spec);
  // One survivor per bin already: the second pass keeps everything.
  CHECK(second.kept.size() == kept_points.size());
}

TEST_CASE("pigeonhole bound on a dense hemisphere", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  detail::SynthRng rng(0x8e81ULL);
  std::vector<Vec3> pts(1000000);
  for (Vec3& p : pts) {
    // Forward hemisphere in front of the sensor.
    p = Vec3{rng.uniform(-30.0, 30.0), rng.uniform(-6.0, 6.0), rng.uniform(0.1, 60.0)};
  }
  const KeepMap keep = angular_sparsify(pts, spec);
  CHECK(keep.kept.size() <= static_cast<std::size_t>(spec.n_theta) * spec.n_phi);
  CHECK(keep.kept.size() == census(pts, spec).size());
}

TEST_CASE("height filter keeps returns at or below the ceiling", "[sparsifier]") {
  // y points down: a point 2 m above the camera has y = -2.
  const std::vector<Vec3> pts = {Vec3{0.0, -2.0, 5.0}, Vec3{0.0, 1.5, 5.0},
                                 Vec3{0.0, -0.99, 5.0}};
  const KeepMap keep = filter_height(pts, 1.0);
  REQUIRE(keep.kept.size() == 2);
  CHECK(keep.kept[0] == 1);
  CHECK(keep.kept[1] == 2);

  const KeepMap all = filter_height(pts, std::numeric_limits<double>::infinity());
  CHECK(all.kept.size() == 3);
  REQUIRE_THROWS_AS(filter_height(pts, std::numeric_limits<double>::quiet_NaN()),
                    validation_error);
}

TEST_CASE("scatter_grads places kept gradients and exact zeros elsewhere", "[sparsifier]") {
  const SphericalBinSpec spec = make_beam_spec();
  const std::vector<Vec3> pts = {Vec3{0.0, 0.0, 5.0}, Vec3{0.0, 0.0, 5.0},
                                 Vec3{3.0, 0.5, 7.0}};
  const KeepMap keep = angular_sparsify(pts, spec);
  REQUIRE(keep.kept.size() == 2);

  PointGrad kept_grads(keep.kept.size(), Vec3{1.0, 2.0, 3.0});
  const PointGrad full = scatter_grads(keep, kept_grads);
  REQUIRE(full.size() == 3);
  CHECK(full[0].x == 1.0);
  CHECK(full[1].x == 0.0);
  CHECK(full[1].y == 0.0);
  CHECK(full[1].z == 0.0);
  CHECK(full[2].z == 3.0);

  SECTION("size mismatch is rejected") {
    REQUIRE_THROWS_AS(scatter_grads(keep, PointGrad(5)), validation_error);
  }
}

TEST_CASE("sparsified pipeline keeps far fewer points than the source cloud", "[sparsifier]") {
  SceneSpec sc;
  sc.width = 64;
  sc.height = 64;
  sc.focal = 40.0;
  sc.object_count = 1;
  sc.object_size_px = 20;
  sc.object_depth_min = 6.0;
  sc.object_depth_max = 6.0;
  sc.background_depth = 20.0;
  const Scene scene = synth_scene(sc);
  const ProvenancedCloud cloud = depth_to_points(scene.z_true, scene.camera);
  const KeepMap keep = angular_sparsify(cloud.points, make_beam_spec(16, 1.5));
  CHECK(keep.kept.size() < cloud.points.size() / 4);
  CHECK(keep.kept.size() > 0);
}
