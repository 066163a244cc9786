// Copyright Contributors to the plcor Project
// SPDX-License-Identifier: Apache-2.0

// Command line front end. Every subcommand is a thin wrapper over one or two
// library calls so pipelines can be scripted without writing C++.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plcor/bench.hpp"
#include "plcor/gradcheck.hpp"
#include "plcor/optimize.hpp"
#include "plcor/plcor.hpp"

using namespace plcor;

namespace {

struct GridArgs {
  std::vector<double> origin = {-0.5, -0.5, 4.9};
  std::vector<double> bin_size = {0.1, 0.1, 0.1};
  std::vector<int> counts = {10, 10, 28};
  double sigma_sq = 0.01;
  std::string neighborhood = "cube26";

  void attach(CLI::App* cmd) {
    cmd->add_option("--origin", origin, "grid origin, three values")->expected(3);
    cmd->add_option("--bin-size", bin_size, "bin edge lengths, three values")->expected(3);
    cmd->add_option("--counts", counts, "bin counts per axis, three values")->expected(3);
    cmd->add_option("--sigma-sq", sigma_sq, "soft assignment bandwidth");
    cmd->add_option("--neighborhood", neighborhood, "none or cube26")
        ->check(CLI::IsMember({"none", "cube26"}));
  }

  GridSpec build() const {
    GridSpec g;
    g.origin = Vec3{origin[0], origin[1], origin[2]};
    g.bin_size = Vec3{bin_size[0], bin_size[1], bin_size[2]};
    g.counts = {counts[0], counts[1], counts[2]};
    g.sigma_sq = sigma_sq;
    g.neighborhood = neighborhood == "none" ? Neighborhood::none : Neighborhood::cube26;
    g.validate();
    return g;
  }
};

std::vector<Vec3> sweep_to_vec3(const LidarSweep& sweep) {
  std::vector<Vec3> pts;
  pts.reserve(sweep.points.size());
  for (const LidarPoint& p : sweep.points) pts.push_back(Vec3{p.x, p.y, p.z});
  return pts;
}

int run(int argc, char** argv) {
  CLI::App app{"pseudo-lidar change-of-representation toolkit"};
  app.set_config("--config", "", "read defaults from an ini file");
  app.require_subcommand(1);

  // project: depth png -> point cloud
  auto* project = app.add_subcommand("project", "back-project a depth png to a velodyne file");
  std::string pr_depth, pr_calib, pr_key = "P2", pr_out;
  project->add_option("--depth", pr_depth, "input depth png")->required();
  project->add_option("--calib", pr_calib, "calibration file")->required();
  project->add_option("--calib-key", pr_key, "projection matrix key");
  project->add_option("--output", pr_out, "output velodyne .bin")->required();
  project->callback([&] {
    const DepthImage depth = read_depth_png(pr_depth);
    const Calibration calib = parse_calibration(pr_calib, pr_key, depth.width, depth.height);
    const ProvenancedCloud cloud = depth_to_points(depth, calib.camera);
    LidarSweep sweep;
    sweep.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) {
      LidarPoint q;
      q.x = static_cast<float>(p.x);
      q.y = static_cast<float>(p.y);
      q.z = static_cast<float>(p.z);
      q.reflectance = 0.5f;
      sweep.points.push_back(q);
    }
    write_velodyne(pr_out, sweep);
    std::printf("wrote %zu points to %s\n", sweep.points.size(), pr_out.c_str());
  });

  // gtdepth: point cloud -> depth png
  auto* gtdepth = app.add_subcommand("gtdepth", "render a velodyne file to a depth png");
  std::string gt_in, gt_calib, gt_key = "P2", gt_out;
  int gt_width = 1242, gt_height = 375;
  bool gt_transform = false;
  gtdepth->add_option("--input", gt_in, "input velodyne .bin")->required();
  gtdepth->add_option("--calib", gt_calib, "calibration file")->required();
  gtdepth->add_option("--calib-key", gt_key, "projection matrix key");
  gtdepth->add_option("--width", gt_width, "image width");
  gtdepth->add_option("--height", gt_height, "image height");
  gtdepth->add_flag("--transform", gt_transform, "apply the velo-to-cam extrinsic first");
  gtdepth->add_option("--output", gt_out, "output depth png")->required();
  gtdepth->callback([&] {
    LidarSweep sweep = read_velodyne(gt_in);
    const Calibration calib = parse_calibration(gt_calib, gt_key, gt_width, gt_height);
    if (gt_transform) sweep = transform_sweep(sweep, calib.extrinsic_or_identity());
    const DepthImage depth = lidar_to_depth(sweep, calib.camera);
    write_depth_png(gt_out, depth);
    std::printf("rendered %zu valid pixels to %s\n", depth.valid_count(), gt_out.c_str());
  });

  // voxelize: point cloud -> occupancy tensor
  auto* voxelize = app.add_subcommand("voxelize", "voxelize a velodyne file to a tensor dump");
  std::string vx_in, vx_out, vx_mode = "soft";
  GridArgs vx_grid;
  voxelize->add_option("--input", vx_in, "input velodyne .bin")->required();
  voxelize->add_option("--mode", vx_mode, "hard or soft")
      ->check(CLI::IsMember({"hard", "soft"}));
  vx_grid.attach(voxelize);
  voxelize->add_option("--output", vx_out, "output tensor file")->required();
  voxelize->callback([&] {
    const LidarSweep sweep = read_velodyne(vx_in);
    const std::vector<Vec3> pts = sweep_to_vec3(sweep);
    const GridSpec grid = vx_grid.build();
    const OccupancyTensor tensor =
        vx_mode == "hard" ? hard_voxelize(pts, grid) : soft_voxelize(pts, grid).tensor;
    dump_tensor(vx_out, tensor);
    std::printf("%s tensor with %zu occupied bins written to %s\n", vx_mode.c_str(),
                tensor.entries.size(), vx_out.c_str());
  });

  // sparsify: dense cloud -> beam-like subset
  auto* sparsify = app.add_subcommand("sparsify", "angularly downsample a velodyne file");
  std::string sp_in, sp_out;
  int sp_beams = 64;
  double sp_phi_res = 0.09;
  double sp_y_limit = -1.0;
  sparsify->add_option("--input", sp_in, "input velodyne .bin")->required();
  sparsify->add_option("--beams", sp_beams, "number of vertical beams");
  sparsify->add_option("--phi-res", sp_phi_res, "azimuth resolution in degrees");
  sparsify->add_option("--y-limit", sp_y_limit, "drop points higher than this above the sensor");
  sparsify->add_option("--output", sp_out, "output velodyne .bin")->required();
  sparsify->callback([&] {
    const LidarSweep sweep = read_velodyne(sp_in);
    std::vector<Vec3> pts = sweep_to_vec3(sweep);
    std::vector<std::uint32_t> survivors(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) survivors[i] = static_cast<std::uint32_t>(i);
    if (sp_y_limit >= 0.0) {
      const KeepMap heights = filter_height(pts, sp_y_limit);
      std::vector<std::uint32_t> remap;
      for (std::uint32_t idx : heights.kept) remap.push_back(survivors[idx]);
      survivors = std::move(remap);
      pts = gather_points(pts, heights);
    }
    const KeepMap keep = angular_sparsify(pts, make_beam_spec(sp_beams, sp_phi_res));
    LidarSweep out;
    out.points.reserve(keep.kept.size());
    for (std::uint32_t idx : keep.kept) out.points.push_back(sweep.points[survivors[idx]]);
    write_velodyne(sp_out, out);
    std::printf("kept %zu of %zu points, wrote %s\n", out.points.size(), sweep.points.size(),
                sp_out.c_str());
  });

  // gradcheck: finite-difference audit of the full chain
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit on a random scene");
  double gc_h = 1e-5, gc_tol = 1e-5;
  std::uint64_t gc_seed = 1;
  int gc_scenes = 5;
  gradcheck->add_option("--step", gc_h, "central difference step");
  gradcheck->add_option("--tol", gc_tol, "maximum relative error accepted");
  gradcheck->add_option("--seed", gc_seed, "seed of the first scene");
  gradcheck->add_option("--scenes", gc_scenes, "number of scenes");
  gradcheck->callback([&] {
    // Central differences are only meaningful away from bin faces, where bin
    // membership (and with it the tensor layout) is locally constant. Depths
    // are resampled until every back-projected coordinate keeps a 5% margin.
    GridSpec grid;
    grid.origin = Vec3{-0.5, -0.5, 0.95};
    grid.bin_size = Vec3{0.2, 0.2, 0.3};
    grid.counts = {5, 5, 3};
    grid.sigma_sq = 0.01;
    grid.neighborhood = Neighborhood::cube26;
    const CameraModel cam = camera_for(8, 8, 16.0);

    auto offset_ok = [](double coord, double origin, double width) {
      const double f = (coord - origin) / width;
      const double frac = f - std::floor(f);
      return frac > 0.05 && frac < 0.95;
    };

    double worst = 0.0;
    for (int i = 0; i < gc_scenes; ++i) {
      const std::uint64_t seed = gc_seed + static_cast<std::uint64_t>(i);
      detail::SynthRng rng(seed);
      DepthImage depth(8, 8);
      for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
          for (int attempt = 0; attempt < 200; ++attempt) {
            const double z = rng.uniform(1.05, 1.55);
            const Vec3 p{(u - cam.c_u) * z / cam.f_u, (v - cam.c_v) * z / cam.f_v, z};
            if (assign_bin(p, grid) == kOutOfGrid) continue;
            if (!offset_ok(p.x, grid.origin.x, grid.bin_size.x) ||
                !offset_ok(p.y, grid.origin.y, grid.bin_size.y) ||
                !offset_ok(p.z, grid.origin.z, grid.bin_size.z))
              continue;
            depth.set(u, v, z);
            break;
          }
        }
      }
      std::vector<Vec3> target_pts;
      for (int k = 0; k < 20; ++k) {
        target_pts.push_back(Vec3{grid.origin.x + rng.next_unit() * 1.0,
                                  grid.origin.y + rng.next_unit() * 1.0,
                                  grid.origin.z + rng.next_unit() * 0.9});
      }
      const TargetOccupancy target = hard_voxelize(target_pts, grid);

      auto loss = [&](const DepthImage& z) {
        const SoftVoxelization sv = soft_voxelize(depth_to_points(z, cam).points, grid);
        return surrogate_det_loss(sv.tensor, target).loss;
      };
      auto grad = [&](const DepthImage& z) {
        const ProvenancedCloud cloud = depth_to_points(z, cam);
        const SoftVoxelization sv = soft_voxelize(cloud.points, grid);
        const SurrogateDetResult det = surrogate_det_loss(sv.tensor, target);
        const TensorGrad tg = restrict_to_stored(sv.backward, det.grad);
        const PointGrad pg = voxelize_backward(sv.backward, tg, cloud.points);
        return backprop_to_depth(cloud, pg, cam);
      };
      const GradCheckReport rep = finite_diff_check(depth, loss, grad, gc_h);
      std::printf("scene %llu: %zu pixels, max rel error %.3g at (%d,%d)\n",
                  static_cast<unsigned long long>(seed), rep.checked, rep.max_rel_error,
                  rep.worst.u, rep.worst.v);
      worst = std::max(worst, rep.max_rel_error);
    }
    std::printf("worst %.3g, tolerance %.3g: %s\n", worst, gc_tol,
                worst <= gc_tol ? "ok" : "FAILED");
    if (worst > gc_tol) throw validation_error("gradcheck: tolerance exceeded");
  });

  // demo-e2e: optimize a synthetic scene end to end
  auto* demo = app.add_subcommand("demo-e2e", "run the depth correction demo scene");
  int de_steps = 200;
  double de_lr = 1e-3, de_lambda_depth = 0.0, de_lambda_det = 1.0;
  std::string de_trace;
  demo->add_option("--steps", de_steps, "gradient steps");
  demo->add_option("--lr", de_lr, "learning rate");
  demo->add_option("--lambda-depth", de_lambda_depth, "depth loss weight");
  demo->add_option("--lambda-det", de_lambda_det, "surrogate loss weight");
  demo->add_option("--trace", de_trace, "write a per-step csv here");
  demo->callback([&] {
    DemoSetup setup = make_standard_demo();
    setup.steps = de_steps;
    setup.lr = de_lr;
    const Scene scene = synth_scene(setup.scene);
    const ProvenancedCloud truth = depth_to_points(scene.z_true, scene.camera);
    const TargetOccupancy target = hard_voxelize(truth.points, setup.grid);

    LossWeights w;
    w.lambda_depth = de_lambda_depth;
    w.lambda_det = de_lambda_det;
    const OptimResult res = optimize_depth(scene.z_init, target, scene.camera, setup.grid, w,
                                           scene.z_true, setup.steps, setup.lr);

    if (!de_trace.empty()) {
      std::FILE* f = std::fopen(de_trace.c_str(), "w");
      if (!f) throw io_error("demo-e2e: cannot open '" + de_trace + "' for writing");
      std::fprintf(f, "step,loss,det_loss,depth_loss,mean_target_dist\n");
      for (std::size_t i = 0; i < res.trace.steps.size(); ++i) {
        const OptimStep& s = res.trace.steps[i];
        std::fprintf(f, "%zu,%.12g,%.12g,%.12g,%.12g\n", i, s.loss, s.det_loss, s.depth_loss,
                     s.mean_target_dist);
      }
      std::fclose(f);
    }

    const double rmse0 = masked_rmse(scene.z_init, scene.z_true, scene.object_mask, 0);
    const double rmse1 = masked_rmse(res.depth, scene.z_true, scene.object_mask, 0);
    std::printf("loss %.6g -> %.6g (%.1f%%)\n", res.trace.steps[0].loss, res.trace.final_loss,
                100.0 * res.trace.final_loss / res.trace.steps[0].loss);
    std::printf("mean distance to target bins %.4f -> %.4f\n",
                res.trace.steps[0].mean_target_dist, res.trace.final_mean_target_dist);
    std::printf("background rmse %.6g -> %.6g\n", rmse0, rmse1);
  });

  // stats: gradient coverage of the three supervision paths
  auto* stats = app.add_subcommand("stats", "gradient coverage per loss path, csv on stdout");
  stats->callback([&] {
    const RatioSetup setup = make_ratio_setup();
    const Scene scene = synth_scene(setup.scene);
    const SparseSupervision sup = make_sparse_supervision(
        scene.z_true, scene.camera, setup.supervision_beams, setup.supervision_phi_res_deg);
    const ProvenancedCloud truth = depth_to_points(scene.z_true, scene.camera);
    const TargetOccupancy target = hard_voxelize(truth.points, setup.grid);

    const ProvenancedCloud cloud = depth_to_points(scene.z_init, scene.camera);
    const SoftVoxelization sv = soft_voxelize(cloud.points, setup.grid);
    const SurrogateDetResult det = surrogate_det_loss(sv.tensor, target);
    const TensorGrad tg = restrict_to_stored(sv.backward, det.grad);
    const PointGrad pg = voxelize_backward(sv.backward, tg, cloud.points);
    const GradStats quantized = gradient_stats(backprop_to_depth(cloud, pg, scene.camera));

    const KeepMap keep = angular_sparsify(cloud.points, make_beam_spec());
    const std::vector<Vec3> kept_pts = gather_points(cloud.points, keep);
    const SoftVoxelization sv2 = soft_voxelize(kept_pts, setup.grid);
    const SurrogateDetResult det2 = surrogate_det_loss(sv2.tensor, target);
    const TensorGrad tg2 = restrict_to_stored(sv2.backward, det2.grad);
    const PointGrad pg2 = voxelize_backward(sv2.backward, tg2, kept_pts);
    const GradStats sparsified =
        gradient_stats(backprop_to_depth(cloud, scatter_grads(keep, pg2), scene.camera));

    const GradStats depth = gradient_stats(depth_loss(scene.z_init, sup.depth).grad);

    std::printf("path,ratio,mean_abs,sum_abs\n");
    std::printf("%s\n", stats_csv_row("quantized", quantized).c_str());
    std::printf("%s\n", stats_csv_row("sparsified", sparsified).c_str());
    std::printf("%s\n", stats_csv_row("depth", depth).c_str());
  });

  // bench: timing of the voxelizer at sensor scale
  auto* bench = app.add_subcommand("bench", "time soft voxelization on the full-scale grid");
  std::size_t bn_points = 300000;
  int bn_reps = 3, bn_doublings = 0;
  bench->add_option("--points", bn_points, "cloud size");
  bench->add_option("--reps", bn_reps, "repetitions, fastest reported");
  bench->add_option("--doublings", bn_doublings, "also measure scaling over this many doublings");
  bench->callback([&] {
    const GridSpec grid = make_full_scale_grid();
    const BenchReport rep = bench_voxelize(bn_points, grid, bn_reps);
    std::printf("%zu points: hard %.1f ms, soft forward %.1f ms, backward %.1f ms, total %.1f ms\n",
                rep.n_points, rep.hard_forward_ms, rep.soft_forward_ms, rep.soft_backward_ms,
                rep.soft_total_ms());
    if (bn_doublings > 0) {
      const ScalingReport sc =
          bench_scaling(bn_points >> bn_doublings, bn_doublings, grid, bn_reps);
      for (const BenchReport& r : sc.rows)
        std::printf("%zu points: soft total %.1f ms\n", r.n_points, r.soft_total_ms());
      std::printf("worst doubling ratio %.2f\n", sc.worst_doubling_ratio);
    }
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const validation_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
