#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pcup/cloud.hpp"
#include "pcup/io.hpp"
#include "pcup/metrics.hpp"
#include "pcup/neu.hpp"
#include "pcup/optim.hpp"
#include "pcup/raster.hpp"
#include "pcup/surfel.hpp"
#include "run_config.hpp"

namespace {

using namespace pcup;

// Exit codes shared by every subcommand.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNumericalFailure = 3;

// Records only the flags the user actually passed, so they can be layered
// over the config file without clobbering file entries with defaults.
struct FlagLayer {
  std::map<std::string, std::string> values;

  CLI::Option* add(CLI::App* cmd, const std::string& flag, const std::string& key,
                   const std::string& help) {
    return cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& value) { values[key] = value; }, help);
  }
};

// Config file first (data errors), then flags (usage errors).
cli::RunConfig resolve_config(const std::string& config_path, const FlagLayer& flags) {
  cli::RunConfig config;
  if (!config_path.empty()) cli::apply(config, read_config(config_path));
  try {
    cli::apply(config, flags.values);
  } catch (const DataError& bad_flag) {
    throw std::invalid_argument(bad_flag.what());
  }
  return config;
}

Points random_cloud(Index n, std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  Points c(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = u(rng);
  return c;
}

int run_upsample(const std::string& input, const std::string& out, const std::string& config_path,
                 const std::string& trace_path, const std::string& params_path,
                 const FlagLayer& flags) {
  const cli::RunConfig config = resolve_config(config_path, flags);
  const Points cloud = read_xyz(input);
  const CameraRig rig = cli::view_ring(config);

  Points dense;
  OptimTrace trace;
  if (config.mode == "direct") {
    DirectResult result =
        upsample_direct(cloud, config.rate, rig, cli::optimizer_config(config, config.iters));
    dense = std::move(result.dense);
    trace = std::move(result.trace);
  } else {
    // The network operates on unit-sphere patches; optimize it on the input
    // itself (or reuse saved weights) and map the output back.
    const Normalized normalized = normalize_unit_sphere(cloud);
    NeuParams params;
    if (!params_path.empty()) {
      params = load_params(params_path);
    } else {
      Patch patch;
      patch.points = normalized.points;
      patch.centroid = normalized.centroid;
      patch.scale = normalized.scale;
      TrainResult trained =
          train_neu({patch}, config.rate, rig, cli::optimizer_config(config, config.iters),
                    NeuDims{config.width, config.neighbors});
      params = std::move(trained.params);
      trace = std::move(trained.trace);
    }
    dense = upsampler_forward(normalized.points, config.rate, params);
    dense = (dense * normalized.scale).rowwise() + normalized.centroid.transpose();
  }

  write_xyz(dense, out);
  if (!trace_path.empty()) write_trace_csv(trace, trace_path);
  std::cout << "wrote " << dense.rows() << " points to " << out << '\n';
  if (!trace.reports.empty())
    std::cout << "joint loss " << trace.reports.front().joint << " -> "
              << trace.reports.back().joint << " over " << trace.reports.size() << " steps\n";
  return kOk;
}

int run_render(const std::string& input, const std::string& out_dir,
               const std::string& config_path, const FlagLayer& flags) {
  const cli::RunConfig config = resolve_config(config_path, flags);
  const Points cloud = read_xyz(input);
  const CameraRig rig = cli::view_ring(config);
  RenderParams params;
  params.gamma = config.gamma;
  params.scale = config.scale;
  const std::vector<SilhouetteImage> images = render_views(cloud, rig, params);

  std::filesystem::create_directories(out_dir);
  for (std::size_t v = 0; v < images.size(); ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%02zu.pgm", v);
    write_pgm(images[v], (std::filesystem::path(out_dir) / name).string());
  }
  std::cout << "wrote " << images.size() << " views to " << out_dir << '\n';
  return kOk;
}

int run_evaluate(const std::string& pred_path, const std::string& ref_path,
                 const std::string& mesh_path) {
  const Points pred = read_xyz(pred_path);
  const Points ref = read_xyz(ref_path);
  MetricReport report;
  if (mesh_path.empty()) {
    report = evaluate(pred, ref);
  } else {
    const ReferenceMesh mesh = read_off(mesh_path);
    report = evaluate(pred, ref, &mesh);
  }
  std::cout << report.to_kv();
  return kOk;
}

// Central finite difference hardened against isolated derivative kinks
// (pixel-boundary crossings in the rasterizer, ReLU sign changes in the
// network): halve the step until two successive Richardson extrapolations
// agree, so a kink inside the original interval is stepped over instead of
// polluting the estimate. Descent stops after six halvings, where the
// difference quotient's rounding noise reaches the acceptance floor.
template <typename Central>
double settled_fd(const Central& central, double h0) {
  double h = h0;
  double at_h = central(h);
  double at_half = central(h / 2);
  double estimate = (4 * at_half - at_h) / 3;
  for (int level = 0; level < 6; ++level) {
    h /= 2;
    at_h = at_half;
    at_half = central(h / 2);
    const double refined = (4 * at_half - at_h) / 3;
    if (std::abs(refined - estimate) < 2e-5 * std::abs(refined) + 4e-9) return refined;
    estimate = refined;
  }
  return estimate;
}

// Finite-difference audit of the two analytic gradients: the silhouette
// rasterizer (frames frozen, as the reported gradient defines them) and the
// upsampling network's parameter gradients through a quadratic stand-in loss.
int run_gradcheck(std::uint64_t seed) {
  const double gamma = 1e-4;
  const double h = 1e-4;
  bool failed = false;

  double worst_render = 0.0;
  Index worst_point = 0;
  int worst_axis = 0;
  for (int config_index = 0; config_index < 10; ++config_index) {
    const std::uint64_t base = seed + 10 * static_cast<std::uint64_t>(config_index);
    std::mt19937_64 rng(base);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Points cloud = random_cloud(4 + config_index % 5, base + 1, 0.8);
    const CameraRig rig = make_view_ring(1, 2.5, 20.0, 16, 16);
    const Camera& cam = rig.cameras[0];
    const SurfelSoup soup = build_tangent_triangles(cloud, cam);

    SilhouetteImage upstream;
    upstream.pixels = Eigen::ArrayXXd::Zero(16, 16);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) upstream.pixels(r, c) = u01(rng);

    const auto loss_at = [&](const Points& pts) {
      return (upstream.pixels * rasterize_silhouette(with_positions(soup, pts), cam, 16, 16, gamma)
                                    .pixels)
          .sum();
    };
    const Points grad = rasterize_gradient(soup, cam, gamma, upstream);
    for (Index i = 0; i < cloud.rows(); ++i) {
      for (int k = 0; k < 3; ++k) {
        const auto central = [&](double step) {
          Points lo = cloud, hi = cloud;
          lo(i, k) -= step;
          hi(i, k) += step;
          return (loss_at(hi) - loss_at(lo)) / (2 * step);
        };
        const double fd = settled_fd(central, h);
        const double mag = std::max(std::abs(grad(i, k)), std::abs(fd));
        // Graded comparison: relative for ordinary magnitudes, absolute at
        // 1e-8 once the gradient itself is near the rounding floor.
        const double rel = std::abs(grad(i, k) - fd) / (mag + 1e-4);
        if (rel > worst_render) {
          worst_render = rel;
          worst_point = i;
          worst_axis = k;
        }
      }
    }
  }
  std::cout << "renderer gradient: worst relative error " << worst_render
            << " (threshold 0.0001), worst at point " << worst_point << " axis "
            << "xyz"[worst_axis] << '\n';
  if (!(worst_render < 1e-4)) failed = true;

  const Index n = 8, rate = 2;
  const NeuParams params = init_params(seed + 1000, NeuDims{4, 2});
  const Points cloud = random_cloud(n, seed + 2000, 1.0);
  const Points anchor = random_cloud(n * rate, seed + 3000, 1.0);
  const LossTail tail = [&](const Points& dense, Points* d_dense) {
    if (d_dense != nullptr) *d_dense = 2.0 * (dense - anchor);
    return (dense - anchor).squaredNorm();
  };
  const Eigen::VectorXd analytic = flatten_params(upsampler_gradient(cloud, rate, params, tail));
  Eigen::VectorXd flat = flatten_params(params);
  NeuParams probe = params;
  const auto loss_with = [&](const Eigen::VectorXd& values) {
    set_flat_params(probe, values);
    return tail(upsampler_forward(cloud, rate, probe), nullptr);
  };
  double worst_net = 0.0;
  Index worst_param = 0;
  for (Index p = 0; p < flat.size(); ++p) {
    const auto central = [&](double step) {
      Eigen::VectorXd lo = flat, hi = flat;
      lo[p] -= step;
      hi[p] += step;
      return (loss_with(hi) - loss_with(lo)) / (2 * step);
    };
    const double fd = settled_fd(central, h);
    const double mag = std::max(std::abs(analytic[p]), std::abs(fd));
    const double rel = std::abs(analytic[p] - fd) / (mag + 1e-4);
    if (rel > worst_net) {
      worst_net = rel;
      worst_param = p;
    }
  }
  std::cout << "network gradient: worst relative error " << worst_net
            << " (threshold 0.0001), worst at parameter " << worst_param << " of " << flat.size()
            << '\n';
  if (!(worst_net < 1e-4)) failed = true;

  if (failed) {
    std::cerr << "gradcheck: analytic gradients disagree with finite differences\n";
    return kNumericalFailure;
  }
  std::cout << "gradcheck passed\n";
  return kOk;
}

int run_train(const std::string& patch_dir, const std::string& out, const std::string& config_path,
              const std::string& trace_path, const FlagLayer& flags) {
  const cli::RunConfig config = resolve_config(config_path, flags);

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(patch_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".xyz")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("train: no .xyz patches in " + patch_dir);

  std::vector<Patch> patches;
  patches.reserve(files.size());
  for (std::size_t f = 0; f < files.size(); ++f) {
    const Normalized normalized = normalize_unit_sphere(read_xyz(files[f].string()));
    Patch patch;
    patch.points = normalized.points;
    patch.seed = static_cast<Index>(f);
    patch.centroid = normalized.centroid;
    patch.scale = normalized.scale;
    patches.push_back(std::move(patch));
  }

  const CameraRig rig = cli::view_ring(config);
  TrainResult result =
      train_neu(patches, config.rate, rig, cli::optimizer_config(config, config.epochs),
                NeuDims{config.width, config.neighbors});
  save_params(result.params, out);
  if (!trace_path.empty()) write_trace_csv(result.trace, trace_path);

  std::cout << "trained on " << patches.size() << " patches, wrote weights to " << out << '\n';
  if (!result.trace.reports.empty())
    std::cout << "joint loss " << result.trace.reports.front().joint << " -> "
              << result.trace.reports.back().joint << " over " << result.trace.reports.size()
              << " batch steps\n";
  return kOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Self-supervised point cloud upsampling"};
  app.require_subcommand(1);

  std::string input, out, config_path, trace_path, params_path;
  std::string pred_path, ref_path, mesh_path, patch_dir;
  std::uint64_t gradcheck_seed = 0;

  CLI::App* upsample = app.add_subcommand("upsample", "Upsample a sparse cloud to rate x points");
  FlagLayer upsample_flags;
  upsample->add_option("--input", input, "Sparse cloud (.xyz)")->required();
  upsample->add_option("--out", out, "Dense output cloud (.xyz)")->required();
  upsample_flags.add(upsample, "--rate", "rate", "Upsampling rate (default 4)");
  upsample_flags.add(upsample, "--mode", "mode", "direct or neu (default direct)");
  upsample_flags.add(upsample, "--iters", "iters",
                     "Optimization iterations, or epochs in neu mode (default 100)");
  upsample_flags.add(upsample, "--views", "views", "Cameras on the ring (default 8)");
  upsample_flags.add(upsample, "--img-size", "img_size", "Rendered image side (default 64)");
  upsample_flags.add(upsample, "--gamma", "gamma", "Rasterizer sharpness (default 1e-4)");
  upsample_flags.add(upsample, "--weights", "weights",
                     "Loss weights sc,ic,hd,un (default 100,30,10,25)");
  upsample_flags.add(upsample, "--seed", "seed", "Random seed (default 0)");
  upsample->add_option("--config", config_path, "key=value config file");
  upsample->add_option("--trace", trace_path, "Write the per-step loss trace (.csv)");
  upsample->add_option("--params", params_path, "Reuse trained weights (.neup) in neu mode");

  CLI::App* render = app.add_subcommand("render", "Render silhouettes from a view ring");
  FlagLayer render_flags;
  render->add_option("--input", input, "Cloud to render (.xyz)")->required();
  render->add_option("--out", out, "Output directory for view_NN.pgm")->required();
  render_flags.add(render, "--views", "views", "Cameras on the ring (default 8)");
  render_flags.add(render, "--size", "img_size", "Image side in pixels (default 64)");
  render_flags.add(render, "--gamma", "gamma", "Rasterizer sharpness (default 1e-4)");
  render->add_option("--config", config_path, "key=value config file");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Compare a prediction to a reference");
  eval_cmd->add_option("--pred", pred_path, "Predicted cloud (.xyz)")->required();
  eval_cmd->add_option("--ref", ref_path, "Reference cloud (.xyz)")->required();
  eval_cmd->add_option("--ref-mesh", mesh_path, "Reference surface (.off) for p2f");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Audit gradients vs finite differences");
  gradcheck->add_option("--seed", gradcheck_seed, "Random seed (default 0)");

  CLI::App* train = app.add_subcommand("train", "Fit upsampler weights on a patch directory");
  FlagLayer train_flags;
  train->add_option("--patch-dir", patch_dir, "Directory of .xyz patches")->required();
  train->add_option("--out", out, "Output weights file (.neup)")->required();
  train_flags.add(train, "--rate", "rate", "Upsampling rate (default 4)");
  train_flags.add(train, "--epochs", "epochs", "Training epochs (default 30)");
  train_flags.add(train, "--batch", "batch", "Patches per optimizer step (default 28)");
  train_flags.add(train, "--seed", "seed", "Random seed (default 0)");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--trace", trace_path, "Write the per-batch loss trace (.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage message
    return code == 0 ? kOk : kUsage;
  }

  if (upsample->parsed())
    return run_upsample(input, out, config_path, trace_path, params_path, upsample_flags);
  if (render->parsed()) return run_render(input, out, config_path, render_flags);
  if (eval_cmd->parsed()) return run_evaluate(pred_path, ref_path, mesh_path);
  if (gradcheck->parsed()) return run_gradcheck(gradcheck_seed);
  return run_train(patch_dir, out, config_path, trace_path, train_flags);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const DivergedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const DegenerateGeometry& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}
