#include "pcup/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace pcup {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

DirectResult upsample_direct(const Points& sparse, Index rate, const CameraRig& rig,
                             const OptimConfig& config) {
  require(sparse.rows() >= 2, "upsample: need at least two sparse points");
  require(rate >= 1, "upsample: rate must be positive");
  require(rate <= sparse.rows(), "upsample: rate exceeds the point count");
  require_finite(sparse, "sparse cloud");

  // Each point spawns one replica per nearest neighbor (self first), moved a
  // growing fraction of the way toward that neighbor; the self replica stays
  // in place regardless of the fraction.
  const auto nn = knn_all(sparse, rate, /*include_self=*/true);
  Points dense(rate * sparse.rows(), 3);
  for (Index i = 0; i < sparse.rows(); ++i)
    for (Index j = 0; j < rate; ++j) {
      const double fraction = static_cast<double>(j + 1) / static_cast<double>(rate + 1);
      dense.row(i * rate + j) =
          sparse.row(i) + fraction * (sparse.row(nn(i, j)) - sparse.row(i));
    }
  if (config.init_jitter > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> jitter(0.0, config.init_jitter);
    for (Index i = 0; i < dense.rows(); ++i)
      for (int k = 0; k < 3; ++k) dense(i, k) += jitter(rng);
  }

  const std::vector<SilhouetteImage> sparse_views = render_views(sparse, rig, config.render);
  OptimTrace trace;
  trace.reports.reserve(config.iterations);
  trace.millis.reserve(config.iterations);
  AdamState state;
  Points gradient;
  for (Index it = 0; it < config.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const LossReport report = joint_loss_with_gradient(sparse, dense, rig, config.weights,
                                                       config.render, gradient, &sparse_views);
    if (!std::isfinite(report.joint)) {
      trace.reports.push_back(report);
      trace.millis.push_back(elapsed_ms(start));
      throw DivergedError("upsample: joint loss became non-finite at step " +
                              std::to_string(it),
                          std::move(trace));
    }
    adam_step(dense, gradient, state, config);
    trace.reports.push_back(report);
    trace.millis.push_back(elapsed_ms(start));
  }
  return {std::move(dense), std::move(trace)};
}

TrainResult train_neu(const std::vector<Patch>& patches, Index rate, const CameraRig& rig,
                      const OptimConfig& config, const NeuDims& dims) {
  require(!patches.empty(), "train: need at least one patch");
  require(rate >= 1, "train: rate must be positive");
  require(rate <= dims.neighbors, "train: rate exceeds the network's neighbor count");
  for (const Patch& patch : patches)
    require(patch.points.rows() >= std::max(rate, dims.neighbors),
            "train: patch smaller than the rate or neighbor count");

  NeuParams params = init_params(config.seed, dims);
  Eigen::VectorXd flat = flatten_params(params);
  AdamState state;
  OptimTrace trace;
  std::mt19937_64 rng(config.seed);

  std::vector<Index> order(patches.size());
  std::iota(order.begin(), order.end(), Index{0});
  const Index batch_size = std::min<Index>(config.batch_size, patches.size());
  require(batch_size >= 1, "train: batch size must be positive");

  for (Index epoch = 0; epoch < config.iterations; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      const auto start = std::chrono::steady_clock::now();
      const std::size_t batch_end = std::min(at + batch_size, order.size());
      Eigen::VectorXd batch_grad = Eigen::VectorXd::Zero(flat.size());
      LossReport batch_report;
      for (std::size_t b = at; b < batch_end; ++b) {
        const Points augmented =
            augment(patches[order[b]].points, rng(), config.augment);
        LossReport report;
        const std::vector<SilhouetteImage> views =
            render_views(augmented, rig, config.render);
        const LossTail tail = [&](const Points& out, Points* d_out) {
          if (d_out == nullptr) return joint_loss(augmented, out, rig, config.weights,
                                                  config.render).joint;
          Points grad;
          report = joint_loss_with_gradient(augmented, out, rig, config.weights,
                                            config.render, grad, &views);
          *d_out = grad;
          return report.joint;
        };
        const NeuParams param_grad = upsampler_gradient(augmented, rate, params, tail);
        batch_grad += flatten_params(param_grad);
        batch_report.sc += report.sc;
        batch_report.ic += report.ic;
        batch_report.hd += report.hd;
        batch_report.un += report.un;
        batch_report.joint += report.joint;
      }
      const double count = static_cast<double>(batch_end - at);
      batch_grad /= count;
      batch_report.sc /= count;
      batch_report.ic /= count;
      batch_report.hd /= count;
      batch_report.un /= count;
      batch_report.joint /= count;
      if (!std::isfinite(batch_report.joint)) {
        trace.reports.push_back(batch_report);
        trace.millis.push_back(elapsed_ms(start));
        throw DivergedError("train: joint loss became non-finite at epoch " +
                                std::to_string(epoch),
                            std::move(trace));
      }
      adam_step(flat, batch_grad, state, config);
      set_flat_params(params, flat);
      trace.reports.push_back(batch_report);
      trace.millis.push_back(elapsed_ms(start));
    }
  }
  return {std::move(params), std::move(trace)};
}

}  // namespace pcup
