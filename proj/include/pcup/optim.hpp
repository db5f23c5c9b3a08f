#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pcup/cloud.hpp"
#include "pcup/losses.hpp"
#include "pcup/neu.hpp"
#include "pcup/raster.hpp"
#include "pcup/types.hpp"

namespace pcup {

struct OptimConfig {
  double learning_rate = 0.001;
  Index iterations = 100;  // Adam steps in direct mode, epochs when training
  Index batch_size = 28;
  LossWeights weights;
  RenderParams render;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_jitter = 0.01;  // sigma of the dense-initialization jitter
  AugmentOptions augment;     // training-time patch augmentation
  std::uint64_t seed = 0;
};

/// First and second moment estimates plus the step counter. Shapes are fixed
/// by the first update.
struct AdamState {
  Eigen::ArrayXXd m;
  Eigen::ArrayXXd v;
  long step = 0;
};

/// One bias-corrected Adam update in place. Works on any dense matrix or
/// vector of values; the state must be fresh or match the value shape.
template <typename DerivedV, typename DerivedG>
void adam_step(Eigen::MatrixBase<DerivedV>& values, const Eigen::MatrixBase<DerivedG>& grads,
               AdamState& state, const OptimConfig& config) {
  require(config.learning_rate > 0.0, "adam: learning rate must be positive");
  require(config.beta1 > 0.0 && config.beta1 < 1.0, "adam: beta1 outside (0, 1)");
  require(config.beta2 > 0.0 && config.beta2 < 1.0, "adam: beta2 outside (0, 1)");
  require(values.rows() == grads.rows() && values.cols() == grads.cols(),
          "adam: value and gradient shapes disagree");
  if (state.step == 0 && state.m.size() == 0) {
    state.m = Eigen::ArrayXXd::Zero(values.rows(), values.cols());
    state.v = Eigen::ArrayXXd::Zero(values.rows(), values.cols());
  }
  require(state.m.rows() == values.rows() && state.m.cols() == values.cols() &&
              state.v.rows() == values.rows() && state.v.cols() == values.cols(),
          "adam: state shape disagrees with the values");

  state.step += 1;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads.derived().array();
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.derived().array().square();
  const double correct1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double correct2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  values.derived().array() -=
      config.learning_rate * (state.m / correct1) / ((state.v / correct2).sqrt() + config.epsilon);
}

/// Loss reports and wall time for every optimizer step, in order.
struct OptimTrace {
  std::vector<LossReport> reports;
  std::vector<double> millis;
};

/// The objective became non-finite; carries the trace up to the failing step.
struct DivergedError : std::runtime_error {
  OptimTrace trace;
  DivergedError(const std::string& msg, OptimTrace t)
      : std::runtime_error(msg), trace(std::move(t)) {}
};

struct DirectResult {
  Points dense;
  OptimTrace trace;
};

/// Optimizes dense coordinates directly under the joint loss. The dense cloud
/// starts as each sparse point moved toward its j-th nearest neighbor (self
/// included) by the fraction (j+1)/(rate+1), plus Gaussian jitter.
DirectResult upsample_direct(const Points& sparse, Index rate, const CameraRig& rig,
                             const OptimConfig& config = {});

struct TrainResult {
  NeuParams params;
  OptimTrace trace;
};

/// Minibatch training of the upsampler on normalized patches: per epoch the
/// patch order is reshuffled and each patch augmented, the joint loss of
/// (patch, upsampler(patch)) is averaged over the batch, and Adam updates the
/// parameters once per batch. One trace entry per batch step. Deterministic
/// for a given config seed.
TrainResult train_neu(const std::vector<Patch>& patches, Index rate, const CameraRig& rig,
                      const OptimConfig& config = {}, const NeuDims& dims = {});

}  // namespace pcup
