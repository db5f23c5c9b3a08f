#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>

#include "pcup/types.hpp"

namespace pcup {

/// Per-row feature map: row i carries the feature vector of point (or expanded
/// point) i. Width is the feature dimension c.
using FeatureMap = Eigen::MatrixXd;

/// One dense layer y = x·W + b with W stored input-major (in×out).
struct Linear {
  Eigen::MatrixXd weight;
  Eigen::RowVectorXd bias;

  Index fan_in() const { return weight.rows(); }
  Index fan_out() const { return weight.cols(); }
};

/// Weights of one neighbor-expansion stage: the gate MLP that scores each
/// (center, neighbor) pair, the attention maps, and the fusion layer that
/// brings grid-extended features back to width c.
struct NeuStage {
  Linear interp_hidden;  // 2c -> c
  Linear interp_gates;   // c -> 2 (gate logits: column 0 center, column 1 neighbor)
  Linear query;          // (c+2) -> (c+2)
  Linear key;            // (c+2) -> (c+2)
  Linear value;          // (c+2) -> (c+2)
  Linear fuse;           // (c+2) -> c
};

/// Static shape of an upsampler network. `neighbors` is the kNN count used by
/// both expansion stages (self included); the upsampling rate is a separate
/// call-time argument and may be anything in [1, neighbors].
struct NeuDims {
  Index width = 32;
  Index neighbors = 4;
};

/// Full parameter set of the two-stage upsampler. Layer shapes must compose
/// end to end; `validate_params` checks that.
struct NeuParams {
  NeuDims dims;
  std::uint64_t seed = 0;  // seed used at initialization; not serialized
  Linear lift_hidden;      // 3 -> c
  Linear lift_out;         // c -> c
  NeuStage stage1;
  Linear compress;         // neighbors·c -> c
  NeuStage stage2;
  Linear head_hidden;      // c -> c
  Linear head_out;         // c -> 3
};

/// Throws std::invalid_argument on inconsistent shapes, DataError on
/// non-finite weights.
void validate_params(const NeuParams& params);

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
/// deterministic per seed.
NeuParams init_params(std::uint64_t seed, const NeuDims& dims = {});

/// Per-point feature lifter: a two-layer map from raw coordinates to width c.
FeatureMap lift_features(const Points& cloud, const NeuParams& params);

/// Sigmoid-gated neighbor interpolation. For each point i and each of its r
/// nearest neighbors j (self included, ascending by distance), a gate MLP
/// scores the concatenated pair [x_j, x_i] and the output row is
/// sigmoid(gate_center)·x_i + sigmoid(gate_neighbor)·x_j. Rows are ordered
/// point-major, neighbor-rank-minor, so the result is (r·N)×c.
FeatureMap neu_interpolate(const FeatureMap& x, const Points& cloud, Index r,
                           const NeuStage& stage);

/// Appends a distinct 2D code to each of the r replicas of a point: the
/// row-major √r×√r grid over [−0.2, 0.2]² when r is a perfect square,
/// otherwise r evenly spaced points on [−0.2, 0.2]×{0}. r=1 gets the center
/// (0, 0). Row count is unchanged; width grows by 2.
FeatureMap grid_code_append(const FeatureMap& y, Index r);

/// Scaled-dot-product self-attention with a residual connection:
/// out = y + softmax(Q(y)·K(y)ᵀ/√c')·V(y), softmax taken per row.
FeatureMap self_attention(const FeatureMap& y, const NeuStage& stage);

/// Full two-stage upsampler: lift, expand/attend, reshape to N×(neighbors·c),
/// compress, subtract the lifted features, expand/attend again, and regress
/// 3D coordinates for the first `rate` replicas of each point. Output has
/// rate·N rows ordered point-major, replica-minor.
Points upsampler_forward(const Points& cloud, Index rate, const NeuParams& params);

/// Scalar objective over the upsampled cloud. When the second argument is
/// non-null the callee must fill it with d(loss)/d(output), same shape as the
/// output cloud.
using LossTail = std::function<double(const Points& dense, Points* d_dense)>;

/// Reverse-mode gradient of tail∘upsampler_forward with respect to every
/// parameter entry, returned in a NeuParams-shaped container. Neighbor index
/// selection is held fixed. Optionally reports the loss value.
NeuParams upsampler_gradient(const Points& cloud, Index rate, const NeuParams& params,
                             const LossTail& tail, double* loss_out = nullptr);

/// Total number of scalar parameters.
Index param_count(const NeuParams& params);

/// Round-trip between a parameter set and a flat vector (canonical layer
/// order, each layer weight-then-bias, row-major). The shapes of `params`
/// define the layout.
Eigen::VectorXd flatten_params(const NeuParams& params);
void set_flat_params(NeuParams& params, const Eigen::VectorXd& flat);

/// Binary container: magic "NEUP", version, matrix count, then each matrix as
/// (rows u32, cols u32, row-major little-endian doubles). Biases are stored
/// as 1×n matrices. The initialization seed is transient and not stored.
void save_params(const NeuParams& params, std::ostream& out);
void save_params(const NeuParams& params, const std::string& path);
NeuParams load_params(std::istream& in);
NeuParams load_params(const std::string& path);

}  // namespace pcup
