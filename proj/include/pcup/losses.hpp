#pragma once

#include <string>
#include <vector>

#include "pcup/camera.hpp"
#include "pcup/raster.hpp"
#include "pcup/types.hpp"

namespace pcup {

struct LossWeights {
  double sc = 100.0;
  double ic = 30.0;
  double hd = 10.0;
  double un = 25.0;
};

struct LossReport {
  double sc = 0.0;
  double ic = 0.0;
  double hd = 0.0;
  double un = 0.0;
  double joint = 0.0;

  /// Flat key=value block, one term per line.
  std::string to_kv() const;
};

/// Mean squared-distance cost of the optimal one-to-one matching between two
/// equal-size clouds.
double emd(const Points& a, const Points& b);

/// The optimal matching behind emd(): entry i is the row of b paired with
/// row i of a.
std::vector<Index> emd_matching(const Points& a, const Points& b);

/// emd between the sparse cloud and a farthest-point downsampling of the
/// dense cloud to the same size (start index 0).
double shape_consistent_loss(const Points& sparse, const Points& dense);

/// Mean over views of the summed squared pixel differences.
double image_consistent_loss(const std::vector<SilhouetteImage>& a,
                             const std::vector<SilhouetteImage>& b);

/// One-sided distance: max over dense points of the distance to the nearest
/// sparse point. Penalizes outliers in the dense cloud only.
double hausdorff_loss(const Points& dense, const Points& sparse);

/// Discrete structure of the uniformity measure: disk memberships, per-member
/// nearest co-members, and the normalization anchor, all of which the gradient
/// holds fixed.
struct UniformDiskStats {
  std::vector<Index> seeds;                 // farthest-point seed indices
  std::vector<std::vector<Index>> members;  // per seed, points within the disk radius
  std::vector<std::vector<Index>> nearest;  // per member, nearest co-member (-1 if alone)
  Index scale_anchor = 0;                   // point fixing the unit-sphere scale
  double expected_count = 0.0;              // target points per disk
  double expected_spacing = 0.0;            // target nearest-neighbor distance
  double radius = 0.0;                      // disk radius in normalized units
};

/// seed_count == 0 selects the default max(1, |cloud|/16).
UniformDiskStats uniform_disk_stats(const Points& cloud, double p = 0.01, Index seed_count = 0);

/// Product of per-disk count imbalance and spacing clutter, averaged over
/// farthest-point-seeded disks of radius sqrt(p) on the unit-sphere-normalized
/// cloud.
double uniform_loss(const Points& cloud, double p = 0.01, Index seed_count = 0);

/// Weighted sum of the four terms; both clouds are rendered with render_views.
LossReport joint_loss(const Points& sparse, const Points& dense, const CameraRig& rig,
                      const LossWeights& weights = {}, const RenderParams& params = {});

/// joint_loss plus its gradient with respect to every dense-point coordinate.
/// Discrete choices (matching, subset selections, disk memberships, the
/// distance argmax) are held fixed at their current values. Pass the sparse
/// cloud's rendered views in `sparse_views` to skip re-rendering them.
LossReport joint_loss_with_gradient(const Points& sparse, const Points& dense,
                                    const CameraRig& rig, const LossWeights& weights,
                                    const RenderParams& params, Points& gradient,
                                    const std::vector<SilhouetteImage>* sparse_views = nullptr);

Points joint_loss_gradient(const Points& sparse, const Points& dense, const CameraRig& rig,
                           const LossWeights& weights = {}, const RenderParams& params = {});

}  // namespace pcup
