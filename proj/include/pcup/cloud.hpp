#pragma once

#include <cstdint>
#include <vector>

#include "pcup/types.hpp"

namespace pcup {

/// Indices of the r nearest points around a center, ascending by distance
/// (ties broken by the lower index).
struct Neighborhood {
  Index center = 0;
  std::vector<Index> neighbors;
};

Neighborhood knn(const Points& cloud, Index center, Index r, bool include_self = false);

/// kNN for every point at once; row i lists the r nearest neighbors of point i.
Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> knn_all(const Points& cloud, Index r,
                                                             bool include_self = false);

/// Greedy max-min subset selection. The first pick is `start`; every later pick
/// maximizes the distance to the already selected set, ties by the lower index.
std::vector<Index> farthest_point_sampling(const Points& cloud, Index k, Index start = 0);

struct Normalized {
  Points points;
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;
};

/// Centers the cloud on its centroid and divides by the max distance from it,
/// so the result fits the unit sphere with max norm 1. Zero-extent clouds keep
/// scale 1.
Normalized normalize_unit_sphere(const Points& cloud);

struct Patch {
  Points points;          // patch_size points, normalized to the unit sphere
  Index seed = 0;         // index into the source cloud
  Vec3 centroid = Vec3::Zero();
  double scale = 1.0;
};

/// FPS-seeded patches of the `patch_size` nearest points around each seed
/// (seed included), each normalized to the unit sphere.
std::vector<Patch> extract_patches(const Points& cloud, Index patch_count, Index patch_size);

struct AugmentOptions {
  bool rotate = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.03;
};

/// Random rotation + isotropic scale + clipped Gaussian jitter, deterministic
/// for a given seed. Disabling every part returns the input unchanged.
Points augment(const Points& cloud, std::uint64_t seed, const AugmentOptions& opt = {});

}  // namespace pcup
