#pragma once

#include <vector>

#include "pcup/camera.hpp"
#include "pcup/types.hpp"

namespace pcup {

/// How the in-plane frame of each point's triangle is derived.
///   Tangent   — auxiliary axis from the view ray, so the triangle is
///               perpendicular to the ray toward the camera center.
///   FixedSeed — auxiliary axis from the fixed seed vector only; triangles
///               are generally not camera-facing.
enum class FrameMode { Tangent, FixedSeed };

/// One equilateral triangle per source point: vertex k = base + scale * dir_k,
/// with unit direction vectors at mutual 120 degrees.
struct SurfelSoup {
  Points base;   // one row per triangle, the source point position
  Points dir1, dir2, dir3;
  std::vector<Index> source;  // source point index per triangle
  Index source_count = 0;
  double scale = 0.0;

  Index size() const { return base.rows(); }
  Vec3 vertex(Index tri, int k) const {
    const Points& d = (k == 0) ? dir1 : (k == 1) ? dir2 : dir3;
    return base.row(tri).transpose() + scale * d.row(tri).transpose();
  }
};

/// Mean distance to the (up to) 4 nearest neighbors, the default triangle size.
double auto_surfel_scale(const Points& cloud);

/// Builds the per-point triangles for a camera. `scale` > 0 is used directly;
/// scale == 0 selects auto_surfel_scale(cloud).
SurfelSoup build_tangent_triangles(const Points& cloud, const Camera& camera, double scale = 0.0,
                                   FrameMode mode = FrameMode::Tangent);

/// Same frames and scale, new base positions. Lets callers move points while
/// keeping each triangle's orientation fixed.
SurfelSoup with_positions(const SurfelSoup& soup, const Points& cloud);

}  // namespace pcup
