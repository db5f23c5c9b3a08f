#include "pcup/surfel.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "pcup/cloud.hpp"

namespace pcup {

double auto_surfel_scale(const Points& cloud) {
  const Index n = cloud.rows();
  if (n <= 1) return 0.1;
  const Index r = std::min<Index>(4, n - 1);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Neighborhood nb = knn(cloud, i, r);
    double mean = 0.0;
    for (Index j : nb.neighbors) mean += (cloud.row(j) - cloud.row(i)).norm();
    acc += mean / static_cast<double>(r);
  }
  return acc / static_cast<double>(n);
}

SurfelSoup build_tangent_triangles(const Points& cloud, const Camera& camera, double scale,
                                   FrameMode mode) {
  require(scale >= 0, "build_tangent_triangles: scale must be positive or 0 for auto");
  const Index n = cloud.rows();
  SurfelSoup soup;
  soup.source_count = n;
  if (n == 0) {
    soup.base.resize(0, 3);
    soup.dir1.resize(0, 3);
    soup.dir2.resize(0, 3);
    soup.dir3.resize(0, 3);
    soup.scale = scale;
    return soup;
  }
  require_finite(cloud, "cloud");
  soup.scale = (scale > 0) ? scale : auto_surfel_scale(cloud);
  soup.base = cloud;
  soup.dir1.resize(n, 3);
  soup.dir2.resize(n, 3);
  soup.dir3.resize(n, 3);
  soup.source.resize(n);

  const Vec3 seed_primary(1, 0, 0);
  const Vec3 seed_fallback(0, 1, 0);
  const double root3_half = std::sqrt(3.0) / 2.0;

  for (Index i = 0; i < n; ++i) {
    soup.source[i] = i;
    const Vec3 p = cloud.row(i).transpose();
    const Vec3 x = p - camera.position;
    if (x.norm() < 1e-12)
      throw DegenerateGeometry("build_tangent_triangles: point coincides with camera center");

    // v1 from the fixed seed vector; switch to the fallback when the view ray
    // is parallel to it.
    Vec3 seed = seed_primary;
    Vec3 cross = x.cross(seed);
    if (cross.norm() < 1e-9) {
      seed = seed_fallback;
      cross = x.cross(seed);
    }
    const Vec3 v1 = cross.normalized();
    const Vec3 aux = (mode == FrameMode::Tangent) ? x.normalized().cross(v1).normalized()
                                                  : seed.cross(v1).normalized();
    soup.dir1.row(i) = v1.transpose();
    soup.dir2.row(i) = (root3_half * aux - 0.5 * v1).transpose();
    soup.dir3.row(i) = (-root3_half * aux - 0.5 * v1).transpose();
  }
  return soup;
}

SurfelSoup with_positions(const SurfelSoup& soup, const Points& cloud) {
  require(cloud.rows() == soup.source_count, "with_positions: point count mismatch");
  require_finite(cloud, "cloud");
  SurfelSoup out = soup;
  for (Index t = 0; t < out.size(); ++t) out.base.row(t) = cloud.row(out.source[t]);
  return out;
}

}  // namespace pcup
