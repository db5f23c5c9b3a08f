#include "pcup/raster.hpp"

#include <algorithm>
#include <cmath>

#include "pcup/parallel.hpp"

namespace pcup {

namespace {

// Logistic arguments at or below -kCutoff leave a pixel's (1 - D) factor equal
// to 1.0 in double precision, so those pairs can be skipped exactly. The
// matching screen-space margin bounds how far outside its triangle a pixel can
// still be affected.
constexpr double kCutoff = 60.0;

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct ScreenTriangle {
  Vec2 a, b, c;
  bool degenerate = false;  // zero signed area: always treated as outside
};

struct RasterGrid {
  int w = 0, h = 0;
  double x_of_col(int col) const { return -1.0 + 2.0 * (col + 0.5) / w; }
  double y_of_row(int row) const { return 1.0 - 2.0 * (row + 0.5) / h; }
  // Inverse maps, clamped to the image.
  int col_lo(double x) const {
    return std::max(0, static_cast<int>(std::ceil((x + 1.0) * w / 2.0 - 0.5)));
  }
  int col_hi(double x) const {
    return std::min(w - 1, static_cast<int>(std::floor((x + 1.0) * w / 2.0 - 0.5)));
  }
  int row_lo(double y) const {
    return std::max(0, static_cast<int>(std::ceil((1.0 - y) * h / 2.0 - 0.5)));
  }
  int row_hi(double y) const {
    return std::min(h - 1, static_cast<int>(std::floor((1.0 - y) * h / 2.0 - 0.5)));
  }
};

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

// Squared distance from q to segment [a,b]; u_out gets the clamped parameter
// of the closest point.
double segment_d2(const Vec2& q, const Vec2& a, const Vec2& b, double* u_out) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double u = 0.0;
  if (len2 > 0) u = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
  if (u_out) *u_out = u;
  return (q - (a + u * ab)).squaredNorm();
}

struct BoundaryPoint {
  double d2 = 0.0;
  int seg = 0;     // 0:ab 1:bc 2:ca
  double u = 0.0;  // parameter along that segment
  bool inside = false;
};

BoundaryPoint boundary_query(const Vec2& q, const ScreenTriangle& t) {
  BoundaryPoint out;
  double u0, u1, u2;
  const double d0 = segment_d2(q, t.a, t.b, &u0);
  const double d1 = segment_d2(q, t.b, t.c, &u1);
  const double d2 = segment_d2(q, t.c, t.a, &u2);
  out.d2 = d0;
  out.seg = 0;
  out.u = u0;
  if (d1 < out.d2) {
    out.d2 = d1;
    out.seg = 1;
    out.u = u1;
  }
  if (d2 < out.d2) {
    out.d2 = d2;
    out.seg = 2;
    out.u = u2;
  }
  if (!t.degenerate) {
    const double c0 = cross2(t.b - t.a, q - t.a);
    const double c1 = cross2(t.c - t.b, q - t.b);
    const double c2 = cross2(t.a - t.c, q - t.c);
    out.inside = (c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0);
  }
  return out;
}

std::vector<ScreenTriangle> project_soup(const SurfelSoup& soup, const Camera& camera) {
  Vec3 right, up_axis;
  camera.axes(right, up_axis);
  const double he = camera.half_extent;
  std::vector<ScreenTriangle> tris(soup.size());
  for (Index t = 0; t < soup.size(); ++t) {
    ScreenTriangle& st = tris[t];
    for (int k = 0; k < 3; ++k) {
      const Vec3 rel = soup.vertex(t, k) - camera.position;
      if (!rel.allFinite()) throw DataError("rasterize: non-finite triangle vertex");
      (k == 0 ? st.a : k == 1 ? st.b : st.c) = Vec2(right.dot(rel) / he, up_axis.dot(rel) / he);
    }
    st.degenerate = cross2(st.b - st.a, st.c - st.a) == 0.0;
  }
  return tris;
}

template <typename Fn>
void for_pixels_near(const RasterGrid& grid, const ScreenTriangle& t, double margin, Fn&& fn) {
  const double xmin = std::min({t.a.x(), t.b.x(), t.c.x()}) - margin;
  const double xmax = std::max({t.a.x(), t.b.x(), t.c.x()}) + margin;
  const double ymin = std::min({t.a.y(), t.b.y(), t.c.y()}) - margin;
  const double ymax = std::max({t.a.y(), t.b.y(), t.c.y()}) + margin;
  const int c0 = grid.col_lo(xmin), c1 = grid.col_hi(xmax);
  const int r0 = grid.row_lo(ymax), r1 = grid.row_hi(ymin);
  for (int row = r0; row <= r1; ++row) {
    const double y = grid.y_of_row(row);
    for (int col = c0; col <= c1; ++col) fn(row, col, Vec2(grid.x_of_col(col), y));
  }
}

}  // namespace

SilhouetteImage rasterize_silhouette(const SurfelSoup& soup, const Camera& camera, int width,
                                     int height, double gamma) {
  require(width > 0 && height > 0, "rasterize: image size must be positive");
  require(gamma > 0, "rasterize: gamma must be positive");

  const RasterGrid grid{width, height};
  const double margin = std::sqrt(kCutoff * gamma);
  Eigen::ArrayXXd prod = Eigen::ArrayXXd::Ones(height, width);

  const std::vector<ScreenTriangle> tris = project_soup(soup, camera);
  for (const ScreenTriangle& t : tris) {
    for_pixels_near(grid, t, margin, [&](int row, int col, const Vec2& q) {
      const BoundaryPoint bp = boundary_query(q, t);
      const double arg = (bp.inside ? bp.d2 : -bp.d2) / gamma;
      if (arg <= -kCutoff) return;
      prod(row, col) *= 1.0 - sigmoid(arg);
    });
  }

  SilhouetteImage img;
  img.pixels = 1.0 - prod;
  return img;
}

Points rasterize_gradient(const SurfelSoup& soup, const Camera& camera, double gamma,
                          const SilhouetteImage& upstream) {
  require(gamma > 0, "rasterize: gamma must be positive");
  const int width = upstream.width(), height = upstream.height();
  require(width > 0 && height > 0, "rasterize_gradient: empty upstream image");
  require_finite(upstream.pixels.matrix(), "upstream");

  Points grad = Points::Zero(soup.source_count, 3);
  if (soup.size() == 0) return grad;

  const RasterGrid grid{width, height};
  const double margin = std::sqrt(kCutoff * gamma);
  const std::vector<ScreenTriangle> tris = project_soup(soup, camera);

  // Pass 1: per-pixel product of the nonzero (1 - D) factors plus the count of
  // exactly-zero factors, so every leave-one-out product is recoverable.
  Eigen::ArrayXXd nz_prod = Eigen::ArrayXXd::Ones(height, width);
  Eigen::ArrayXXi zeros = Eigen::ArrayXXi::Zero(height, width);
  for (const ScreenTriangle& t : tris) {
    for_pixels_near(grid, t, margin, [&](int row, int col, const Vec2& q) {
      const BoundaryPoint bp = boundary_query(q, t);
      const double arg = (bp.inside ? bp.d2 : -bp.d2) / gamma;
      if (arg <= -kCutoff) return;
      const double factor = 1.0 - sigmoid(arg);
      if (factor == 0.0)
        zeros(row, col) += 1;
      else
        nz_prod(row, col) *= factor;
    });
  }

  // Pass 2: chain upstream -> D -> signed squared distance -> the closest
  // boundary segment's endpoints -> source point.
  Vec3 right, up_axis;
  camera.axes(right, up_axis);
  const Vec3 sx_dir = right / camera.half_extent;
  const Vec3 sy_dir = up_axis / camera.half_extent;

  for (Index ti = 0; ti < soup.size(); ++ti) {
    const ScreenTriangle& t = tris[ti];
    const Index src = soup.source[ti];
    Vec2 acc = Vec2::Zero();  // d(loss)/d(screen shift of this triangle)
    for_pixels_near(grid, t, margin, [&](int row, int col, const Vec2& q) {
      const double up = upstream.pixels(row, col);
      if (up == 0.0) return;
      const BoundaryPoint bp = boundary_query(q, t);
      const double sign = bp.inside ? 1.0 : -1.0;
      const double arg = sign * bp.d2 / gamma;
      if (arg <= -kCutoff) return;
      const double d = sigmoid(arg);
      const double dslope = d * (1.0 - d);
      if (dslope == 0.0) return;  // saturated: the implemented forward is flat here
      // Here 1 - D > 0, so the leave-one-out product over the other triangles
      // is zero whenever any of them contributes an exact-zero factor.
      if (zeros(row, col) > 0) return;
      const double factor = 1.0 - d;
      const double loo = nz_prod(row, col) / factor;
      if (loo == 0.0) return;

      const double g_d2 = up * loo * dslope * sign / gamma;
      // Envelope form of the point-segment distance gradient: endpoints a and
      // b of the closest segment receive -2(1-u)(q-c) and -2u(q-c).
      const Vec2 ep0 = bp.seg == 0 ? t.a : bp.seg == 1 ? t.b : t.c;
      const Vec2 ep1 = bp.seg == 0 ? t.b : bp.seg == 1 ? t.c : t.a;
      const Vec2 closest = ep0 + bp.u * (ep1 - ep0);
      const Vec2 diff = q - closest;
      // Vertices translate together with the source point, so both endpoint
      // gradients collapse onto one screen-space shift.
      acc += g_d2 * (-2.0) * diff;
    });
    grad.row(src) += (acc.x() * sx_dir + acc.y() * sy_dir).transpose();
  }
  return grad;
}

std::vector<SilhouetteImage> render_views(const Points& cloud, const CameraRig& rig,
                                          const RenderParams& params) {
  require(!rig.cameras.empty(), "render_views: rig has no cameras");
  require(params.scale >= 0, "render_views: scale must be positive or 0 for auto");
  double scale = params.scale;
  if (scale == 0.0) scale = cloud.rows() > 0 ? auto_surfel_scale(cloud) : 0.1;

  std::vector<SilhouetteImage> images(rig.cameras.size());
  parallel_for(static_cast<Index>(rig.cameras.size()), [&](Index v) {
    const SurfelSoup soup =
        build_tangent_triangles(cloud, rig.cameras[v], scale, params.mode);
    images[v] = rasterize_silhouette(soup, rig.cameras[v], rig.width, rig.height, params.gamma);
    images[v].view_index = static_cast<int>(v);
  });
  return images;
}

}  // namespace pcup
