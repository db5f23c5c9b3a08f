#pragma once

#include <vector>

#include "pcup/camera.hpp"
#include "pcup/surfel.hpp"
#include "pcup/types.hpp"

namespace pcup {

/// Grayscale soft silhouette; pixels(row, col) in [0,1], row 0 is the top of
/// the image.
struct SilhouetteImage {
  Eigen::ArrayXXd pixels;
  int view_index = 0;

  int width() const { return static_cast<int>(pixels.cols()); }
  int height() const { return static_cast<int>(pixels.rows()); }
};

/// Soft rasterization: every triangle contributes a logistic coverage
/// D = sigmoid(sign * d^2 / gamma) at each pixel, where d is the screen-space
/// distance to the triangle boundary and sign is +1 inside / -1 outside.
/// Pixels aggregate contributions as I = 1 - prod_j (1 - D_j), accumulated in
/// triangle index order.
SilhouetteImage rasterize_silhouette(const SurfelSoup& soup, const Camera& camera, int width,
                                     int height, double gamma);

/// Gradient of sum_pixels upstream * I with respect to every source point.
/// Triangle frames and scale are treated as constants, so each vertex moves
/// one-to-one with its source point. Returns a source_count x 3 matrix.
Points rasterize_gradient(const SurfelSoup& soup, const Camera& camera, double gamma,
                          const SilhouetteImage& upstream);

struct RenderParams {
  double gamma = 1e-4;
  double scale = 0.0;  // 0 selects auto_surfel_scale per cloud
  FrameMode mode = FrameMode::Tangent;
};

/// Builds camera-facing triangles and rasterizes them for every camera in the
/// rig. The auto scale is resolved once per cloud, not per view.
std::vector<SilhouetteImage> render_views(const Points& cloud, const CameraRig& rig,
                                          const RenderParams& params = {});

}  // namespace pcup
