#pragma once

#include <vector>

#include "pcup/types.hpp"

namespace pcup {

/// Orthographic look-at camera. Screen coordinates are [-1,1]^2 with x right
/// and y up; `half_extent` is the world-space half width of that window.
struct Camera {
  Vec3 position = Vec3(2.5, 0, 0);
  Vec3 target = Vec3::Zero();
  Vec3 up = Vec3(0, 0, 1);
  double half_extent = 1.3;

  /// Right and up axes of the image plane (world space).
  void axes(Vec3& right, Vec3& up_axis) const;
  Vec2 to_screen(const Vec3& p) const;
};

struct CameraRig {
  std::vector<Camera> cameras;
  int width = 64;
  int height = 64;
};

/// m cameras on a circle of the given radius at fixed elevation, azimuths
/// 2*pi*j/m, all looking at the origin with up (0,0,1). The elevation is
/// clamped to +-89 degrees so the up vector never degenerates.
CameraRig make_view_ring(int m, double radius, double elevation_deg, int width, int height,
                         double half_extent = 1.3);

}  // namespace pcup
