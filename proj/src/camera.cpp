#include "pcup/camera.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace pcup {

void Camera::axes(Vec3& right, Vec3& up_axis) const {
  const Vec3 backward = position - target;
  if (backward.norm() < 1e-12) throw DegenerateGeometry("camera position equals its target");
  const Vec3 z = backward.normalized();
  Vec3 x = up.cross(z);
  if (x.norm() < 1e-12) throw DegenerateGeometry("camera view direction parallel to up vector");
  x.normalize();
  right = x;
  up_axis = z.cross(x);
}

Vec2 Camera::to_screen(const Vec3& p) const {
  Vec3 right, up_axis;
  axes(right, up_axis);
  const Vec3 rel = p - position;
  return Vec2(right.dot(rel) / half_extent, up_axis.dot(rel) / half_extent);
}

CameraRig make_view_ring(int m, double radius, double elevation_deg, int width, int height,
                         double half_extent) {
  require(m >= 1, "make_view_ring: need at least one camera");
  require(radius > 0, "make_view_ring: radius must be positive");
  require(width > 0 && height > 0, "make_view_ring: image size must be positive");
  require(half_extent > 0, "make_view_ring: half extent must be positive");

  const double elev = std::clamp(elevation_deg, -89.0, 89.0) * M_PI / 180.0;
  CameraRig rig;
  rig.width = width;
  rig.height = height;
  rig.cameras.reserve(m);
  for (int j = 0; j < m; ++j) {
    const double az = 2.0 * M_PI * j / m;
    Camera cam;
    cam.position = radius * Vec3(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                                 std::sin(elev));
    cam.target = Vec3::Zero();
    cam.up = Vec3(0, 0, 1);
    cam.half_extent = half_extent;
    rig.cameras.push_back(cam);
  }
  return rig;
}

}  // namespace pcup
