#pragma once

#include "pcup/types.hpp"

namespace pcup {

/// Triangle mesh used as the reference surface for point-to-surface distances.
struct ReferenceMesh {
  Points vertices;
  Eigen::Matrix<Index, Eigen::Dynamic, 3> triangles;
};

/// Throws std::invalid_argument on out-of-range indices or a triangle that
/// repeats a vertex, DataError on non-finite vertices.
void validate_mesh(const ReferenceMesh& mesh);

/// Closest point of the solid triangle abc to p, by classifying p's projection
/// into the vertex, edge, and face regions of the triangle.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace pcup
