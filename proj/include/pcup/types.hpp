#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pcup {

using Index = Eigen::Index;

/// Point clouds are dense row-major lists of 3D positions; row i is point i.
template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;
using Points = PointsT<double>;

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Input data that fails validation (malformed files, non-finite coordinates).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed text input; carries a 1-based line number when known.
struct ParseError : DataError {
  explicit ParseError(const std::string& msg, long line_no = 0)
      : DataError(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
  long line = 0;
};

/// Geometry that admits no answer (e.g. a point coinciding with the camera center).
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + ": non-finite values");
}

}  // namespace pcup
