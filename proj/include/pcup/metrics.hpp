#pragma once

#include <string>
#include <utility>

#include "pcup/mesh.hpp"
#include "pcup/types.hpp"

namespace pcup {

/// Evaluation summary; every field carries the conventional ×10³ scaling.
/// The point-to-surface fields are only meaningful when has_p2f is set.
struct MetricReport {
  double cd = 0.0;
  double hd = 0.0;
  double p2f_mean = 0.0;
  double p2f_std = 0.0;
  bool has_p2f = false;

  std::string to_kv() const;  // aligned key=value lines
  static const char* csv_header();
  std::string to_csv() const;  // one row matching csv_header()
};

/// Symmetric squared-distance measure: the mean over a of the squared nearest
/// distance into b, plus the same with the roles swapped.
double chamfer(const Points& a, const Points& b);

/// Symmetric worst-case distance: max of the two directed max-min distances,
/// un-squared.
double hausdorff_metric(const Points& a, const Points& b);

/// Mean and population standard deviation of each point's Euclidean distance
/// to the nearest mesh triangle.
std::pair<double, double> p2f(const Points& pred, const ReferenceMesh& mesh);

/// Bundles the metrics against a reference cloud, ×10³; the point-to-surface
/// pair is filled only when a mesh is supplied.
MetricReport evaluate(const Points& pred, const Points& reference,
                      const ReferenceMesh* mesh = nullptr);

}  // namespace pcup
