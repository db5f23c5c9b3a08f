#include "pcup/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "pcup/parallel.hpp"

namespace pcup {

void validate_mesh(const ReferenceMesh& mesh) {
  require_finite(mesh.vertices, "mesh vertices");
  for (Index t = 0; t < mesh.triangles.rows(); ++t) {
    const Index i = mesh.triangles(t, 0);
    const Index j = mesh.triangles(t, 1);
    const Index k = mesh.triangles(t, 2);
    require(i >= 0 && i < mesh.vertices.rows() && j >= 0 && j < mesh.vertices.rows() &&
                k >= 0 && k < mesh.vertices.rows(),
            "mesh: triangle index out of range");
    require(i != j && j != k && i != k, "mesh: triangle repeats a vertex");
  }
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  // Projection falls inside the face.
  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

namespace {

void check_pair(const Points& a, const Points& b, const char* what) {
  require(a.rows() >= 1 && b.rows() >= 1, what);
  require_finite(a, what);
  require_finite(b, what);
}

// Squared distance from each row of `from` to its nearest row of `to`.
std::vector<double> nearest_squared(const Points& from, const Points& to) {
  std::vector<double> out(from.rows());
  parallel_for(from.rows(), [&](Index i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < to.rows(); ++j)
      best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
    out[i] = best;
  });
  return out;
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::string format_value(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.9g", v);
  return buffer;
}

}  // namespace

double chamfer(const Points& a, const Points& b) {
  check_pair(a, b, "chamfer: both clouds must be non-empty and finite");
  return mean(nearest_squared(a, b)) + mean(nearest_squared(b, a));
}

double hausdorff_metric(const Points& a, const Points& b) {
  check_pair(a, b, "hausdorff: both clouds must be non-empty and finite");
  double worst = 0.0;
  for (double d2 : nearest_squared(a, b)) worst = std::max(worst, d2);
  for (double d2 : nearest_squared(b, a)) worst = std::max(worst, d2);
  return std::sqrt(worst);
}

std::pair<double, double> p2f(const Points& pred, const ReferenceMesh& mesh) {
  require(pred.rows() >= 1, "p2f: empty prediction");
  require_finite(pred, "p2f prediction");
  require(mesh.triangles.rows() >= 1, "p2f: empty mesh");
  validate_mesh(mesh);

  std::vector<double> distance(pred.rows());
  parallel_for(pred.rows(), [&](Index i) {
    const Vec3 p = pred.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < mesh.triangles.rows(); ++t) {
      const Vec3 closest = closest_point_on_triangle(
          p, mesh.vertices.row(mesh.triangles(t, 0)).transpose(),
          mesh.vertices.row(mesh.triangles(t, 1)).transpose(),
          mesh.vertices.row(mesh.triangles(t, 2)).transpose());
      best = std::min(best, (p - closest).squaredNorm());
    }
    distance[i] = std::sqrt(best);
  });

  const double avg = mean(distance);
  double variance = 0.0;
  for (double d : distance) variance += (d - avg) * (d - avg);
  variance /= static_cast<double>(distance.size());
  return {avg, std::sqrt(variance)};
}

MetricReport evaluate(const Points& pred, const Points& reference, const ReferenceMesh* mesh) {
  MetricReport report;
  report.cd = chamfer(pred, reference) * 1e3;
  report.hd = hausdorff_metric(pred, reference) * 1e3;
  if (mesh != nullptr) {
    const auto [avg, dev] = p2f(pred, *mesh);
    report.p2f_mean = avg * 1e3;
    report.p2f_std = dev * 1e3;
    report.has_p2f = true;
  }
  return report;
}

std::string MetricReport::to_kv() const {
  std::string out;
  out += "cd       = " + format_value(cd) + "\n";
  out += "hd       = " + format_value(hd) + "\n";
  if (has_p2f) {
    out += "p2f_mean = " + format_value(p2f_mean) + "\n";
    out += "p2f_std  = " + format_value(p2f_std) + "\n";
  }
  return out;
}

const char* MetricReport::csv_header() { return "cd,hd,p2f_mean,p2f_std"; }

std::string MetricReport::to_csv() const {
  std::string out = format_value(cd) + "," + format_value(hd) + ",";
  if (has_p2f) out += format_value(p2f_mean) + "," + format_value(p2f_std);
  else out += ",";
  return out;
}

}  // namespace pcup
