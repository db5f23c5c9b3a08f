#include "pcup/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pcup/assignment.hpp"
#include "pcup/cloud.hpp"
#include "pcup/parallel.hpp"
#include "pcup/surfel.hpp"

namespace pcup {

namespace {

Eigen::MatrixXd pairwise_squared(const Points& a, const Points& b) {
  Eigen::MatrixXd cost(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i)
    cost.row(i) = (b.rowwise() - a.row(i)).rowwise().squaredNorm().transpose();
  return cost;
}

void check_pair(const Points& a, const Points& b) {
  require(a.rows() >= 1 && b.rows() >= 1, "loss inputs must be non-empty");
  require_finite(a, "cloud");
  require_finite(b, "cloud");
}

double matching_cost(const Points& a, const Points& b, const std::vector<Index>& match) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    total += (a.row(i) - b.row(match[i])).squaredNorm();
  return total / static_cast<double>(a.rows());
}

Points fps_subset(const Points& dense, Index count, std::vector<Index>* picked_out) {
  const std::vector<Index> picked = farthest_point_sampling(dense, count, 0);
  Points sub(count, 3);
  for (Index i = 0; i < count; ++i) sub.row(i) = dense.row(picked[i]);
  if (picked_out) *picked_out = picked;
  return sub;
}

/// One-sided distance plus the pair realizing it.
double hausdorff_with_argmax(const Points& dense, const Points& sparse, Index* arg_d,
                             Index* arg_s) {
  double worst = -1.0;
  Index wd = 0, ws = 0;
  for (Index i = 0; i < dense.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index bs = 0;
    for (Index j = 0; j < sparse.rows(); ++j) {
      const double d2 = (dense.row(i) - sparse.row(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        bs = j;
      }
    }
    if (best > worst) {
      worst = best;
      wd = i;
      ws = bs;
    }
  }
  if (arg_d) *arg_d = wd;
  if (arg_s) *arg_s = ws;
  return std::sqrt(worst);
}

struct UniformEval {
  double value = 0.0;
  Points normalized_grad;  // d(value)/d(normalized points); empty unless requested
};

UniformEval evaluate_uniform(const Points& normalized, const UniformDiskStats& stats,
                             bool with_grad) {
  UniformEval out;
  if (with_grad) out.normalized_grad = Points::Zero(normalized.rows(), 3);
  const double n_hat = stats.expected_count;
  const double d_hat = stats.expected_spacing;
  const double m = static_cast<double>(stats.seeds.size());

  for (size_t j = 0; j < stats.seeds.size(); ++j) {
    const auto& members = stats.members[j];
    const double imbalance =
        (static_cast<double>(members.size()) - n_hat) * (static_cast<double>(members.size()) - n_hat) /
        n_hat;
    double clutter = 0.0;
    for (size_t k = 0; k < members.size(); ++k) {
      if (stats.nearest[j][k] < 0) continue;
      const double d = (normalized.row(members[k]) - normalized.row(stats.nearest[j][k])).norm();
      clutter += (d - d_hat) * (d - d_hat) / d_hat;
    }
    out.value += imbalance * clutter / m;
    if (!with_grad) continue;
    for (size_t k = 0; k < members.size(); ++k) {
      const Index q = stats.nearest[j][k];
      if (q < 0) continue;
      const Eigen::RowVector3d diff = normalized.row(members[k]) - normalized.row(q);
      const double d = diff.norm();
      if (d == 0.0) continue;
      const double coeff = (imbalance / m) * 2.0 * (d - d_hat) / d_hat;
      out.normalized_grad.row(members[k]) += coeff * diff / d;
      out.normalized_grad.row(q) -= coeff * diff / d;
    }
  }
  return out;
}

/// Pulls a gradient over unit-sphere-normalized coordinates back to the raw
/// points, chaining through the centroid and the anchor-point scale.
Points pull_back_normalization(const Points& normalized, const Points& grad_norm, double scale,
                               Index anchor) {
  const Index n = normalized.rows();
  const Eigen::RowVector3d mean_grad = grad_norm.colwise().mean();
  double anchor_dot = 0.0;
  for (Index i = 0; i < n; ++i) anchor_dot += grad_norm.row(i).dot(normalized.row(i));

  Points grad = (grad_norm.rowwise() - mean_grad) / scale;
  const Eigen::RowVector3d anchor_dir = normalized.row(anchor);  // unit length by construction
  grad.row(anchor) -= (anchor_dot / scale) * anchor_dir;
  grad.rowwise() += (anchor_dot / (scale * static_cast<double>(n))) * anchor_dir;
  return grad;
}

}  // namespace

std::string LossReport::to_kv() const {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "sc=%.9g\nic=%.9g\nhd=%.9g\nun=%.9g\njoint=%.9g\n", sc, ic, hd,
                un, joint);
  return buf;
}

double emd(const Points& a, const Points& b) {
  check_pair(a, b);
  require(a.rows() == b.rows(), "emd: clouds must have equal point counts");
  return matching_cost(a, b, solve_assignment(pairwise_squared(a, b)));
}

std::vector<Index> emd_matching(const Points& a, const Points& b) {
  check_pair(a, b);
  require(a.rows() == b.rows(), "emd: clouds must have equal point counts");
  return solve_assignment(pairwise_squared(a, b));
}

double shape_consistent_loss(const Points& sparse, const Points& dense) {
  check_pair(sparse, dense);
  require(dense.rows() >= sparse.rows(),
          "shape_consistent_loss: dense cloud smaller than sparse cloud");
  return emd(sparse, fps_subset(dense, sparse.rows(), nullptr));
}

double image_consistent_loss(const std::vector<SilhouetteImage>& a,
                             const std::vector<SilhouetteImage>& b) {
  require(!a.empty() && a.size() == b.size(), "image_consistent_loss: view counts differ");
  double total = 0.0;
  for (size_t v = 0; v < a.size(); ++v) {
    require(a[v].width() == b[v].width() && a[v].height() == b[v].height(),
            "image_consistent_loss: image sizes differ");
    total += (a[v].pixels - b[v].pixels).square().sum();
  }
  return total / static_cast<double>(a.size());
}

double hausdorff_loss(const Points& dense, const Points& sparse) {
  check_pair(dense, sparse);
  return hausdorff_with_argmax(dense, sparse, nullptr, nullptr);
}

UniformDiskStats uniform_disk_stats(const Points& cloud, double p, Index seed_count) {
  require(cloud.rows() >= 1, "uniform_disk_stats: empty cloud");
  require_finite(cloud, "cloud");
  require(p > 0 && p < 1, "uniform_disk_stats: p must lie in (0,1)");
  if (seed_count == 0) seed_count = std::max<Index>(1, cloud.rows() / 16);
  require(seed_count >= 1 && seed_count <= cloud.rows(),
          "uniform_disk_stats: seed count out of range");

  UniformDiskStats stats;
  stats.radius = std::sqrt(p);
  stats.expected_count = static_cast<double>(cloud.rows()) * p;
  stats.expected_spacing =
      std::sqrt(2.0 * M_PI * stats.radius * stats.radius /
                (std::sqrt(3.0) * stats.expected_count));

  const Normalized norm = normalize_unit_sphere(cloud);
  double best = -1.0;
  for (Index i = 0; i < norm.points.rows(); ++i) {
    const double r = norm.points.row(i).norm();
    if (r > best) {
      best = r;
      stats.scale_anchor = i;
    }
  }

  stats.seeds = farthest_point_sampling(norm.points, seed_count, 0);
  const double r2 = stats.radius * stats.radius;
  for (Index seed : stats.seeds) {
    std::vector<Index> members;
    for (Index i = 0; i < norm.points.rows(); ++i)
      if ((norm.points.row(i) - norm.points.row(seed)).squaredNorm() <= r2) members.push_back(i);
    std::vector<Index> nearest(members.size(), -1);
    for (size_t k = 0; k < members.size(); ++k) {
      double best_d2 = std::numeric_limits<double>::infinity();
      for (size_t l = 0; l < members.size(); ++l) {
        if (l == k) continue;
        const double d2 = (norm.points.row(members[k]) - norm.points.row(members[l])).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          nearest[k] = members[l];
        }
      }
    }
    stats.members.push_back(std::move(members));
    stats.nearest.push_back(std::move(nearest));
  }
  return stats;
}

double uniform_loss(const Points& cloud, double p, Index seed_count) {
  const UniformDiskStats stats = uniform_disk_stats(cloud, p, seed_count);
  const Normalized norm = normalize_unit_sphere(cloud);
  return evaluate_uniform(norm.points, stats, /*with_grad=*/false).value;
}

LossReport joint_loss(const Points& sparse, const Points& dense, const CameraRig& rig,
                      const LossWeights& weights, const RenderParams& params) {
  check_pair(sparse, dense);
  LossReport report;
  report.sc = shape_consistent_loss(sparse, dense);
  report.ic = image_consistent_loss(render_views(sparse, rig, params),
                                    render_views(dense, rig, params));
  report.hd = hausdorff_loss(dense, sparse);
  report.un = uniform_loss(dense);
  report.joint =
      weights.sc * report.sc + weights.ic * report.ic + weights.hd * report.hd + weights.un * report.un;
  return report;
}

LossReport joint_loss_with_gradient(const Points& sparse, const Points& dense,
                                    const CameraRig& rig, const LossWeights& weights,
                                    const RenderParams& params, Points& gradient,
                                    const std::vector<SilhouetteImage>* sparse_views) {
  check_pair(sparse, dense);
  require(dense.rows() >= sparse.rows(), "joint loss: dense cloud smaller than sparse cloud");
  require(!rig.cameras.empty(), "joint loss: rig has no cameras");

  LossReport report;
  gradient = Points::Zero(dense.rows(), 3);

  // Shape term: optimal matching against the farthest-point subset, both held
  // fixed for the gradient.
  std::vector<Index> picked;
  const Points subset = fps_subset(dense, sparse.rows(), &picked);
  const std::vector<Index> match = emd_matching(sparse, subset);
  report.sc = matching_cost(sparse, subset, match);
  const double sc_coeff = weights.sc * 2.0 / static_cast<double>(sparse.rows());
  for (Index i = 0; i < sparse.rows(); ++i) {
    const Index d_row = picked[match[i]];
    gradient.row(d_row) += sc_coeff * (dense.row(d_row) - sparse.row(i));
  }

  // Image term: one rasterizer backward pass per view, reduced in view order.
  const std::vector<SilhouetteImage> s_views =
      sparse_views ? *sparse_views : render_views(sparse, rig, params);
  require(s_views.size() == rig.cameras.size(), "joint loss: cached view count mismatch");
  double scale = params.scale;
  if (scale == 0.0) scale = auto_surfel_scale(dense);
  const double view_count = static_cast<double>(rig.cameras.size());

  std::vector<double> ic_terms(rig.cameras.size(), 0.0);
  std::vector<Points> ic_grads(rig.cameras.size());
  parallel_for(static_cast<Index>(rig.cameras.size()), [&](Index v) {
    const Camera& cam = rig.cameras[v];
    const SurfelSoup soup = build_tangent_triangles(dense, cam, scale, params.mode);
    const SilhouetteImage d_view =
        rasterize_silhouette(soup, cam, rig.width, rig.height, params.gamma);
    require(s_views[v].width() == d_view.width() && s_views[v].height() == d_view.height(),
            "joint loss: cached view size mismatch");
    ic_terms[v] = (d_view.pixels - s_views[v].pixels).square().sum();
    SilhouetteImage upstream;
    upstream.pixels = (weights.ic * 2.0 / view_count) * (d_view.pixels - s_views[v].pixels);
    ic_grads[v] = rasterize_gradient(soup, cam, params.gamma, upstream);
  });
  for (size_t v = 0; v < rig.cameras.size(); ++v) {
    report.ic += ic_terms[v] / view_count;
    gradient += ic_grads[v];
  }

  // Outlier term: subgradient at the realizing pair.
  Index arg_d = 0, arg_s = 0;
  report.hd = hausdorff_with_argmax(dense, sparse, &arg_d, &arg_s);
  if (report.hd > 0.0)
    gradient.row(arg_d) +=
        weights.hd * (dense.row(arg_d) - sparse.row(arg_s)) / report.hd;

  // Uniformity term: gradient over normalized coordinates pulled back through
  // the centroid/scale normalization.
  const UniformDiskStats stats = uniform_disk_stats(dense);
  const Normalized norm = normalize_unit_sphere(dense);
  const UniformEval un = evaluate_uniform(norm.points, stats, /*with_grad=*/true);
  report.un = un.value;
  gradient +=
      weights.un *
      pull_back_normalization(norm.points, un.normalized_grad, norm.scale, stats.scale_anchor);

  report.joint =
      weights.sc * report.sc + weights.ic * report.ic + weights.hd * report.hd + weights.un * report.un;
  return report;
}

Points joint_loss_gradient(const Points& sparse, const Points& dense, const CameraRig& rig,
                           const LossWeights& weights, const RenderParams& params) {
  Points gradient;
  joint_loss_with_gradient(sparse, dense, rig, weights, params, gradient, nullptr);
  return gradient;
}

}  // namespace pcup
