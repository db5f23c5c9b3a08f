#include "pcup/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Geometry>

namespace pcup {

namespace {

void check_cloud(const Points& cloud) {
  require(cloud.rows() >= 1, "cloud must contain at least one point");
  require_finite(cloud, "cloud");
}

}  // namespace

Neighborhood knn(const Points& cloud, Index center, Index r, bool include_self) {
  check_cloud(cloud);
  const Index n = cloud.rows();
  require(center >= 0 && center < n, "knn: center index out of range");
  require(r >= 1, "knn: r must be positive");
  require(r <= (include_self ? n : n - 1), "knn: r out of range");

  std::vector<std::pair<double, Index>> dist;
  dist.reserve(n);
  for (Index j = 0; j < n; ++j) {
    if (!include_self && j == center) continue;
    dist.emplace_back((cloud.row(j) - cloud.row(center)).squaredNorm(), j);
  }
  std::partial_sort(dist.begin(), dist.begin() + r, dist.end());

  Neighborhood out;
  out.center = center;
  out.neighbors.reserve(r);
  for (Index j = 0; j < r; ++j) out.neighbors.push_back(dist[j].second);
  return out;
}

Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> knn_all(const Points& cloud, Index r,
                                                             bool include_self) {
  const Index n = cloud.rows();
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> out(n, r);
  for (Index i = 0; i < n; ++i) {
    const Neighborhood nb = knn(cloud, i, r, include_self);
    for (Index j = 0; j < r; ++j) out(i, j) = nb.neighbors[j];
  }
  return out;
}

std::vector<Index> farthest_point_sampling(const Points& cloud, Index k, Index start) {
  check_cloud(cloud);
  const Index n = cloud.rows();
  require(k >= 1 && k <= n, "farthest_point_sampling: k out of range");
  require(start >= 0 && start < n, "farthest_point_sampling: start index out of range");

  std::vector<Index> picked;
  picked.reserve(k);
  picked.push_back(start);

  Eigen::VectorXd min_d2 = (cloud.rowwise() - cloud.row(start)).rowwise().squaredNorm();
  for (Index s = 1; s < k; ++s) {
    Index best = 0;
    double best_d2 = -1.0;
    for (Index j = 0; j < n; ++j) {
      if (min_d2[j] > best_d2) {
        best_d2 = min_d2[j];
        best = j;
      }
    }
    picked.push_back(best);
    min_d2 = min_d2.cwiseMin((cloud.rowwise() - cloud.row(best)).rowwise().squaredNorm());
  }
  return picked;
}

Normalized normalize_unit_sphere(const Points& cloud) {
  check_cloud(cloud);
  Normalized out;
  out.centroid = cloud.colwise().mean().transpose();
  out.points = cloud.rowwise() - out.centroid.transpose();
  out.scale = out.points.rowwise().norm().maxCoeff();
  if (out.scale == 0.0) out.scale = 1.0;
  out.points /= out.scale;
  return out;
}

std::vector<Patch> extract_patches(const Points& cloud, Index patch_count, Index patch_size) {
  check_cloud(cloud);
  require(patch_count >= 1, "extract_patches: patch count must be positive");
  require(patch_size >= 1 && patch_size <= cloud.rows(), "extract_patches: patch size out of range");

  const std::vector<Index> seeds = farthest_point_sampling(cloud, patch_count, 0);
  std::vector<Patch> patches;
  patches.reserve(seeds.size());
  for (Index seed : seeds) {
    const Neighborhood nb = knn(cloud, seed, patch_size, /*include_self=*/true);
    Points pts(patch_size, 3);
    for (Index j = 0; j < patch_size; ++j) pts.row(j) = cloud.row(nb.neighbors[j]);
    Normalized norm = normalize_unit_sphere(pts);
    patches.push_back({std::move(norm.points), seed, norm.centroid, norm.scale});
  }
  return patches;
}

Points augment(const Points& cloud, std::uint64_t seed, const AugmentOptions& opt) {
  check_cloud(cloud);
  require(opt.scale_min > 0 && opt.scale_max >= opt.scale_min, "augment: bad scale range");
  require(opt.jitter_sigma >= 0 && opt.jitter_clip >= 0, "augment: bad jitter settings");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Uniform rotation from a normalized Gaussian quaternion. The four draws
  // happen even when rotation is disabled so the jitter stream is stable.
  double qw = normal(rng), qx = normal(rng), qy = normal(rng), qz = normal(rng);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (opt.rotate) {
    const double qn = std::sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    if (qn > 0) {
      qw /= qn; qx /= qn; qy /= qn; qz /= qn;
      rot = Eigen::Quaterniond(qw, qx, qy, qz).toRotationMatrix();
    }
  }

  std::uniform_real_distribution<double> uscale(opt.scale_min, opt.scale_max);
  const double scale = (opt.scale_min == opt.scale_max) ? opt.scale_min : uscale(rng);

  Points out = scale * (cloud * rot.transpose());
  for (Index i = 0; i < out.rows(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double j = normal(rng) * opt.jitter_sigma;
      out(i, k) += std::clamp(j, -opt.jitter_clip, opt.jitter_clip);
    }
  }
  return out;
}

}  // namespace pcup
