#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "pcup/cloud.hpp"

using namespace pcup;

namespace {

Points make_cloud(std::initializer_list<Vec3> pts) {
  Points c(static_cast<Index>(pts.size()), 3);
  Index i = 0;
  for (const Vec3& p : pts) c.row(i++) = p.transpose();
  return c;
}

Points random_cloud(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points c(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = u(rng);
  return c;
}

// Independent nearest-neighbor oracle: full stable sort on (distance, index).
std::vector<Index> knn_oracle(const Points& cloud, Index center, Index r, bool include_self) {
  std::vector<std::pair<double, Index>> all;
  for (Index j = 0; j < cloud.rows(); ++j) {
    if (!include_self && j == center) continue;
    all.emplace_back((cloud.row(j) - cloud.row(center)).squaredNorm(), j);
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index j = 0; j < r; ++j) out.push_back(all[j].second);
  return out;
}

}  // namespace

TEST_CASE("knn finds the unique nearest point") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}});
  const Neighborhood nb = knn(c, 0, 1);
  CHECK(nb.center == 0);
  REQUIRE(nb.neighbors.size() == 1);
  CHECK(nb.neighbors[0] == 1);
}

TEST_CASE("knn breaks distance ties by the lower index") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}});
  const Neighborhood nb = knn(c, 0, 1);
  REQUIRE(nb.neighbors.size() == 1);
  CHECK(nb.neighbors[0] == 1);
}

TEST_CASE("knn with r = N-1 returns every other index sorted by distance") {
  const Points c = make_cloud({{5, 0, 0}, {1, 0, 0}, {0, 0, 0}, {0, 2, 0}, {0, 0, 7}});
  const Neighborhood nb = knn(c, 2, 4);
  CHECK(nb.neighbors == std::vector<Index>{1, 3, 0, 4});
}

TEST_CASE("knn matches a full-sort oracle on random clouds") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 63);
    const Points c = random_cloud(n, rng());
    const Index center = static_cast<Index>(rng() % n);
    const bool self = (rng() & 1) != 0;
    const Index r = 1 + static_cast<Index>(rng() % (self ? n : n - 1));
    CHECK(knn(c, center, r, self).neighbors == knn_oracle(c, center, r, self));
  }
}

TEST_CASE("knn_all stacks the per-point neighbor lists") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}});
  const auto idx = knn_all(c, 2, /*include_self=*/true);
  REQUIRE(idx.rows() == 3);
  REQUIRE(idx.cols() == 2);
  CHECK(idx(0, 0) == 0);
  CHECK(idx(0, 1) == 1);
  CHECK(idx(2, 0) == 2);
  CHECK(idx(2, 1) == 1);
}

TEST_CASE("knn validates its arguments") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}});
  CHECK_THROWS_AS(knn(c, 0, 2), std::invalid_argument);           // only 1 other point
  CHECK_THROWS_AS(knn(c, 0, 3, true), std::invalid_argument);     // r > N
  CHECK_THROWS_AS(knn(c, 5, 1), std::invalid_argument);           // bad center
  Points bad = c;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(knn(bad, 0, 1), DataError);
}

TEST_CASE("farthest point sampling with k = N selects every index") {
  const Points c = random_cloud(9, 3);
  std::vector<Index> got = farthest_point_sampling(c, 9);
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("farthest point sampling picks the most distant point second") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}});
  CHECK(farthest_point_sampling(c, 2) == std::vector<Index>{0, 3});
}

TEST_CASE("farthest point sampling greedy order on a line") {
  const Points c = make_cloud({{0, 0, 0}, {2, 0, 0}, {1, 0, 0}});
  CHECK(farthest_point_sampling(c, 3) == std::vector<Index>{0, 1, 2});
}

TEST_CASE("farthest point sampling k=2 property on random clouds") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + static_cast<Index>(rng() % 40);
    const Points c = random_cloud(n, rng());
    const Index start = static_cast<Index>(rng() % n);
    const std::vector<Index> picks = farthest_point_sampling(c, 2, start);
    REQUIRE(picks.size() == 2);
    const double far_d2 = (c.row(picks[1]) - c.row(start)).squaredNorm();
    for (Index j = 0; j < n; ++j)
      CHECK(far_d2 >= (c.row(j) - c.row(start)).squaredNorm());
  }
}

TEST_CASE("farthest point sampling validates k") {
  const Points c = random_cloud(4, 1);
  CHECK_THROWS_AS(farthest_point_sampling(c, 5), std::invalid_argument);
  CHECK_THROWS_AS(farthest_point_sampling(c, 0), std::invalid_argument);
}

TEST_CASE("normalize_unit_sphere on a single point falls back to scale 1") {
  const Normalized n = normalize_unit_sphere(make_cloud({{1, 1, 1}}));
  CHECK(n.points.row(0).norm() == 0.0);
  CHECK(n.centroid == Vec3(1, 1, 1));
  CHECK(n.scale == 1.0);
}

TEST_CASE("normalize_unit_sphere centers and scales a segment") {
  const Normalized n = normalize_unit_sphere(make_cloud({{0, 0, 0}, {2, 0, 0}}));
  CHECK(n.centroid == Vec3(1, 0, 0));
  CHECK(n.scale == 1.0);
  CHECK(n.points.row(0) == Eigen::RowVector3d(-1, 0, 0));
  CHECK(n.points.row(1) == Eigen::RowVector3d(1, 0, 0));
}

TEST_CASE("normalize_unit_sphere is idempotent and reaches max norm 1") {
  const Points c = random_cloud(40, 5);
  const Normalized once = normalize_unit_sphere(c);
  CHECK(once.points.rowwise().norm().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  const Normalized twice = normalize_unit_sphere(once.points);
  CHECK((twice.points - once.points).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("extract_patches with one full-size patch returns the normalized cloud") {
  const Points c = random_cloud(16, 9);
  const std::vector<Patch> patches = extract_patches(c, 1, 16);
  REQUIRE(patches.size() == 1);
  CHECK(patches[0].seed == 0);
  const Normalized n = normalize_unit_sphere(c);
  // Patch rows are ordered by distance from the seed, so compare as sets.
  double worst = 0.0;
  for (Index i = 0; i < 16; ++i) {
    double best = 1e300;
    for (Index j = 0; j < 16; ++j)
      best = std::min(best, (patches[0].points.row(i) - n.points.row(j)).norm());
    worst = std::max(worst, best);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("extract_patches keeps the seed and its nearest neighbor") {
  const Points c = make_cloud({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}});
  const std::vector<Patch> patches = extract_patches(c, 1, 2);
  REQUIRE(patches.size() == 1);
  CHECK(patches[0].seed == 0);
  REQUIRE(patches[0].points.rows() == 2);
  // Points 0 and 1 normalized: centroid (0.5,0,0), scale 0.5.
  CHECK(patches[0].points.row(0) == Eigen::RowVector3d(-1, 0, 0));
  CHECK(patches[0].points.row(1) == Eigen::RowVector3d(1, 0, 0));
}

TEST_CASE("extract_patches produces the requested patch grid on a large cloud") {
  const Points c = random_cloud(10000, 21);
  const std::vector<Patch> patches = extract_patches(c, 195, 256);
  REQUIRE(patches.size() == 195);
  for (const Patch& p : patches) {
    CHECK(p.points.rows() == 256);
    CHECK(p.points.rowwise().norm().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("extract_patches rejects oversized patches") {
  const Points c = random_cloud(8, 2);
  CHECK_THROWS_AS(extract_patches(c, 1, 9), std::invalid_argument);
}

TEST_CASE("augment with everything disabled is the identity") {
  const Points c = random_cloud(12, 4);
  AugmentOptions opt;
  opt.rotate = false;
  opt.scale_min = opt.scale_max = 1.0;
  opt.jitter_sigma = 0.0;
  opt.jitter_clip = 0.0;
  const Points out = augment(c, 123, opt);
  CHECK((out - c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("augment is deterministic in the seed") {
  const Points c = random_cloud(20, 6);
  const Points a = augment(c, 42);
  const Points b = augment(c, 42);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const Points other = augment(c, 43);
  CHECK((a - other).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("augment without jitter scales all pairwise distances uniformly") {
  const Points c = random_cloud(15, 8);
  AugmentOptions opt;
  opt.jitter_sigma = 0.0;
  opt.jitter_clip = 0.0;
  opt.scale_min = 0.5;
  opt.scale_max = 1.5;
  const Points out = augment(c, 77, opt);
  const double scale = (out.row(1) - out.row(0)).norm() / (c.row(1) - c.row(0)).norm();
  CHECK(scale >= 0.5);
  CHECK(scale <= 1.5);
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = i + 1; j < c.rows(); ++j) {
      const double before = (c.row(j) - c.row(i)).norm();
      const double after = (out.row(j) - out.row(i)).norm();
      CHECK(after == doctest::Approx(scale * before).epsilon(1e-9));
    }
}
