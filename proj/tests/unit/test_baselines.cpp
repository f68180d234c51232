#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "baselines.hpp"
#include "testkit.hpp"

using namespace slicelens;

TEST_CASE("one-hot plus scaled numeric encoding") {
  const auto ds = testkit::from_csv(
      "c,x,label,score\nr,1,0,0.1\ng,3,0,0.1\nb,5,1,0.9\nr,2,0,0.2\n", ScoreKind::probability);
  const auto x = encode(*ds);
  CHECK(x.cols() == 4);
  CHECK(x.rows() == 4);
  for (Eigen::Index r = 0; r < 4; ++r) CHECK(x.row(r).head(3).sum() == 1.0);
  CHECK(x(0, 3) == 0.0);
  CHECK(x(2, 3) == 1.0);
  CHECK(x(1, 3) == doctest::Approx(0.5));
  CHECK(encode(*ds, false, 0) == x);
}

TEST_CASE("PCA drops the constant column's zero-variance direction") {
  Eigen::MatrixXd x(5, 3);
  x << 1, 2, 7,  //
      2, 4, 7,   //
      3, 5, 7,   //
      4, 4, 7,   //
      5, 7, 7;
  // covariance of the first two columns by hand (n-1 denominator)
  const double a = 2.5, b = 2.5, c = 3.3;
  const double mid = (a + c) / 2, rad = std::sqrt((a - c) * (a - c) / 4 + b * b);
  const auto pca = fit_pca(x);
  REQUIRE(pca.variances.size() == 2);
  CHECK(pca.variances(0) == doctest::Approx(mid + rad));
  CHECK(pca.variances(1) == doctest::Approx(mid - rad));
  CHECK(std::abs(pca.components(2, 0)) < 1e-12);
  CHECK(std::abs(pca.components(2, 1)) < 1e-12);
  // eigenvector of [[a, b], [b, c]] for the top eigenvalue is (b, l - a)
  Eigen::Vector2d v(b, mid + rad - a);
  v.normalize();
  CHECK(std::abs(std::abs(pca.components.col(0).head(2).dot(v)) - 1.0) < 1e-9);
  const auto y = project(pca, x);
  CHECK(y.cols() == 2);
  CHECK(std::abs(y.col(0).mean()) < 1e-12);
}

TEST_CASE("k-means recovers two separated blobs") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.3);
  Eigen::MatrixXd pts(20, 2);
  for (int i = 0; i < 20; ++i) {
    const double cx = i < 10 ? 0.0 : 10.0;
    pts(i, 0) = cx + n(rng);
    pts(i, 1) = cx + n(rng);
  }
  const auto km = kmeans(pts, 2, 17);
  REQUIRE(km.centroids.rows() == 2);
  for (int i = 0; i < 20; ++i) {
    CHECK(km.assignment[i] == km.assignment[i < 10 ? 0 : 10]);
    // nearest-centroid check by brute force
    const double d0 = (pts.row(i) - km.centroids.row(0)).squaredNorm();
    const double d1 = (pts.row(i) - km.centroids.row(1)).squaredNorm();
    CHECK(km.assignment[i] == (d0 <= d1 ? 0u : 1u));
  }
  CHECK(km.assignment[0] != km.assignment[10]);
  for (std::size_t i = 1; i < km.objective.size(); ++i) {
    CHECK(km.objective[i] <= km.objective[i - 1] + 1e-12);
  }
  const auto again = kmeans(pts, 2, 17);
  CHECK(again.assignment == km.assignment);
}

TEST_CASE("cluster slices partition the data") {
  const auto inst = testkit::random_instance(9);
  const LossSummary losses(inst.losses);
  const auto clusters = cluster_slices(*inst.dataset, losses, 5, 0.3, 3);
  std::vector<int> seen(inst.dataset->size(), 0);
  for (const auto& c : clusters) {
    for (auto r : c.members) ++seen[r];
    CHECK(c.flagged == (std::isfinite(c.stats.effect_size) && c.stats.effect_size >= 0.3));
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  for (std::size_t i = 1; i < clusters.size(); ++i) {
    CHECK(clusters[i - 1].members.size() >= clusters[i].members.size());
  }
  const auto same = cluster_slices(*inst.dataset, losses, 5, 0.3, 3);
  REQUIRE(same.size() == clusters.size());
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i].members == clusters[i].members);

  ClusterOptions pca;
  pca.use_pca = true;
  pca.pca_dims = 2;
  CHECK_FALSE(cluster_slices(*inst.dataset, losses, 3, 0.3, 3, pca).empty());
}

TEST_CASE("a single cluster is the whole dataset and degenerate") {
  const auto inst = testkit::random_instance(10);
  const LossSummary losses(inst.losses);
  const auto clusters = cluster_slices(*inst.dataset, losses, 1, 0.3, 1);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].members.size() == inst.dataset->size());
  CHECK(clusters[0].degenerate);
  CHECK_FALSE(clusters[0].flagged);
}
