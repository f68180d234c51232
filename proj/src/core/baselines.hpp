#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dataset.hpp"
#include "stats.hpp"

namespace slicelens {

/// One-hot categorical columns followed by min-max scaled numeric columns
/// (raw values when available, bin positions otherwise; missing -> 0).
Eigen::MatrixXd encode(const Dataset& dataset);

struct Pca {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // columns, by decreasing variance
  Eigen::VectorXd variances;
};

/// Principal components of the rows of x. Zero-variance directions are
/// dropped; dims == 0 keeps every remaining component.
Pca fit_pca(const Eigen::MatrixXd& x, std::size_t dims = 0);
Eigen::MatrixXd project(const Pca& pca, const Eigen::MatrixXd& x);

/// encode() followed by an optional projection.
Eigen::MatrixXd encode(const Dataset& dataset, bool use_pca, std::size_t dims);

struct KMeansResult {
  Eigen::MatrixXd centroids;  // one row per surviving cluster
  std::vector<std::uint32_t> assignment;
  std::vector<double> objective;  // after each assignment step
  std::size_t iterations = 0;
  std::size_t dropped = 0;
};

/// Lloyd's algorithm with seeded k-means++ initialization. An empty cluster
/// is re-seeded at the point farthest from its centroid once; if it empties
/// again it is dropped.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t num_clusters, std::uint64_t seed,
                    std::size_t max_iterations = 100, unsigned workers = 1);

struct ClusterSlice {
  Eigen::VectorXd centroid;
  std::vector<RowIndex> members;
  SliceStats stats;
  bool flagged = false;     // phi >= T
  bool degenerate = false;  // phi undefined or infinite
};

struct ClusterOptions {
  bool use_pca = false;
  std::size_t pca_dims = 0;
  std::size_t min_size = 2;
  std::size_t max_iterations = 100;
  unsigned workers = 1;
};

/// Clustering baseline. Clusters are not predicate-describable; they are
/// returned largest first.
std::vector<ClusterSlice> cluster_slices(const Dataset& dataset, const LossSummary& losses,
                                         std::size_t num_clusters, double threshold,
                                         std::uint64_t seed, const ClusterOptions& options = {});

}  // namespace slicelens
