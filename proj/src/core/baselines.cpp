#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "parallel.hpp"

namespace slicelens {

Eigen::MatrixXd encode(const Dataset& dataset) {
  std::size_t width = 0;
  for (const auto& s : dataset.schemas()) {
    width += s.kind == FeatureKind::categorical ? s.domain_size() : 1;
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dataset.size()),
                                            static_cast<Eigen::Index>(width));
  Eigen::Index offset = 0;
  for (FeatureIndex f = 0; f < dataset.num_features(); ++f) {
    const auto& schema = dataset.schema(f);
    const auto column = dataset.column(f);
    if (schema.kind == FeatureKind::categorical) {
      for (std::size_t r = 0; r < column.size(); ++r) {
        x(static_cast<Eigen::Index>(r), offset + column[r]) = 1.0;
      }
      offset += static_cast<Eigen::Index>(schema.domain_size());
      continue;
    }
    const auto raw = dataset.raw_numeric(f);
    std::vector<double> v(column.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < column.size(); ++r) {
      if (!raw.empty()) {
        v[r] = raw[r];
      } else if (!schema.missing || column[r] != *schema.missing) {
        v[r] = column[r];
      }
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double d : v) {
      if (std::isnan(d)) continue;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    for (std::size_t r = 0; r < v.size(); ++r) {
      const double d = v[r];
      x(static_cast<Eigen::Index>(r), offset) =
          std::isnan(d) || !(hi > lo) ? 0.0 : (d - lo) / (hi - lo);
    }
    ++offset;
  }
  return x;
}

Pca fit_pca(const Eigen::MatrixXd& x, std::size_t dims) {
  require(x.rows() >= 1, ErrorCode::invalid_argument, "PCA needs at least one row");
  require(dims <= static_cast<std::size_t>(x.cols()), ErrorCode::invalid_argument,
          "PCA dims exceed the encoded width");
  Pca pca;
  pca.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - pca.mean.transpose();
  const double denom = std::max<Eigen::Index>(x.rows() - 1, 1);
  const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto& values = solver.eigenvalues();    // ascending
  const auto& vectors = solver.eigenvectors();
  const double top = values.size() ? std::max(values.maxCoeff(), 0.0) : 0.0;
  const double floor = std::max(1e-12 * top, 1e-300);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > floor) keep.push_back(i);
  }
  if (dims > 0 && keep.size() > dims) keep.resize(dims);
  pca.components.resize(x.cols(), static_cast<Eigen::Index>(keep.size()));
  pca.variances.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    Eigen::VectorXd v = vectors.col(keep[j]);
    // sign convention: largest-magnitude entry positive
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    pca.components.col(static_cast<Eigen::Index>(j)) = v;
    pca.variances(static_cast<Eigen::Index>(j)) = values(keep[j]);
  }
  return pca;
}

Eigen::MatrixXd project(const Pca& pca, const Eigen::MatrixXd& x) {
  return (x.rowwise() - pca.mean.transpose()) * pca.components;
}

Eigen::MatrixXd encode(const Dataset& dataset, bool use_pca, std::size_t dims) {
  auto x = encode(dataset);
  if (!use_pca) return x;
  return project(fit_pca(x, dims), x);
}

namespace {

std::vector<double> assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                           std::vector<std::uint32_t>& assignment, unsigned workers) {
  std::vector<double> dist(static_cast<std::size_t>(points.rows()));
  parallel_for(dist.size(), workers, [&](std::size_t r) {
    const auto row = points.row(static_cast<Eigen::Index>(r));
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (row - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    assignment[r] = arg;
    dist[r] = best;
  });
  return dist;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t num_clusters, std::uint64_t seed,
                    std::size_t max_iterations, unsigned workers) {
  require(num_clusters >= 1, ErrorCode::invalid_argument, "num_clusters must be >= 1");
  const auto n = static_cast<std::size_t>(points.rows());
  require(n >= 1, ErrorCode::invalid_argument, "k-means needs at least one point");
  const std::size_t k = std::min(num_clusters, n);

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centroids.row(0) = points.row(static_cast<Eigen::Index>(pick(rng)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      d2[r] = std::min(d2[r], (points.row(static_cast<Eigen::Index>(r)) -
                               centroids.row(static_cast<Eigen::Index>(c - 1)))
                                  .squaredNorm());
      total += d2[r];
    }
    std::size_t chosen = pick(rng);
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t r = 0; r < n; ++r) {
        u -= d2[r];
        if (u <= 0.0 && d2[r] > 0.0) {
          chosen = r;
          break;
        }
      }
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
  }

  KMeansResult result;
  result.assignment.assign(n, 0);
  std::vector<bool> reseeded(k, false);
  std::vector<bool> alive(k, true);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const auto dist = assign(points, centroids, result.assignment, workers);
    double objective = 0.0;
    for (double d : dist) objective += d;
    result.objective.push_back(objective);
    result.iterations = it + 1;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centroids.rows(), centroids.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(centroids.rows()), 0);
    for (std::size_t r = 0; r < n; ++r) {
      sums.row(result.assignment[r]) += points.row(static_cast<Eigen::Index>(r));
      ++counts[result.assignment[r]];
    }
    bool changed = false;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (!alive[ci]) continue;
      if (counts[ci] == 0) {
        if (reseeded[ci]) {
          alive[ci] = false;
          changed = true;
          continue;
        }
        reseeded[ci] = true;
        const auto far = static_cast<Eigen::Index>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        centroids.row(c) = points.row(far);
        changed = true;
        continue;
      }
      const Eigen::RowVectorXd next = sums.row(c) / static_cast<double>(counts[ci]);
      if ((next - centroids.row(c)).squaredNorm() > 0.0) changed = true;
      centroids.row(c) = next;
    }
    if (!changed) break;
    // dead clusters are pushed to infinity so nothing is assigned to them
    for (std::size_t c = 0; c < k; ++c) {
      if (!alive[c]) {
        centroids.row(static_cast<Eigen::Index>(c)).setConstant(
            std::numeric_limits<double>::infinity());
      }
    }
  }

  // compact surviving clusters
  std::vector<std::uint32_t> remap(k, 0);
  std::vector<Eigen::Index> kept;
  for (std::size_t c = 0; c < k; ++c) {
    if (alive[c]) {
      remap[c] = static_cast<std::uint32_t>(kept.size());
      kept.push_back(static_cast<Eigen::Index>(c));
    }
  }
  result.dropped = k - kept.size();
  Eigen::MatrixXd compact(static_cast<Eigen::Index>(kept.size()), centroids.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    compact.row(static_cast<Eigen::Index>(i)) = centroids.row(kept[i]);
  }
  result.centroids = std::move(compact);
  for (auto& a : result.assignment) a = remap[a];
  return result;
}

std::vector<ClusterSlice> cluster_slices(const Dataset& dataset, const LossSummary& losses,
                                         std::size_t num_clusters, double threshold,
                                         std::uint64_t seed, const ClusterOptions& options) {
  require(num_clusters >= 1, ErrorCode::invalid_argument, "num_clusters must be >= 1");
  const auto points = encode(dataset, options.use_pca, options.pca_dims);
  const auto km = kmeans(points, num_clusters, seed, options.max_iterations, options.workers);

  std::vector<ClusterSlice> out(static_cast<std::size_t>(km.centroids.rows()));
  for (std::size_t r = 0; r < km.assignment.size(); ++r) {
    out[km.assignment[r]].members.push_back(static_cast<RowIndex>(r));
  }
  std::erase_if(out, [](const ClusterSlice& c) { return c.members.empty(); });
  for (std::size_t c = 0; c < out.size(); ++c) {
    auto& cs = out[c];
    cs.centroid = km.centroids.row(static_cast<Eigen::Index>(km.assignment[cs.members.front()]))
                      .transpose();
    cs.stats = losses.evaluate(cs.members, options.min_size);
    cs.degenerate = !std::isfinite(cs.stats.effect_size);
    cs.flagged = std::isfinite(cs.stats.effect_size) && cs.stats.effect_size >= threshold;
  }
  std::stable_sort(out.begin(), out.end(), [](const ClusterSlice& a, const ClusterSlice& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members.front() < b.members.front();
  });
  return out;
}

}  // namespace slicelens
