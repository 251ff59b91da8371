#ifndef QIDFAIR_KMEANS_HPP
#define QIDFAIR_KMEANS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/error.hpp"

namespace qidfair {

using Rng = std::mt19937_64;

/// Z-score statistics of the non-protected columns. Protected columns pass
/// through unscaled.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  static Standardizer fit(const Dataset& data, const AttributeSchema& schema) {
    if (data.empty()) throw ConfigError("cannot standardize an empty dataset");
    const auto n = static_cast<Eigen::Index>(schema.size());
    Standardizer s{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
    const Eigen::MatrixXd x = data.feature_matrix();
    for (auto c : schema.non_protected_indices()) {
      const auto row = x.row(static_cast<Eigen::Index>(c));
      const double mu = row.mean();
      const double var = (row.array() - mu).square().mean();
      s.mean[static_cast<Eigen::Index>(c)] = mu;
      s.stddev[static_cast<Eigen::Index>(c)] = var > 0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.colwise() - mean).array().colwise() / stddev.array();
  }
};

struct KMeansPartition {
  std::vector<std::vector<std::size_t>> groups;  // row indices
  std::vector<Eigen::VectorXd> centroids;        // in standardized non-protected space
};

/// Lloyd's iterations on standardized non-protected features, k-means++
/// initialisation. A cluster that empties is re-seeded from the point
/// farthest from its current centroid.
inline KMeansPartition kmeans_partition(const Dataset& data, const AttributeSchema& schema, std::size_t p,
                                        std::uint64_t seed, int max_iterations = 100) {
  if (p == 0) throw ConfigError("k-means needs at least one partition");
  if (p > data.size())
    throw ConfigError("k-means: " + std::to_string(p) + " partitions requested for " + std::to_string(data.size()) +
                      " rows");
  const auto& np = schema.non_protected_indices();
  const Eigen::MatrixXd full = Standardizer::fit(data, schema).apply(data.feature_matrix());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(np.size()), full.cols());
  for (std::size_t i = 0; i < np.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = full.row(static_cast<Eigen::Index>(np[i]));

  const auto n = static_cast<std::size_t>(x.cols());
  Rng rng(seed);
  std::vector<Eigen::VectorXd> centroids;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  centroids.push_back(x.col(static_cast<Eigen::Index>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng))));
  while (centroids.size() < p) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.col(static_cast<Eigen::Index>(i)) - centroids.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= d2[pick];
        if (r < 0) break;
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    centroids.push_back(x.col(static_cast<Eigen::Index>(pick)));
  }

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < p; ++c) {
        const double d = (x.col(static_cast<Eigen::Index>(i)) - centroids[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
    }
    std::vector<Eigen::VectorXd> sums(p, Eigen::VectorXd::Zero(x.rows()));
    std::vector<std::size_t> counts(p, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] += x.col(static_cast<Eigen::Index>(i));
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < p; ++c) {
      if (counts[c] > 0) {
        centroids[c] = sums[c] / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (x.col(static_cast<Eigen::Index>(i)) - centroids[assign[i]]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids[c] = x.col(static_cast<Eigen::Index>(far));
      assign[far] = c;
      changed = true;
    }
    if (!changed) break;
  }

  KMeansPartition part;
  part.groups.resize(p);
  for (std::size_t i = 0; i < n; ++i) part.groups[assign[i]].push_back(i);
  part.centroids = std::move(centroids);
  return part;
}

/// Uniformly picks a non-empty group, then a row within it. Returns the row
/// index.
inline std::size_t pick_seed(const KMeansPartition& part, Rng& rng) {
  std::vector<std::size_t> non_empty;
  for (std::size_t g = 0; g < part.groups.size(); ++g)
    if (!part.groups[g].empty()) non_empty.push_back(g);
  if (non_empty.empty()) throw ConfigError("pick_seed: partition is empty");
  const auto& group = part.groups[non_empty[std::uniform_int_distribution<std::size_t>(0, non_empty.size() - 1)(rng)]];
  return group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng)];
}

}  // namespace qidfair

#endif  // QIDFAIR_KMEANS_HPP
