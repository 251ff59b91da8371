#ifndef QIDFAIR_QID_HPP
#define QIDFAIR_QID_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/error.hpp"
#include "qidfair/network.hpp"

namespace qidfair {

/// Favorable-class probability per protected tuple, aligned with
/// ProtectedSpace order.
using ScoreSet = std::vector<double>;

struct ScoreCluster {
  std::vector<std::size_t> members;  // indices into the score set
  double min = 0.0;
  double max = 0.0;
  double centroid = 0.0;
};

/// Equivalence classes of a score set, ordered by ascending score.
class ClusterPartition {
 public:
  ClusterPartition() = default;

  /// `clusters` must partition {0..m-1}.
  ClusterPartition(std::vector<ScoreCluster> clusters, std::size_t m) : clusters_(std::move(clusters)), m_(m) {
    if (clusters_.empty()) throw ConfigError("a partition needs at least one cluster");
    std::vector<int> seen(m_, 0);
    std::size_t total = 0;
    for (const auto& c : clusters_) {
      if (c.members.empty()) throw ConfigError("partition contains an empty cluster");
      for (auto i : c.members) {
        if (i >= m_ || seen[i]++) throw ConfigError("clusters do not partition the score indices");
        ++total;
      }
    }
    if (total != m_) throw ConfigError("clusters do not cover every score index");
  }

  /// Builds a partition from cluster sizes alone (scores left at zero).
  static ClusterPartition from_sizes(std::span<const std::size_t> sizes) {
    std::vector<ScoreCluster> clusters;
    std::size_t next = 0;
    for (auto s : sizes) {
      ScoreCluster c;
      for (std::size_t i = 0; i < s; ++i) c.members.push_back(next++);
      clusters.push_back(std::move(c));
    }
    return ClusterPartition(std::move(clusters), next);
  }

  std::size_t k() const { return clusters_.size(); }
  std::size_t m() const { return m_; }
  const std::vector<ScoreCluster>& clusters() const { return clusters_; }

  /// Cluster index holding score index `i`.
  std::size_t cluster_of(std::size_t i) const {
    for (std::size_t c = 0; c < clusters_.size(); ++c)
      if (std::find(clusters_[c].members.begin(), clusters_[c].members.end(), i) != clusters_[c].members.end()) return c;
    throw ConfigError("score index " + std::to_string(i) + " not in partition");
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    for (const auto& c : clusters_) s.push_back(c.members.size());
    return s;
  }

  /// Position of the cluster with the most members (lowest index on ties).
  std::size_t largest() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < clusters_.size(); ++c)
      if (clusters_[c].members.size() > clusters_[best].members.size()) best = c;
    return best;
  }

 private:
  std::vector<ScoreCluster> clusters_;
  std::size_t m_ = 0;
};

struct QidMeasures {
  double q_inf = 0.0;
  double q_shannon = 0.0;
  std::size_t k = 1;
  double delta = 0.0;
};

/// Minimum-cardinality partition with every cluster's score diameter <= eps.
///
/// Sorted sweep: a new cluster opens whenever the next score exceeds the
/// current cluster's minimum by more than eps. Greedy is optimal for the
/// 1-D diameter constraint.
inline ClusterPartition cluster_scores(std::span<const double> scores, double eps) {
  if (scores.empty()) throw ConfigError("cannot cluster an empty score set");
  if (!(eps > 0)) throw ConfigError("clustering tolerance must be positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::vector<ScoreCluster> clusters;
  double sum = 0;
  for (auto i : order) {
    const double s = scores[i];
    if (clusters.empty() || s - clusters.back().min > eps) {
      if (!clusters.empty()) clusters.back().centroid = sum / static_cast<double>(clusters.back().members.size());
      clusters.push_back({{}, s, s, 0.0});
      sum = 0;
    }
    auto& c = clusters.back();
    c.members.push_back(i);
    c.max = s;
    sum += s;
  }
  clusters.back().centroid = sum / static_cast<double>(clusters.back().members.size());
  return ClusterPartition(std::move(clusters), scores.size());
}

/// Min-entropy leakage: log2(k).
inline double q_infinity(const ClusterPartition& part) { return std::log2(static_cast<double>(part.k())); }

/// Shannon leakage: log2(m) - sum_i |C_i|/m * log2|C_i|.
inline double q_shannon(const ClusterPartition& part) {
  const auto m = static_cast<double>(part.m());
  double remaining = 0;
  for (const auto& c : part.clusters()) {
    const auto size = static_cast<double>(c.members.size());
    remaining += size / m * std::log2(size);
  }
  return std::log2(m) - remaining;
}

/// Largest attainable min-entropy leakage: log2(min(ceil(1/eps), m)).
inline double qid_max(std::size_t m, double eps) {
  if (m == 0 || !(eps > 0)) throw ConfigError("qid_max needs m >= 1 and eps > 0");
  // 1/eps is rounded up, with slack for representation error (1/0.025 must give 40).
  const double slots = std::max(1.0, std::ceil(1.0 / eps - 1e-9));
  return std::log2(std::min(slots, static_cast<double>(m)));
}

/// Spread between the lowest and highest cluster centroids.
inline double delta(const ClusterPartition& part) {
  if (part.k() <= 1) return 0.0;
  double lo = part.clusters().front().centroid, hi = lo;
  for (const auto& c : part.clusters()) {
    lo = std::min(lo, c.centroid);
    hi = std::max(hi, c.centroid);
  }
  return hi - lo;
}

inline double delta_term(double spread) { return 1.0 - std::exp(-0.1 * spread); }

/// Search objective k + (1 - exp(-0.1 * delta)); the second term only breaks
/// ties between equal k.
inline double objective(const ClusterPartition& part) {
  return static_cast<double>(part.k()) + delta_term(delta(part));
}

inline QidMeasures measure(const ClusterPartition& part) {
  return {q_infinity(part), q_shannon(part), part.k(), delta(part)};
}

/// Scores and predicted labels of all m counterfactuals of one instance.
struct CounterfactualOutcome {
  ScoreSet scores;
  std::vector<int> labels;
};

inline Eigen::MatrixXd counterfactual_matrix(std::span<const int> x, const ProtectedSpace& space) {
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(space.size()));
  const Eigen::VectorXd base = to_features(x);
  for (std::size_t t = 0; t < space.size(); ++t) {
    auto col = batch.col(static_cast<Eigen::Index>(t));
    col = base;
    const auto& tup = space.tuple(t);
    for (std::size_t c = 0; c < space.columns().size(); ++c) col[static_cast<Eigen::Index>(space.columns()[c])] = tup[c];
  }
  return batch;
}

inline CounterfactualOutcome outcome_from_probabilities(const Eigen::MatrixXd& probs, int favorable_label) {
  CounterfactualOutcome out;
  out.scores.resize(static_cast<std::size_t>(probs.cols()));
  out.labels.resize(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    out.scores[static_cast<std::size_t>(t)] = std::clamp(probs(favorable_label, t), 0.0, 1.0);
    out.labels[static_cast<std::size_t>(t)] = static_cast<int>(argmax(probs.col(t)));
  }
  return out;
}

inline CounterfactualOutcome evaluate_counterfactuals(const Network& net, std::span<const int> x,
                                                      const ProtectedSpace& space, int favorable_label,
                                                      const std::optional<Intervention>& intervention = std::nullopt) {
  if (favorable_label < 0 || static_cast<std::size_t>(favorable_label) >= net.output_size())
    throw ShapeError("favorable label outside the network's classes");
  return outcome_from_probabilities(forward_batch(net, counterfactual_matrix(x, space), intervention), favorable_label);
}

inline ScoreSet counterfactual_scores(const Network& net, std::span<const int> x, const ProtectedSpace& space,
                                      int favorable_label = 1) {
  return evaluate_counterfactuals(net, x, space, favorable_label).scores;
}

/// A pair of protected tuples (indices into ProtectedSpace) receiving
/// different labels.
struct DiscriminationWitness {
  std::size_t first = 0;
  std::size_t second = 0;
};

/// First pair (0-th tuple's label vs the first tuple that disagrees).
inline std::optional<DiscriminationWitness> find_witness(std::span<const int> labels) {
  for (std::size_t t = 1; t < labels.size(); ++t)
    if (labels[t] != labels[0]) return DiscriminationWitness{0, t};
  return std::nullopt;
}

inline std::optional<DiscriminationWitness> is_discriminatory(const Network& net, std::span<const int> x,
                                                              const ProtectedSpace& space) {
  return find_witness(evaluate_counterfactuals(net, x, space, 0).labels);
}

}  // namespace qidfair

#endif  // QIDFAIR_QID_HPP
