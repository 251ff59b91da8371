#include <gtest/gtest.h>

#include <cmath>

#include "qidfair/qid.hpp"
#include "qidfair/synthetic.hpp"
#include "test_util.hpp"

using namespace qidfair;
using qidfair::oracle::Gen;

namespace {

ClusterPartition sizes(std::initializer_list<std::size_t> s) {
  const std::vector<std::size_t> v(s);
  return ClusterPartition::from_sizes(v);
}

}  // namespace

TEST(Qid, EntropyGoldenValues) {
  EXPECT_NEAR(q_shannon(sizes({16})), 0.0, 1e-12);
  EXPECT_NEAR(q_infinity(sizes({16})), 0.0, 1e-12);
  const std::vector<std::size_t> singletons(16, 1);
  EXPECT_NEAR(q_shannon(ClusterPartition::from_sizes(singletons)), 4.0, 1e-12);
  EXPECT_NEAR(q_infinity(ClusterPartition::from_sizes(singletons)), 4.0, 1e-12);
  EXPECT_NEAR(q_shannon(sizes({4, 4, 4, 4})), 2.0, 1e-12);
  EXPECT_NEAR(q_infinity(sizes({4, 4, 4, 4})), 2.0, 1e-12);
  EXPECT_NEAR(q_shannon(sizes({8, 4, 2, 1, 1})), 1.875, 1e-12);
  EXPECT_NEAR(q_infinity(sizes({8, 4, 2, 1, 1})), std::log2(5.0), 1e-12);
}

TEST(Qid, UpperBound) {
  EXPECT_NEAR(qid_max(90, 0.025), std::log2(40.0), 1e-12);
  EXPECT_NEAR(qid_max(12, 0.025), std::log2(12.0), 1e-12);
  EXPECT_NEAR(std::round(qid_max(90, 0.025) * 10) / 10, 5.3, 1e-12);
  EXPECT_NEAR(std::round(qid_max(12, 0.025) * 10) / 10, 3.6, 1e-12);
  EXPECT_NEAR(qid_max(16, 0.3), std::log2(4.0), 1e-12);
  EXPECT_NEAR(qid_max(1, 0.025), 0.0, 1e-12);
  EXPECT_THROW(qid_max(0, 0.1), ConfigError);
  EXPECT_THROW(qid_max(4, 0.0), ConfigError);
}

TEST(Qid, ShannonMatchesEntropyOfClusterVariable) {
  Gen g(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 90)(g);
    const auto s = oracle::random_sizes(m, g);
    EXPECT_NEAR(q_shannon(ClusterPartition::from_sizes(s)), oracle::entropy_oracle(s), 1e-9);
  }
}

TEST(Qid, LeakageOrderingOnRandomPartitions) {
  Gen g(2);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 90)(g);
    const auto part = ClusterPartition::from_sizes(oracle::random_sizes(m, g));
    const double q1 = q_shannon(part), qi = q_infinity(part);
    EXPECT_GE(q1, -1e-12);
    EXPECT_LE(q1, qi + 1e-12);
    EXPECT_LE(qi, std::log2(static_cast<double>(m)) + 1e-12);
  }
}

TEST(Clustering, HandExample) {
  const std::vector<double> s{0.9, 0.1, 0.52, 0.11, 0.5};
  const auto part = cluster_scores(s, 0.025);
  ASSERT_EQ(part.k(), 3u);
  EXPECT_EQ(part.clusters()[0].members, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(part.clusters()[1].members, (std::vector<std::size_t>{4, 2}));
  EXPECT_EQ(part.clusters()[2].members, (std::vector<std::size_t>{0}));
  EXPECT_NEAR(part.clusters()[0].centroid, 0.105, 1e-15);
  EXPECT_NEAR(delta(part), 0.9 - 0.105, 1e-15);
  EXPECT_EQ(part.cluster_of(2), 1u);
}

TEST(Clustering, ChainIsSplitByDiameterNotGap) {
  // Consecutive gaps are all below eps, but the whole chain is wider.
  const std::vector<double> s{0.0, 0.02, 0.04, 0.06};
  const auto part = cluster_scores(s, 0.025);
  EXPECT_EQ(part.k(), 2u);
  EXPECT_EQ(oracle::exhaustive_min_clusters(s, 0.025), 2u);
}

TEST(Clustering, DiameterAndMinimalityAgainstExhaustiveOracle) {
  Gen g(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 8)(g);
    // Mix spread-out and tightly packed score sets.
    const double width = t % 2 ? 1.0 : 0.1;
    std::vector<double> s(m);
    for (double& v : s) v = u(g) * width;
    const double eps = 0.025;
    const auto part = cluster_scores(s, eps);
    std::size_t covered = 0;
    for (const auto& c : part.clusters()) {
      double lo = 2, hi = -1;
      for (auto i : c.members) {
        lo = std::min(lo, s[i]);
        hi = std::max(hi, s[i]);
      }
      EXPECT_LE(hi - lo, eps);
      covered += c.members.size();
    }
    EXPECT_EQ(covered, m);
    EXPECT_EQ(part.k(), oracle::exhaustive_min_clusters(s, eps));
  }
}

TEST(Clustering, ConservationAndBounds) {
  Gen g(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(16);
    for (double& v : s) v = u(g);
    const auto part = cluster_scores(s, 0.025);
    std::size_t total = 0;
    for (auto n : part.sizes()) total += n;
    EXPECT_EQ(total, 16u);
    EXPECT_LE(part.k(), 16u);
    EXPECT_LE(q_infinity(part), qid_max(16, 0.025) + 1e-12);
  }
}

TEST(Clustering, IdenticalScoresAreOneCluster) {
  const std::vector<double> s(16, 0.3);
  EXPECT_EQ(cluster_scores(s, 0.025).k(), 1u);
  EXPECT_DOUBLE_EQ(delta(cluster_scores(s, 0.025)), 0.0);
  EXPECT_THROW(cluster_scores(std::vector<double>{}, 0.1), ConfigError);
  EXPECT_THROW(cluster_scores(s, 0.0), ConfigError);
}

TEST(Objective, ClusterCountDominatesSpread) {
  Gen g(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(8), b(8);
    for (double& v : a) v = u(g);
    for (double& v : b) v = u(g) * 0.2;
    const auto pa = cluster_scores(a, 0.025), pb = cluster_scores(b, 0.025);
    if (pa.k() > pb.k()) {
      EXPECT_GT(objective(pa), objective(pb));
    }
    if (pa.k() == pb.k()) EXPECT_EQ(objective(pa) > objective(pb), delta(pa) > delta(pb));
  }
  EXPECT_DOUBLE_EQ(delta_term(0.0), 0.0);
  EXPECT_LT(delta_term(1.0), 1.0);
}

TEST(Partition, RejectsInvalidMembership) {
  EXPECT_THROW(ClusterPartition({{{0, 1}, 0, 0, 0}, {{1}, 0, 0, 0}}, 2), ConfigError);
  EXPECT_THROW(ClusterPartition({{{0}, 0, 0, 0}}, 2), ConfigError);
  EXPECT_THROW(ClusterPartition({}, 0), ConfigError);
}

TEST(Counterfactuals, FixtureScoresFollowProtectedGate) {
  const auto f = two_path_fixture();
  const auto space = enumerate_protected(f.schema);
  // x0 = 4 sits near the decision boundary, where the gate's contribution
  // for z = 2, 3 separates the scores.
  const auto near = evaluate_counterfactuals(f.net, Instance{4, 0, 0}, space, 1);
  EXPECT_EQ(cluster_scores(near.scores, 0.025).k(), 3u);
  EXPECT_DOUBLE_EQ(near.scores[0], near.scores[1]);
  // Far from the boundary every score saturates.
  const auto far = evaluate_counterfactuals(f.net, Instance{9, 0, 0}, space, 1);
  EXPECT_EQ(cluster_scores(far.scores, 0.025).k(), 1u);
  EXPECT_FALSE(is_discriminatory(f.net, Instance{9, 0, 0}, space));
}

TEST(Counterfactuals, WitnessNamesDisagreeingTuples) {
  const std::vector<int> labels{1, 1, 0, 1};
  const auto w = find_witness(labels);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->first, 0u);
  EXPECT_EQ(w->second, 2u);
  EXPECT_FALSE(find_witness(std::vector<int>{0, 0, 0}));
}
