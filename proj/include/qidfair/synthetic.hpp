#ifndef QIDFAIR_SYNTHETIC_HPP
#define QIDFAIR_SYNTHETIC_HPP

// Generated datasets and hand-built networks used by the examples, the CLI's
// `synth` command and the tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/kmeans.hpp"
#include "qidfair/network.hpp"

namespace qidfair {

/// Census-like table: age bracket (4) x sex (2) x race (2) protected, m = 16.
inline AttributeSchema census_schema() {
  using K = AttributeKind;
  return AttributeSchema({
                             {"age", K::kOrdinal, 0, 3, true},
                             {"workclass", K::kCategorical, 0, 6, false},
                             {"education", K::kOrdinal, 0, 15, false},
                             {"marital", K::kCategorical, 0, 5, false},
                             {"occupation", K::kCategorical, 0, 11, false},
                             {"race", K::kCategorical, 0, 1, true},
                             {"sex", K::kCategorical, 0, 1, true},
                             {"capital", K::kOrdinal, 0, 4, false},
                             {"hours", K::kOrdinal, 0, 9, false},
                         },
                         "income", 1);
}

/// Labels follow a logistic model in which sex, race and age shift the
/// log-odds, so a model fit to it is protected-sensitive.
inline Dataset make_census(std::size_t rows, std::uint64_t seed) {
  const auto schema = census_schema();
  Rng rng(seed);
  std::vector<Instance> xs;
  std::vector<int> ys;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (std::size_t r = 0; r < rows; ++r) {
    Instance x(schema.size());
    x[0] = uniform_int(0, 3);
    x[1] = uniform_int(0, 6);
    x[2] = std::clamp(static_cast<int>(std::lround(8 + 3 * noise(rng) * 2)), 0, 15);
    x[3] = uniform_int(0, 5);
    x[4] = uniform_int(0, 11);
    x[5] = unit(rng) < 0.8 ? 1 : 0;
    x[6] = unit(rng) < 0.6 ? 1 : 0;
    x[7] = unit(rng) < 0.85 ? 0 : uniform_int(1, 4);
    x[8] = std::clamp(static_cast<int>(std::lround(4 + 2 * noise(rng) * 2)), 0, 9);
    const double z = -7.0 + 0.35 * x[2] + 0.3 * x[8] + 0.7 * x[7] + (x[3] == 1 ? 0.8 : 0.0) +
                     (x[4] % 3 == 0 ? 0.5 : 0.0) + 1.4 * x[6] + 0.8 * x[5] + 0.45 * x[0] + noise(rng);
    ys.push_back(unit(rng) < 1.0 / (1.0 + std::exp(-2.0 * z)) ? 1 : 0);
    xs.push_back(std::move(x));
  }
  return Dataset(schema, xs, std::move(ys));
}

/// Two non-protected inputs x0, x1 in [0, 9] and one protected z in [0, 3].
/// Label is x0 >= 5; x1 is ignored by the fixture network.
struct TwoPathFixture {
  AttributeSchema schema;
  Network net;
  Dataset data;
  std::size_t carrier_layer = 1;
  std::size_t carrier_neuron = 1;
};

/// Layer 1 holds a = relu(x0) (label path), the carrier c = relu(0.5z + 1)
/// and a protected copy d = relu(1.3z). Layer 2 holds relu(a) and a gate
/// g = relu(1.5c + d - 4), which d alone can never open. The favorable logit
/// is 4(a - 4.5) + 0.3g. Forcing c to 0 keeps the gate shut and removes the
/// protected signal without touching the label path; forcing c high opens it
/// for every z.
inline TwoPathFixture two_path_fixture() {
  using K = AttributeKind;
  TwoPathFixture f;
  f.schema = AttributeSchema({{"x0", K::kOrdinal, 0, 9, false}, {"x1", K::kOrdinal, 0, 9, false},
                              {"z", K::kOrdinal, 0, 3, true}},
                             "label", 1);
  DenseLayer l1{Eigen::MatrixXd(3, 3), Eigen::VectorXd(3)};
  l1.weights << 1, 0, 0,  //
      0, 0, 0.5,          //
      0, 0, 1.3;
  l1.bias << 0, 1, 0;
  DenseLayer l2{Eigen::MatrixXd(2, 3), Eigen::VectorXd(2)};
  l2.weights << 1, 0, 0,  //
      0, 1.5, 1;
  l2.bias << 0, -4;
  DenseLayer l3{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  l3.weights << 0, 0,  //
      4, 0.3;
  l3.bias << 0, -18;
  f.net = Network({l1, l2, l3});

  std::vector<Instance> rows;
  std::vector<int> labels;
  for (int x0 = 0; x0 <= 9; ++x0)
    for (int x1 = 0; x1 <= 9; ++x1)
      for (int z = 0; z <= 3; ++z) {
        rows.push_back({x0, x1, z});
        labels.push_back(x0 >= 5 ? 1 : 0);
      }
  f.data = Dataset(f.schema, rows, std::move(labels));
  return f;
}

/// Copy of `net` with every first-layer weight from a protected input set to
/// zero, so its outputs cannot depend on protected attributes.
inline Network sever_protected_inputs(const Network& net, const AttributeSchema& schema) {
  Network out = net;
  for (auto c : schema.protected_indices()) out.layer(1).weights.col(static_cast<Eigen::Index>(c)).setZero();
  return out;
}

}  // namespace qidfair

#endif  // QIDFAIR_SYNTHETIC_HPP
