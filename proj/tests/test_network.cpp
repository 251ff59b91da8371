#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qidfair/network_io.hpp"
#include "qidfair/training.hpp"
#include "test_util.hpp"

using namespace qidfair;
using qidfair::oracle::Gen;

namespace {

// 2 inputs -> 2 hidden -> 2 outputs, values worked out by hand.
Network tiny_net() {
  DenseLayer h{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  h.weights << 1, -1,  //
      2, 1;
  h.bias << 0, -1;
  DenseLayer o{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  o.weights << 1, 0,  //
      0, 1;
  o.bias << 0, 0;
  return Network({h, o});
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("qidfair_test_" + name);
}

}  // namespace

TEST(Network, HandComputedForward) {
  const auto net = tiny_net();
  // x = (1, 2): hidden = relu(1 - 2, 2 + 2 - 1) = (0, 3); logits (0, 3).
  const auto trace = forward(net, Eigen::Vector2d(1, 2));
  EXPECT_DOUBLE_EQ(trace.at(1)[0], 0.0);
  EXPECT_DOUBLE_EQ(trace.at(1)[1], 3.0);
  const double p1 = std::exp(3.0) / (1 + std::exp(3.0));
  EXPECT_NEAR(trace.probabilities()[1], p1, 1e-15);
  EXPECT_NEAR(trace.probabilities()[0], 1 - p1, 1e-15);
  EXPECT_EQ(predict_label(net, Eigen::Vector2d(1, 2)), 1u);
}

TEST(Network, InterventionOverridesNeuron) {
  const auto net = tiny_net();
  const auto trace = forward(net, Eigen::Vector2d(1, 2), Intervention{1, 1, 0.5});
  EXPECT_DOUBLE_EQ(trace.at(1)[1], 0.5);
  const double p1 = std::exp(0.5) / (1 + std::exp(0.5));
  EXPECT_NEAR(trace.probabilities()[1], p1, 1e-15);
  EXPECT_THROW(forward(net, Eigen::Vector2d(1, 2), Intervention{2, 0, 1.0}), ShapeError);
  EXPECT_THROW(forward(net, Eigen::Vector2d(1, 2), Intervention{1, 2, 1.0}), ShapeError);
}

TEST(Network, ShapeMismatchIsRejected) {
  DenseLayer a{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)};
  DenseLayer b{Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2)};
  EXPECT_THROW(Network({a, b}), ShapeError);
  EXPECT_THROW(forward(tiny_net(), Eigen::Vector3d(1, 2, 3)), ShapeError);
}

TEST(Network, MatchesScalarReferenceOnRandomNets) {
  Gen g(1);
  std::normal_distribution<double> n(0, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = oracle::random_network(oracle::random_dims(4, g), g);
    std::vector<double> x(4);
    for (double& v : x) v = n(g);
    const auto ref = oracle::reference_probabilities(net, x);
    const auto got = forward(net, Eigen::Map<Eigen::VectorXd>(x.data(), 4)).probabilities();
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[static_cast<Eigen::Index>(i)], ref[i], 1e-12);
  }
}

TEST(Network, BatchAndSuffixAgreeWithSingleForward) {
  Gen g(2);
  const auto net = oracle::random_network({3, 5, 4, 2}, g);
  Eigen::MatrixXd batch = Eigen::MatrixXd::Random(3, 7) * 3;
  const Intervention iv{2, 1, 0.7};
  const auto all = forward_batch(net, batch, iv);
  const auto hidden1 = layer_outputs(net, 1, batch);
  const auto suffix = propagate_from(net, 1, hidden1, iv);
  for (Eigen::Index c = 0; c < batch.cols(); ++c) {
    const auto single = forward(net, batch.col(c), iv).probabilities();
    EXPECT_LT((all.col(c) - single).norm(), 1e-12);
    EXPECT_LT((suffix.col(c) - single).norm(), 1e-12);
  }
}

TEST(Network, GradientOfLinearSoftmaxIsClosedForm) {
  // No hidden layer: d(-log p_y)/dx = W^T (p - e_y).
  Gen g(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = oracle::random_network({5, 3}, g);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
    const auto p = forward(net, x).probabilities();
    for (std::size_t y = 0; y < 3; ++y) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
      e[static_cast<Eigen::Index>(y)] = 1;
      const Eigen::VectorXd expected = net.layer(1).weights.transpose() * (p - e);
      EXPECT_LT((input_gradient(net, x, y) - expected).norm(), 1e-12);
    }
  }
}

TEST(Network, GradientMatchesFiniteDifferences) {
  Gen g(4);
  int checked = 0;
  while (checked < 100) {
    const auto net = oracle::random_network(oracle::random_dims(4, g), g);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(4) * 2;
    if (oracle::kink_margin(net, x) < 1e-3) continue;
    for (std::size_t y = 0; y < 2; ++y) {
      const auto analytic = input_gradient(net, x, y);
      const auto numeric = oracle::finite_difference_gradient(net, x, y);
      const double rel = (analytic - numeric).norm() / std::max(1e-8, numeric.norm());
      EXPECT_LE(rel, 1e-4) << "trial " << checked;
    }
    ++checked;
  }
}

TEST(Network, GradientAtPredictionUsesArgmaxLabel) {
  const auto net = tiny_net();
  const Eigen::Vector2d x(1, 2);
  EXPECT_LT((input_gradient_at_prediction(net, x) - input_gradient(net, x, 1)).norm(), 1e-15);
}

TEST(Network, InterventionCutsGradientThroughNeuron) {
  // Forcing the only live hidden neuron leaves nothing upstream to move.
  const auto net = tiny_net();
  const auto grad = detail::loss_gradient(net, Eigen::Vector2d(1, 2), 1, Intervention{1, 1, 3.0});
  EXPECT_DOUBLE_EQ(grad.norm(), 0.0);
}

TEST(Network, SaveLoadRoundTrip) {
  Gen g(5);
  auto net = oracle::random_network({4, 6, 3, 2}, g);
  net.set_scaling(InputScaling{Eigen::Vector4d(1, 2, 3, 0), Eigen::Vector4d(2, 0.5, 1, 1)});
  const auto path = temp_file("roundtrip.json");
  save_network(net, path);
  const auto back = load_network(path);
  EXPECT_TRUE(back == net);
  const Eigen::Vector4d x(0.5, -1, 2, 3);
  EXPECT_EQ(forward(back, x).probabilities(), forward(net, x).probabilities());
  std::filesystem::remove(path);
}

TEST(Network, TruncatedModelFileIsParseError) {
  Gen g(6);
  const auto path = temp_file("truncated.json");
  save_network(oracle::random_network({3, 4, 2}, g), path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  EXPECT_THROW(load_network(path), ParseError);
  std::filesystem::remove(path);
}

TEST(Network, MismatchedDimensionsInModelFile) {
  Gen g(7);
  auto j = network_to_json(oracle::random_network({3, 4, 2}, g));
  j["layers"][1]["cols"] = 5;
  EXPECT_THROW(network_from_json(j), Error);
  auto k = network_to_json(oracle::random_network({3, 4, 2}, g));
  k["layers"][0].erase("bias");
  try {
    network_from_json(k);
    FAIL() << "missing field accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bias"), std::string::npos);
  }
  EXPECT_THROW(load_network(temp_file("does_not_exist.json")), ConfigError);
}

namespace {

// Two-feature data labelled by a line, with a margin.
Dataset separable(std::size_t n, std::uint64_t seed, AttributeSchema& schema) {
  schema = AttributeSchema({{"a", AttributeKind::kOrdinal, 0, 20, false},
                            {"b", AttributeKind::kOrdinal, 0, 20, false},
                            {"p", AttributeKind::kCategorical, 0, 1, true}});
  Gen g(seed);
  std::uniform_int_distribution<int> u(0, 20), bit(0, 1);
  std::vector<Instance> rows;
  std::vector<int> labels;
  while (rows.size() < n) {
    const int a = u(g), b = u(g);
    if (std::abs(a + b - 20) < 2) continue;
    rows.push_back({a, b, bit(g)});
    labels.push_back(a + b > 20 ? 1 : 0);
  }
  return Dataset(schema, rows, labels);
}

// Plain logistic regression by full-batch gradient descent on standardised
// features; the reference for what a linear model reaches on the data.
double logistic_regression_accuracy(const Dataset& d) {
  const Eigen::MatrixXd x = d.feature_matrix();
  const Eigen::VectorXd mu = x.rowwise().mean();
  Eigen::VectorXd sd = ((x.colwise() - mu).array().square().rowwise().mean()).sqrt();
  for (Eigen::Index i = 0; i < sd.size(); ++i)
    if (sd[i] == 0) sd[i] = 1;
  const Eigen::MatrixXd z = (x.colwise() - mu).array().colwise() / sd.array();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(z.rows());
  double b = 0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(z.rows());
    double gb = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      const double p = 1 / (1 + std::exp(-(w.dot(z.col(c)) + b)));
      const double e = p - d.label(static_cast<std::size_t>(c));
      gw += e * z.col(c);
      gb += e;
    }
    w -= 0.5 * gw / static_cast<double>(z.cols());
    b -= 0.5 * gb / static_cast<double>(z.cols());
  }
  std::size_t hits = 0;
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    hits += ((w.dot(z.col(c)) + b > 0) == (d.label(static_cast<std::size_t>(c)) == 1));
  return static_cast<double>(hits) / static_cast<double>(z.cols());
}

}  // namespace

TEST(Training, SeparableDataReachesLogisticRegressionAccuracy) {
  AttributeSchema schema;
  const auto data = separable(400, 8, schema);
  const double oracle = logistic_regression_accuracy(data);
  ASSERT_GE(oracle, 0.97);
  TrainConfig cfg;
  cfg.hidden = {16, 8};
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.learning_rate = 0.05;
  cfg.seed = 3;
  const auto result = train(data, schema, cfg);
  EXPECT_GE(result.accuracy, 0.95);
  EXPECT_GE(result.accuracy, oracle - 0.03);
}

TEST(Training, SingleRowDataset) {
  AttributeSchema schema;
  const auto full = separable(10, 9, schema);
  const Dataset one(schema, {full.instance(0)}, {full.label(0)});
  TrainConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 50;
  const auto result = train(one, schema, cfg);
  EXPECT_DOUBLE_EQ(result.accuracy, 1.0);
}

TEST(Training, SameSeedSameWeights) {
  AttributeSchema schema;
  const auto data = separable(100, 10, schema);
  TrainConfig cfg;
  cfg.hidden = {8, 4};
  cfg.epochs = 20;
  cfg.seed = 42;
  EXPECT_TRUE(train(data, schema, cfg).net == train(data, schema, cfg).net);
  auto other = cfg;
  other.seed = 43;
  EXPECT_FALSE(train(data, schema, cfg).net == train(data, schema, other).net);
}

TEST(Training, DivergenceIsReported) {
  AttributeSchema schema;
  const auto data = separable(100, 11, schema);
  TrainConfig cfg;
  cfg.hidden = {32, 32, 32};
  cfg.epochs = 50;
  cfg.learning_rate = 1e200;  // weights overflow within a few steps
  EXPECT_THROW(train(data, schema, cfg), TrainingDiverged);
}

TEST(Training, ProtectedColumnsAreNotStandardised) {
  AttributeSchema schema;
  const auto data = separable(100, 12, schema);
  TrainConfig cfg;
  cfg.hidden = {4};
  cfg.epochs = 1;
  const auto net = train(data, schema, cfg).net;
  EXPECT_DOUBLE_EQ(net.scaling().offset[2], 0.0);
  EXPECT_DOUBLE_EQ(net.scaling().scale[2], 1.0);
  EXPECT_NE(net.scaling().scale[0], 1.0);
}
