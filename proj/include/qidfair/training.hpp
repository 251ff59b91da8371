#ifndef QIDFAIR_TRAINING_HPP
#define QIDFAIR_TRAINING_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/error.hpp"
#include "qidfair/kmeans.hpp"
#include "qidfair/network.hpp"

namespace qidfair {

struct TrainConfig {
  std::vector<std::size_t> hidden = {64, 32, 16, 8, 4};
  std::size_t epochs = 1000;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network net;
  double accuracy = 0.0;
  double final_loss = 0.0;
};

/// Fraction of rows whose predicted label matches the recorded label.
inline double accuracy(const Network& net, const Dataset& data,
                       const std::optional<Intervention>& intervention = std::nullopt) {
  if (data.empty()) throw ConfigError("accuracy of an empty dataset is undefined");
  const Eigen::MatrixXd probs = forward_batch(net, data.feature_matrix(), intervention);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (argmax(probs.col(static_cast<Eigen::Index>(r))) == static_cast<std::size_t>(data.label(r))) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Mini-batch SGD on softmax cross-entropy. He-normal weights, zero biases;
/// non-protected inputs are z-scored through the network's input scaling.
inline TrainResult train(const Dataset& data, const AttributeSchema& schema, const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("cannot train on an empty dataset");
  if (cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0))
    throw ConfigError("epochs, batch_size and learning_rate must be positive");
  for (auto h : cfg.hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");

  std::vector<std::size_t> dims{schema.size()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2);

  Rng rng(cfg.seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(dims[i - 1])));
    DenseLayer l{Eigen::MatrixXd(dims[i], dims[i - 1]), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[i]))};
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = init(rng);
    layers.push_back(std::move(l));
  }
  const Standardizer stats = Standardizer::fit(data, schema);
  Network net(std::move(layers), InputScaling{stats.mean, stats.stddev});

  const Eigen::MatrixXd x_all = stats.apply(data.feature_matrix());
  const auto n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t depth = dims.size() - 1;
  std::vector<Eigen::MatrixXd> acts(depth + 1);
  std::vector<Eigen::MatrixXd> pre(depth + 1);
  double epoch_loss = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(x_all.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) xb.col(static_cast<Eigen::Index>(i)) = x_all.col(static_cast<Eigen::Index>(order[start + i]));
      acts[0] = std::move(xb);
      for (std::size_t l = 1; l <= depth; ++l) {
        const auto& layer = net.layer(l);
        pre[l] = (layer.weights * acts[l - 1]).colwise() + layer.bias;
        if (l < depth) {
          acts[l] = pre[l].cwiseMax(0.0);
        } else {
          acts[l] = pre[l];
          detail::softmax_columns(acts[l]);
        }
      }
      Eigen::MatrixXd delta = acts[depth];
      for (std::size_t i = 0; i < b; ++i) {
        const auto y = static_cast<Eigen::Index>(data.label(order[start + i]));
        epoch_loss -= std::log(std::max(delta(y, static_cast<Eigen::Index>(i)), 1e-300));
        delta(y, static_cast<Eigen::Index>(i)) -= 1.0;
      }
      delta /= static_cast<double>(b);
      for (std::size_t l = depth; l >= 1; --l) {
        auto& layer = net.layer(l);
        Eigen::MatrixXd back;
        if (l > 1) back = layer.weights.transpose() * delta;
        layer.weights.noalias() -= cfg.learning_rate * delta * acts[l - 1].transpose();
        layer.bias.noalias() -= cfg.learning_rate * delta.rowwise().sum();
        if (l > 1) delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
  }
  TrainResult result{std::move(net), 0.0, epoch_loss};
  result.accuracy = accuracy(result.net, data);
  return result;
}

}  // namespace qidfair

#endif  // QIDFAIR_TRAINING_HPP
