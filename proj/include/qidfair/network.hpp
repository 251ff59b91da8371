#ifndef QIDFAIR_NETWORK_HPP
#define QIDFAIR_NETWORK_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qidfair/error.hpp"

namespace qidfair {

/// One affine map W * x + b. `weights` is (out x in).
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

/// Per-feature affine preprocessing applied before the first layer:
/// x' = (x - offset) / scale. Empty vectors mean identity.
struct InputScaling {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  bool identity() const { return offset.size() == 0; }
};

/// Forces neuron `neuron` of hidden layer `layer` (1-based, layer 0 is the
/// input) to output `value`.
struct Intervention {
  std::size_t layer = 1;
  std::size_t neuron = 0;
  double value = 0.0;

  bool operator==(const Intervention&) const = default;
};

/// Dense feedforward classifier: rectifier hidden layers, softmax output.
///
/// Layers are numbered 1..depth(); layer i maps the output of layer i-1
/// (layer 0 being the scaled input) to width layer_dims()[i].
class Network {
 public:
  Network() = default;

  explicit Network(std::vector<DenseLayer> layers, InputScaling scaling = {})
      : layers_(std::move(layers)), scaling_(std::move(scaling)) {
    validate();
  }

  /// All-zero network with the given widths (input, hidden..., output).
  static Network zeros(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ShapeError("network needs at least input and output widths");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 1; i < dims.size(); ++i) {
      if (dims[i] == 0 || dims[i - 1] == 0) throw ShapeError("layer widths must be positive");
      layers.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[i]),
                                              static_cast<Eigen::Index>(dims[i - 1])),
                        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[i]))});
    }
    return Network(std::move(layers));
  }

  bool empty() const { return layers_.empty(); }
  std::size_t depth() const { return layers_.size(); }
  std::size_t input_size() const { return dims_.empty() ? 0 : dims_.front(); }
  std::size_t output_size() const { return dims_.empty() ? 0 : dims_.back(); }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t width(std::size_t layer) const { return dims_.at(layer); }

  const DenseLayer& layer(std::size_t l) const { return layers_.at(l - 1); }
  DenseLayer& layer(std::size_t l) { return layers_.at(l - 1); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  const InputScaling& scaling() const { return scaling_; }
  void set_scaling(InputScaling scaling) {
    scaling_ = std::move(scaling);
    validate();
  }

  Eigen::VectorXd scale_input(const Eigen::VectorXd& x) const {
    if (scaling_.identity()) return x;
    return ((x - scaling_.offset).array() / scaling_.scale.array()).matrix();
  }

  bool operator==(const Network& other) const {
    if (dims_ != other.dims_) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].weights != other.layers_[i].weights) return false;
      if (layers_[i].bias != other.layers_[i].bias) return false;
    }
    return scaling_.offset == other.scaling_.offset && scaling_.scale == other.scaling_.scale;
  }

  /// Throws ShapeError unless the intervention addresses a hidden neuron.
  void check(const Intervention& iv) const {
    if (iv.layer < 1 || iv.layer >= depth())
      throw ShapeError("intervention layer " + std::to_string(iv.layer) +
                       " is not a hidden layer (valid: 1.." + std::to_string(depth() - 1) + ")");
    if (iv.neuron >= dims_[iv.layer])
      throw ShapeError("intervention neuron " + std::to_string(iv.neuron) + " out of range for layer " +
                       std::to_string(iv.layer) + " of width " + std::to_string(dims_[iv.layer]));
  }

 private:
  void validate() {
    dims_.clear();
    if (layers_.empty()) return;
    dims_.push_back(static_cast<std::size_t>(layers_.front().weights.cols()));
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.weights.rows() == 0 || l.weights.cols() == 0)
        throw ShapeError("layer " + std::to_string(i + 1) + " has an empty weight matrix");
      if (static_cast<std::size_t>(l.weights.cols()) != dims_.back())
        throw ShapeError("layer " + std::to_string(i + 1) + " expects " + std::to_string(l.weights.cols()) +
                         " inputs but previous layer has width " + std::to_string(dims_.back()));
      if (l.bias.size() != l.weights.rows())
        throw ShapeError("layer " + std::to_string(i + 1) + " bias length " + std::to_string(l.bias.size()) +
                         " does not match " + std::to_string(l.weights.rows()) + " rows");
      dims_.push_back(static_cast<std::size_t>(l.weights.rows()));
    }
    if (!scaling_.identity()) {
      if (static_cast<std::size_t>(scaling_.offset.size()) != dims_.front() ||
          scaling_.scale.size() != scaling_.offset.size())
        throw ShapeError("input scaling length does not match input width " + std::to_string(dims_.front()));
      if ((scaling_.scale.array() == 0.0).any()) throw ShapeError("input scale contains zero");
    }
  }

  std::vector<DenseLayer> layers_;
  InputScaling scaling_;
  std::vector<std::size_t> dims_;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::size_t>(best);
}

/// Post-activation output of every layer for one input.
struct ForwardTrace {
  /// layers[i - 1] is the output of layer i; the last entry is the
  /// probability vector.
  std::vector<Eigen::VectorXd> layers;

  const Eigen::VectorXd& at(std::size_t layer) const { return layers.at(layer - 1); }
  const Eigen::VectorXd& probabilities() const { return layers.back(); }
};

namespace detail {

inline void softmax_inplace(Eigen::Ref<Eigen::VectorXd> z) {
  const double top = z.maxCoeff();
  z = (z.array() - top).exp().matrix();
  z /= z.sum();
}

inline void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) softmax_inplace(z.col(c));
}

inline void check_input(const Network& net, Eigen::Index size) {
  if (net.empty()) throw ShapeError("network has no layers");
  if (static_cast<std::size_t>(size) != net.input_size())
    throw ShapeError("input has " + std::to_string(size) + " features, network expects " +
                     std::to_string(net.input_size()));
}

}  // namespace detail

inline ForwardTrace forward(const Network& net, const Eigen::VectorXd& input,
                            const std::optional<Intervention>& intervention = std::nullopt) {
  detail::check_input(net, input.size());
  if (intervention) net.check(*intervention);
  ForwardTrace trace;
  trace.layers.reserve(net.depth());
  Eigen::VectorXd a = net.scale_input(input);
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    const auto& layer = net.layer(l);
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    if (l < net.depth()) {
      z = z.cwiseMax(0.0);
      if (intervention && intervention->layer == l) z[static_cast<Eigen::Index>(intervention->neuron)] = intervention->value;
    } else {
      detail::softmax_inplace(z);
    }
    trace.layers.push_back(z);
    a = std::move(z);
  }
  return trace;
}

/// Continues a batched forward pass from the outputs of layer `from`
/// (one column per sample) and returns the probability matrix. Layer 0
/// means raw (unscaled) inputs. An intervention at a layer <= `from` is
/// ignored, except that one at exactly `from` is applied to `activations`.
inline Eigen::MatrixXd propagate_from(const Network& net, std::size_t from, Eigen::MatrixXd activations,
                                      const std::optional<Intervention>& intervention = std::nullopt) {
  if (net.empty()) throw ShapeError("network has no layers");
  if (from >= net.depth()) throw ShapeError("cannot propagate from the output layer");
  if (static_cast<std::size_t>(activations.rows()) != net.width(from))
    throw ShapeError("activation batch has " + std::to_string(activations.rows()) + " rows, layer " +
                     std::to_string(from) + " has width " + std::to_string(net.width(from)));
  if (intervention) {
    net.check(*intervention);
    if (intervention->layer == from)
      activations.row(static_cast<Eigen::Index>(intervention->neuron)).setConstant(intervention->value);
  }
  if (from == 0 && !net.scaling().identity()) {
    activations = (activations.colwise() - net.scaling().offset).array().colwise() / net.scaling().scale.array();
  }
  Eigen::MatrixXd a = std::move(activations);
  for (std::size_t l = from + 1; l <= net.depth(); ++l) {
    const auto& layer = net.layer(l);
    Eigen::MatrixXd z = (layer.weights * a).colwise() + layer.bias;
    if (l < net.depth()) {
      z = z.cwiseMax(0.0);
      if (intervention && intervention->layer == l)
        z.row(static_cast<Eigen::Index>(intervention->neuron)).setConstant(intervention->value);
    } else {
      detail::softmax_columns(z);
    }
    a = std::move(z);
  }
  return a;
}

/// Batched forward pass over raw inputs (one column per sample).
inline Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& inputs,
                                     const std::optional<Intervention>& intervention = std::nullopt) {
  detail::check_input(net, inputs.rows());
  return propagate_from(net, 0, inputs, intervention);
}

/// Outputs of hidden layer `layer` for a batch of raw inputs.
inline Eigen::MatrixXd layer_outputs(const Network& net, std::size_t layer, const Eigen::MatrixXd& inputs) {
  detail::check_input(net, inputs.rows());
  if (layer >= net.depth()) throw ShapeError("layer_outputs expects a hidden layer");
  Eigen::MatrixXd a = inputs;
  if (!net.scaling().identity())
    a = (a.colwise() - net.scaling().offset).array().colwise() / net.scaling().scale.array();
  for (std::size_t l = 1; l <= layer; ++l) {
    const auto& dl = net.layer(l);
    a = ((dl.weights * a).colwise() + dl.bias).cwiseMax(0.0);
  }
  return a;
}

inline std::size_t predict_label(const Network& net, const Eigen::VectorXd& input,
                                 const std::optional<Intervention>& intervention = std::nullopt) {
  return argmax(forward(net, input, intervention).probabilities());
}

namespace detail {

// Cross-entropy input gradient; an absent label means the predicted one.
inline Eigen::VectorXd loss_gradient(const Network& net, const Eigen::VectorXd& input,
                                     std::optional<std::size_t> target,
                                     const std::optional<Intervention>& intervention) {
  check_input(net, input.size());
  if (target && *target >= net.output_size())
    throw ShapeError("label " + std::to_string(*target) + " out of range for " + std::to_string(net.output_size()) +
                     " classes");
  if (intervention) net.check(*intervention);

  // Keep pre-activations to recover the rectifier masks on the way back.
  std::vector<Eigen::VectorXd> inputs_to;  // inputs_to[l-1] is the input of layer l
  std::vector<Eigen::VectorXd> pre;
  Eigen::VectorXd a = net.scale_input(input);
  for (std::size_t l = 1; l <= net.depth(); ++l) {
    const auto& layer = net.layer(l);
    inputs_to.push_back(a);
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    pre.push_back(z);
    if (l < net.depth()) {
      a = z.cwiseMax(0.0);
      if (intervention && intervention->layer == l) a[static_cast<Eigen::Index>(intervention->neuron)] = intervention->value;
    } else {
      a = z;
      softmax_inplace(a);
    }
  }

  const std::size_t label = target ? *target : argmax(a);
  Eigen::VectorXd grad = a;  // dJ/dlogits = p - onehot
  grad[static_cast<Eigen::Index>(label)] -= 1.0;
  for (std::size_t l = net.depth(); l >= 1; --l) {
    if (l < net.depth()) {
      const Eigen::VectorXd& z = pre[l - 1];
      for (Eigen::Index j = 0; j < z.size(); ++j)
        if (z[j] <= 0.0) grad[j] = 0.0;
      if (intervention && intervention->layer == l) grad[static_cast<Eigen::Index>(intervention->neuron)] = 0.0;
    }
    grad = net.layer(l).weights.transpose() * grad;
  }
  if (!net.scaling().identity()) grad = (grad.array() / net.scaling().scale.array()).matrix();
  return grad;
}

}  // namespace detail

/// Gradient of the cross-entropy loss -log p[label] with respect to the raw
/// input features.
inline Eigen::VectorXd input_gradient(const Network& net, const Eigen::VectorXd& input, std::size_t label,
                                      const std::optional<Intervention>& intervention = std::nullopt) {
  return detail::loss_gradient(net, input, label, intervention);
}

/// Same, taking the network's own predicted label as the target.
inline Eigen::VectorXd input_gradient_at_prediction(const Network& net, const Eigen::VectorXd& input) {
  return detail::loss_gradient(net, input, std::nullopt, std::nullopt);
}

inline Eigen::VectorXd to_features(std::span<const int> row) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) v[static_cast<Eigen::Index>(i)] = row[i];
  return v;
}

}  // namespace qidfair

#endif  // QIDFAIR_NETWORK_HPP
