#ifndef QIDFAIR_DEBUG_HPP
#define QIDFAIR_DEBUG_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/error.hpp"
#include "qidfair/network.hpp"
#include "qidfair/qid.hpp"
#include "qidfair/search.hpp"
#include "qidfair/training.hpp"

namespace qidfair {

struct DebugConfig {
  double layer_epsilon = 1e-7;       // guard in the sensitivity ratio
  double accuracy_tolerance = 0.05;  // admissible accuracy change
  std::size_t top_k = 3;
  std::size_t max_inputs = 1000;     // test cases used for expectations
  double epsilon = 0.025;            // clustering tolerance
  std::size_t workers = 1;
};

/// Protected sensitivity per layer. Vectors are indexed by layer number;
/// entry 0 is the input (delta_0 = 0) and the output layer is excluded.
struct LayerSensitivity {
  std::vector<double> delta;
  std::vector<double> rho;
  std::size_t chosen = 1;
};

namespace detail {

/// Outputs of every hidden layer for one batch; result[l - 1] is layer l.
inline std::vector<Eigen::MatrixXd> hidden_outputs(const Network& net, const Eigen::MatrixXd& inputs) {
  std::vector<Eigen::MatrixXd> out;
  Eigen::MatrixXd a = inputs;
  if (!net.scaling().identity())
    a = (a.colwise() - net.scaling().offset).array().colwise() / net.scaling().scale.array();
  for (std::size_t l = 1; l < net.depth(); ++l) {
    const auto& dl = net.layer(l);
    a = ((dl.weights * a).colwise() + dl.bias).cwiseMax(0.0);
    out.push_back(a);
  }
  return out;
}

inline void check_hidden_layer(const Network& net, std::size_t layer) {
  if (layer < 1 || layer >= net.depth())
    throw ShapeError("layer " + std::to_string(layer) + " is not a hidden layer");
}

}  // namespace detail

/// delta_l = max over protected pairs (z, z') of the L1 distance between
/// layer-l outputs, summed over the inputs; rho_l = (delta_l - max_{j<l}
/// delta_j) / (max_{j<l} delta_j + eps1) with delta_0 = 0.
inline LayerSensitivity layer_sensitivity(const Network& net, std::span<const Instance> inputs,
                                          const ProtectedSpace& space, double layer_epsilon = 1e-7) {
  if (inputs.empty()) throw ConfigError("layer localization needs at least one test input");
  if (net.depth() < 2) throw ShapeError("network has no hidden layers");
  const std::size_t hidden = net.depth() - 1;
  const std::size_t m = space.size();
  const std::size_t pairs = m * (m - 1) / 2;
  std::vector<std::vector<double>> sums(hidden, std::vector<double>(pairs, 0.0));

  for (const auto& x : inputs) {
    const auto outs = detail::hidden_outputs(net, counterfactual_matrix(x, space));
    for (std::size_t l = 0; l < hidden; ++l) {
      const auto& d = outs[l];
      std::size_t p = 0;
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b, ++p)
          sums[l][p] += (d.col(static_cast<Eigen::Index>(a)) - d.col(static_cast<Eigen::Index>(b))).lpNorm<1>();
    }
  }

  LayerSensitivity s;
  s.delta.assign(hidden + 1, 0.0);
  s.rho.assign(hidden + 1, 0.0);
  for (std::size_t l = 1; l <= hidden; ++l)
    s.delta[l] = pairs == 0 ? 0.0 : *std::max_element(sums[l - 1].begin(), sums[l - 1].end());
  double prior = 0.0;  // max_{j<l} delta_j
  for (std::size_t l = 1; l <= hidden; ++l) {
    s.rho[l] = (s.delta[l] - prior) / (prior + layer_epsilon);
    prior = std::max(prior, s.delta[l]);
    if (s.rho[l] > s.rho[s.chosen]) s.chosen = l;
  }
  return s;
}

/// Layer-l outputs of every counterfactual of every input, cached so that
/// interventions at layer l only re-run the layers above it.
class CounterfactualCache {
 public:
  CounterfactualCache(const Network& net, std::span<const Instance> inputs, const ProtectedSpace& space,
                      std::size_t layer)
      : net_(net), layer_(layer), m_(space.size()), inputs_(inputs.size()) {
    detail::check_hidden_layer(net, layer);
    Eigen::MatrixXd all(static_cast<Eigen::Index>(net.input_size()), static_cast<Eigen::Index>(inputs_ * m_));
    for (std::size_t i = 0; i < inputs_; ++i)
      all.middleCols(static_cast<Eigen::Index>(i * m_), static_cast<Eigen::Index>(m_)) = counterfactual_matrix(inputs[i], space);
    activations_ = layer_outputs(net, layer, all);
  }

  const Eigen::MatrixXd& activations() const { return activations_; }
  std::size_t size() const { return inputs_; }

  /// Cluster count per input under an optional do(layer, neuron, value).
  std::vector<std::size_t> cluster_counts(std::optional<std::pair<std::size_t, double>> neuron_value, double eps,
                                          int favorable) const {
    std::optional<Intervention> iv;
    if (neuron_value) iv = Intervention{layer_, neuron_value->first, neuron_value->second};
    const Eigen::MatrixXd probs = propagate_from(net_, layer_, activations_, iv);
    std::vector<std::size_t> ks(inputs_);
    std::vector<double> scores(m_);
    for (std::size_t i = 0; i < inputs_; ++i) {
      for (std::size_t t = 0; t < m_; ++t)
        scores[t] = std::clamp(probs(favorable, static_cast<Eigen::Index>(i * m_ + t)), 0.0, 1.0);
      ks[i] = cluster_scores(scores, eps).k();
    }
    return ks;
  }

  double mean_k(std::optional<std::pair<std::size_t, double>> neuron_value, double eps, int favorable) const {
    if (inputs_ == 0) return 0.0;
    const auto ks = cluster_counts(neuron_value, eps, favorable);
    double total = 0;
    for (auto k : ks) total += static_cast<double>(k);
    return total / static_cast<double>(inputs_);
  }

 private:
  const Network& net_;
  std::size_t layer_;
  std::size_t m_;
  std::size_t inputs_;
  Eigen::MatrixXd activations_;
};

struct NeuronCandidates {
  std::size_t neuron = 0;
  double min = 0, max = 0, mean = 0, stddev = 0;
  std::vector<double> menu;           // clipped, sorted, unique
  std::vector<double> admissible;     // subset of menu (plus 0) within the accuracy budget
  std::optional<double> activated;    // v1 > 0
  std::optional<double> deactivated;  // v2, zero when admissible

  bool skipped() const { return !activated || !deactivated || *activated <= *deactivated; }
};

struct NeuronValueCandidates {
  std::size_t layer = 1;
  double baseline_accuracy = 0.0;
  std::vector<NeuronCandidates> neurons;
};

/// Stats menu {min, max, mean, mean +- sd, mean +- 2 sd} of each neuron's
/// outputs over all counterfactual forwards, clipped at zero. v1 is the
/// largest positive value whose permanent intervention keeps accuracy on
/// `data` within `tolerance`; v2 is zero when admissible, otherwise the
/// smallest admissible value.
inline NeuronValueCandidates neuron_candidates(const Network& net, std::span<const Instance> inputs,
                                               const ProtectedSpace& space, std::size_t layer, const Dataset& data,
                                               double tolerance) {
  if (inputs.empty()) throw ConfigError("neuron localization needs at least one test input");
  detail::check_hidden_layer(net, layer);
  const CounterfactualCache cache(net, inputs, space, layer);
  const Eigen::MatrixXd& acts = cache.activations();

  NeuronValueCandidates out;
  out.layer = layer;
  out.baseline_accuracy = accuracy(net, data);
  const Eigen::MatrixXd data_acts = layer_outputs(net, layer, data.feature_matrix());

  auto accuracy_with = [&](std::size_t neuron, double v) {
    const Eigen::MatrixXd probs = propagate_from(net, layer, data_acts, Intervention{layer, neuron, v});
    std::size_t hits = 0;
    for (std::size_t r = 0; r < data.size(); ++r)
      if (argmax(probs.col(static_cast<Eigen::Index>(r))) == static_cast<std::size_t>(data.label(r))) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
  };

  for (std::size_t j = 0; j < net.width(layer); ++j) {
    NeuronCandidates c;
    c.neuron = j;
    const auto row = acts.row(static_cast<Eigen::Index>(j));
    c.min = row.minCoeff();
    c.max = row.maxCoeff();
    c.mean = row.mean();
    c.stddev = std::sqrt((row.array() - c.mean).square().mean());
    for (double v : {c.min, c.max, c.mean, c.mean - c.stddev, c.mean + c.stddev, c.mean - 2 * c.stddev,
                     c.mean + 2 * c.stddev})
      c.menu.push_back(std::max(v, 0.0));
    std::sort(c.menu.begin(), c.menu.end());
    c.menu.erase(std::unique(c.menu.begin(), c.menu.end()), c.menu.end());

    std::vector<double> trial = c.menu;
    if (trial.front() != 0.0) trial.insert(trial.begin(), 0.0);
    for (double v : trial)
      if (std::abs(accuracy_with(j, v) - out.baseline_accuracy) <= tolerance) c.admissible.push_back(v);
    for (double v : c.admissible)
      if (v > 0) c.activated = v;  // ascending, so the last positive wins
    if (!c.admissible.empty()) c.deactivated = c.admissible.front();
    out.neurons.push_back(std::move(c));
  }
  return out;
}

/// Sign of a neuron's causal effect on discrimination.
enum class FairnessEffect {
  kNone,
  kPositive,  // activating it lowers the cluster count
  kNegative,  // activating it raises the cluster count
};

inline const char* effect_name(FairnessEffect e) {
  switch (e) {
    case FairnessEffect::kPositive: return "positive";
    case FairnessEffect::kNegative: return "negative";
    default: return "none";
  }
}

struct AcdResult {
  std::size_t neuron = 0;
  double activated_value = 0.0;
  double deactivated_value = 0.0;
  double mean_k_activated = 0.0;
  double mean_k_deactivated = 0.0;
  double baseline_k = 0.0;
  double acd = 0.0;       // (E[k|do(v1)] - E[k|do(v2)]) / E[k]
  double acd_bits = 0.0;  // same difference in mean log2(k)
  FairnessEffect effect = FairnessEffect::kNone;
};

namespace detail {

inline double mean_log2(const std::vector<std::size_t>& ks) {
  double t = 0;
  for (auto k : ks) t += std::log2(static_cast<double>(k));
  return ks.empty() ? 0.0 : t / static_cast<double>(ks.size());
}

inline double mean_of(const std::vector<std::size_t>& ks) {
  double t = 0;
  for (auto k : ks) t += static_cast<double>(k);
  return ks.empty() ? 0.0 : t / static_cast<double>(ks.size());
}

inline AcdResult acd_from_cache(const CounterfactualCache& cache, double baseline_k, std::size_t neuron, double v1,
                                double v2, double eps, int favorable) {
  const auto k1 = cache.cluster_counts(std::pair{neuron, v1}, eps, favorable);
  const auto k2 = cache.cluster_counts(std::pair{neuron, v2}, eps, favorable);
  AcdResult r;
  r.neuron = neuron;
  r.activated_value = v1;
  r.deactivated_value = v2;
  r.mean_k_activated = mean_of(k1);
  r.mean_k_deactivated = mean_of(k2);
  r.baseline_k = baseline_k;
  r.acd = (r.mean_k_activated - r.mean_k_deactivated) / baseline_k;
  r.acd_bits = mean_log2(k1) - mean_log2(k2);
  r.effect = r.acd > 0 ? FairnessEffect::kNegative : r.acd < 0 ? FairnessEffect::kPositive : FairnessEffect::kNone;
  return r;
}

}  // namespace detail

/// Average causal difference of one neuron, normalised by the un-intervened
/// mean cluster count over the same inputs.
inline AcdResult acd(const Network& net, std::span<const Instance> inputs, const ProtectedSpace& space, double eps,
                     int favorable_label, std::size_t layer, std::size_t neuron, double v1, double v2) {
  if (inputs.empty()) throw ConfigError("ACD needs at least one test input");
  net.check(Intervention{layer, neuron, v1});
  const CounterfactualCache cache(net, inputs, space, layer);
  return detail::acd_from_cache(cache, cache.mean_k(std::nullopt, eps, favorable_label), neuron, v1, v2, eps,
                                favorable_label);
}

struct Localization {
  LayerSensitivity sensitivity;
  std::size_t layer = 1;
  double influence = 0.0;  // rho of the chosen layer
  double baseline_accuracy = 0.0;
  double baseline_k = 0.0;
  std::size_t inputs = 0;
  NeuronValueCandidates candidates;
  std::vector<AcdResult> results;  // one per non-skipped neuron, by index
  std::vector<std::size_t> skipped;
  std::vector<std::optional<AcdResult>> positive;  // top_k, padded with nullopt
  std::vector<std::optional<AcdResult>> negative;
  std::vector<AcdResult> ranked;  // all results by |acd| descending
};

/// The `limit` test cases with the highest cluster counts (discovery order
/// among equals).
inline std::vector<Instance> select_debug_inputs(std::span<const TestCase> cases, std::size_t limit) {
  std::vector<std::size_t> order(cases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cases[a].k > cases[b].k; });
  std::vector<Instance> out;
  for (std::size_t i = 0; i < std::min(limit, order.size()); ++i) out.push_back(cases[order[i]].x);
  return out;
}

/// Layer localization, admissible value selection, and per-neuron ACD
/// ranking at the chosen layer.
inline Localization localize(const Network& net, std::span<const Instance> inputs, const Dataset& data,
                             const AttributeSchema& schema, const DebugConfig& cfg) {
  if (inputs.empty()) throw ConfigError("localization needs at least one test case");
  const auto space = enumerate_protected(schema);
  const auto used = inputs.subspan(0, std::min(inputs.size(), cfg.max_inputs));
  const int fav = schema.favorable_label();

  Localization loc;
  loc.inputs = used.size();
  loc.sensitivity = layer_sensitivity(net, used, space, cfg.layer_epsilon);
  loc.layer = loc.sensitivity.chosen;
  loc.influence = loc.sensitivity.rho[loc.layer];
  loc.candidates = neuron_candidates(net, used, space, loc.layer, data, cfg.accuracy_tolerance);
  loc.baseline_accuracy = loc.candidates.baseline_accuracy;

  const CounterfactualCache cache(net, used, space, loc.layer);
  loc.baseline_k = cache.mean_k(std::nullopt, cfg.epsilon, fav);

  const auto& neurons = loc.candidates.neurons;
  std::vector<std::optional<AcdResult>> slots(neurons.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t j = begin; j < neurons.size(); j += stride) {
      if (neurons[j].skipped()) continue;
      slots[j] = detail::acd_from_cache(cache, loc.baseline_k, j, *neurons[j].activated, *neurons[j].deactivated,
                                        cfg.epsilon, fav);
    }
  };
  if (cfg.workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < cfg.workers; ++w) pool.emplace_back(work, w, cfg.workers);
  }
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (slots[j])
      loc.results.push_back(*slots[j]);
    else
      loc.skipped.push_back(j);
  }

  loc.ranked = loc.results;
  std::stable_sort(loc.ranked.begin(), loc.ranked.end(),
                   [](const AcdResult& a, const AcdResult& b) { return std::abs(a.acd) > std::abs(b.acd); });
  for (const auto& r : loc.ranked) {
    if (r.effect == FairnessEffect::kPositive && loc.positive.size() < cfg.top_k) loc.positive.push_back(r);
    if (r.effect == FairnessEffect::kNegative && loc.negative.size() < cfg.top_k) loc.negative.push_back(r);
  }
  loc.positive.resize(cfg.top_k);
  loc.negative.resize(cfg.top_k);
  return loc;
}

struct MitigationResult {
  Intervention intervention;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double k_before = 0.0;
  double k_after = 0.0;
  std::size_t inputs = 0;
};

/// Accuracy on `data` and mean cluster count over `eval_inputs`, before and
/// after permanently applying `intervention`. Throws
/// InadmissibleIntervention when the accuracy change exceeds `tolerance`.
inline MitigationResult mitigate(const Network& net, const Intervention& intervention, const Dataset& data,
                                 std::span<const Instance> eval_inputs, const AttributeSchema& schema, double eps,
                                 double tolerance) {
  net.check(intervention);
  if (eval_inputs.empty()) throw ConfigError("mitigation needs evaluation inputs");
  const auto space = enumerate_protected(schema);
  MitigationResult r;
  r.intervention = intervention;
  r.inputs = eval_inputs.size();
  r.accuracy_before = accuracy(net, data);
  r.accuracy_after = accuracy(net, data, intervention);
  if (std::abs(r.accuracy_before - r.accuracy_after) > tolerance)
    throw InadmissibleIntervention("do(layer " + std::to_string(intervention.layer) + ", neuron " +
                                   std::to_string(intervention.neuron) + ", " + std::to_string(intervention.value) +
                                   ") changes accuracy from " + std::to_string(r.accuracy_before) + " to " +
                                   std::to_string(r.accuracy_after));
  const CounterfactualCache cache(net, eval_inputs, space, intervention.layer);
  r.k_before = cache.mean_k(std::nullopt, eps, schema.favorable_label());
  r.k_after = cache.mean_k(std::pair{intervention.neuron, intervention.value}, eps, schema.favorable_label());
  return r;
}

}  // namespace qidfair

#endif  // QIDFAIR_DEBUG_HPP
