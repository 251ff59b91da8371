#ifndef QIDFAIR_SEARCH_HPP
#define QIDFAIR_SEARCH_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <unordered_set>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/error.hpp"
#include "qidfair/kmeans.hpp"
#include "qidfair/network.hpp"
#include "qidfair/qid.hpp"

namespace qidfair {

struct SearchConfig {
  std::size_t partitions = 2;   // k-means groups seeds are drawn from
  std::size_t max_global = 10;  // global iterations per seed
  std::size_t max_local = 1000; // evaluations per local phase
  double epsilon = 0.025;
  int global_step = 1;
  int local_step = 1;
  double timeout_seconds = 60.0;
  std::uint64_t seed = 0;
  /// Stop after this many seeds even if time remains. With one worker this
  /// makes the whole report reproducible.
  std::optional<std::size_t> max_seeds;
  std::size_t workers = 1;
  DomainConstraint constraint;
};

enum class Phase { kGlobal, kLocal };

inline const char* phase_name(Phase p) { return p == Phase::kGlobal ? "global" : "local"; }

struct TestCase {
  Instance x;  // full row; protected columns hold the seed's own tuple
  std::size_t k = 1;
  double q_inf = 0.0;
  double q_shannon = 0.0;
  double delta = 0.0;
  Phase phase = Phase::kGlobal;
  double wall_time = 0.0;
};

/// An instance where some protected tuple gets the unfavorable label and
/// another the favorable one.
struct IdRecord {
  Instance x;
  std::size_t unfavorable_tuple = 0;
  std::size_t favorable_tuple = 0;
  double wall_time = 0.0;
};

struct SeverityLevel {
  std::size_t k = 0;
  std::size_t count = 0;
};

struct SearchReport {
  std::vector<TestCase> test_cases;  // unique by non-protected values, discovery order
  std::vector<IdRecord> id_instances;
  std::size_t m = 0;
  std::size_t seeds = 0;
  std::size_t global_samples = 0;  // every global evaluation, repeats included
  std::size_t local_samples = 0;   // every local evaluation, repeats included
  double k_initial = 0.0;          // mean k over dataset rows
  std::size_t k_max = 1;           // K_F
  double time_to_k_max = 0.0;
  double q_inf = 0.0;              // log2(K_F)
  double q_shannon = 0.0;          // best Shannon leakage among K_F cases
  double q_max = 0.0;              // upper bound log2(min(ceil(1/eps), m))
  std::vector<SeverityLevel> severity;  // top three k levels, descending
  double local_success_rate = 0.0;
  std::optional<double> time_first_id;
  std::optional<double> time_1000th_id;
  double elapsed = 0.0;
};

/// Everything the search steps need besides the instance itself.
struct SearchContext {
  const Network& net;
  const AttributeSchema& schema;
  ProtectedSpace space;
  double epsilon = 0.025;
  int favorable_label = 1;

  SearchContext(const Network& n, const AttributeSchema& s, double eps)
      : net(n), schema(s), space(enumerate_protected(s)), epsilon(eps), favorable_label(s.favorable_label()) {}

  CounterfactualOutcome evaluate(std::span<const int> x) const {
    return evaluate_counterfactuals(net, x, space, favorable_label);
  }
};

/// Sign vector over features where both gradients agree on a non-protected
/// coordinate. Falls back to the sign of `g_a` on its largest non-protected
/// entry; all-zero gradients give the zero vector.
inline std::vector<int> choose_common_direction(const Eigen::VectorXd& g_a, const Eigen::VectorXd& g_b,
                                                const std::vector<bool>& non_protected) {
  if (g_a.size() != g_b.size() || static_cast<std::size_t>(g_a.size()) != non_protected.size())
    throw ShapeError("choose_common_direction: gradient lengths differ");
  auto sign = [](double v) { return (v > 0) - (v < 0); };
  std::vector<int> d(non_protected.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!non_protected[i]) continue;
    const int sa = sign(g_a[static_cast<Eigen::Index>(i)]);
    if (sa != 0 && sa == sign(g_b[static_cast<Eigen::Index>(i)])) {
      d[i] = sa;
      any = true;
    }
  }
  if (any) return d;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!non_protected[i] || g_a[static_cast<Eigen::Index>(i)] == 0.0) continue;
    if (!best || std::abs(g_a[static_cast<Eigen::Index>(i)]) > std::abs(g_a[static_cast<Eigen::Index>(*best)])) best = i;
  }
  if (best) d[*best] = sign(g_a[static_cast<Eigen::Index>(*best)]);
  return d;
}

struct GlobalStep {
  Instance next;
  CounterfactualOutcome outcome;
  ClusterPartition partition;
  std::vector<int> direction;
  bool enter_local = false;
};

/// One global iteration from `x`: cluster the counterfactual scores, take a
/// pair from the largest cluster, and move along their common gradient sign.
inline GlobalStep global_step(const SearchContext& ctx, std::span<const int> x, int step_size, std::size_t prev_k,
                              double prev_delta, Rng& rng) {
  GlobalStep out;
  out.outcome = ctx.evaluate(x);
  out.partition = cluster_scores(out.outcome.scores, ctx.epsilon);
  const auto& members = out.partition.clusters()[out.partition.largest()].members;
  std::size_t a = members.front(), b = a;
  if (members.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const auto i = pick(rng);
    auto j = pick(rng);
    while (j == i) j = pick(rng);
    a = members[i];
    b = members[j];
  }
  const Eigen::VectorXd g_a = input_gradient_at_prediction(ctx.net, to_features(ctx.space.with_tuple(x, a)));
  const Eigen::VectorXd g_b =
      a == b ? g_a : input_gradient_at_prediction(ctx.net, to_features(ctx.space.with_tuple(x, b)));
  out.direction = choose_common_direction(g_a, g_b, ctx.schema.non_protected_mask());
  std::vector<double> moved(x.begin(), x.end());
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += step_size * out.direction[i];
  out.next = ctx.schema.clamp(std::span<const double>(moved));
  const auto k = out.partition.k();
  out.enter_local = k > prev_k || (k == prev_k && delta(out.partition) > prev_delta);
  return out;
}

/// Local objective to minimise: -((k - 1) + (1 - exp(-0.1 * delta))).
inline double eval_objective(const ClusterPartition& part) {
  return -(static_cast<double>(part.k()) - 1.0 + delta_term(delta(part)));
}

inline double eval_f(const SearchContext& ctx, std::span<const int> x) {
  return eval_objective(cluster_scores(ctx.evaluate(x).scores, ctx.epsilon));
}

/// One local proposal: add the gradients of `x` and a counterfactual from a
/// different cluster, normalise to unit L1, and step the non-protected
/// feature with the smallest non-zero component by `step_size` in its sign.
/// Returns `x` unchanged when no feature can move.
inline Instance perturb_local(const SearchContext& ctx, std::span<const int> x, const ClusterPartition& part,
                              int step_size, Rng& rng) {
  const auto m = ctx.space.size();
  Instance same(x.begin(), x.end());
  if (m < 2) return same;
  const auto own = ctx.space.index_of(x);
  const auto own_cluster = part.cluster_of(own);
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < part.k(); ++c)
    if (c != own_cluster) pool.insert(pool.end(), part.clusters()[c].members.begin(), part.clusters()[c].members.end());
  if (pool.empty())
    for (std::size_t t = 0; t < m; ++t)
      if (t != own) pool.push_back(t);
  std::sort(pool.begin(), pool.end());
  const auto other = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];

  Eigen::VectorXd g = input_gradient_at_prediction(ctx.net, to_features(x)) +
                      input_gradient_at_prediction(ctx.net, to_features(ctx.space.with_tuple(x, other)));
  const double norm = g.lpNorm<1>();
  if (!(norm > 0)) return same;
  g /= norm;
  std::optional<std::size_t> pick;
  for (auto i : ctx.schema.non_protected_indices()) {
    const double v = std::abs(g[static_cast<Eigen::Index>(i)]);
    if (v == 0.0) continue;
    if (!pick || v < std::abs(g[static_cast<Eigen::Index>(*pick)])) pick = i;
  }
  if (!pick) return same;
  std::vector<double> moved(x.begin(), x.end());
  moved[*pick] += step_size * (g[static_cast<Eigen::Index>(*pick)] > 0 ? 1 : -1);
  return ctx.schema.clamp(std::span<const double>(moved));
}

struct HopResult {
  Instance best;
  double best_value = 0.0;
  std::size_t evaluations = 0;
  std::size_t accepted = 0;
};

/// Greedy basin-hopping driver: evaluates `x0`, then repeatedly proposes
/// `step(current)` and accepts a proposal only if it strictly lowers `eval`.
/// The budget of `max_evals` iterations includes the initial evaluation; a
/// proposal equal to the current point is rejected without evaluation but
/// still uses up an iteration. `on_accept` sees x0 and every accepted point.
template <class Eval, class Step, class Stop, class OnAccept>
HopResult greedy_basin_hop(Instance x0, Eval&& eval, Step&& step, std::size_t max_evals, Stop&& stop,
                           OnAccept&& on_accept) {
  HopResult r;
  r.best = std::move(x0);
  if (max_evals == 0) return r;
  r.best_value = eval(r.best);
  r.evaluations = 1;
  on_accept(r.best);
  for (std::size_t iter = 1; iter < max_evals && !stop(); ++iter) {
    Instance cand = step(r.best);
    if (cand == r.best) continue;
    const double value = eval(cand);
    ++r.evaluations;
    if (value < r.best_value) {
      r.best_value = value;
      r.best = std::move(cand);
      ++r.accepted;
      on_accept(r.best);
    }
  }
  return r;
}

template <class Eval, class Step>
HopResult greedy_basin_hop(Instance x0, Eval&& eval, Step&& step, std::size_t max_evals) {
  return greedy_basin_hop(std::move(x0), eval, step, max_evals, [] { return false; }, [](const Instance&) {});
}

/// ID check: favorable and unfavorable labels both present among the
/// counterfactuals. Witnesses are the first tuple with each label.
inline std::optional<IdRecord> id_from_labels(std::span<const int> x, std::span<const int> labels, int favorable) {
  std::optional<std::size_t> fav, unfav;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] == favorable) {
      if (!fav) fav = t;
    } else if (!unfav) {
      unfav = t;
    }
  }
  if (!fav || !unfav) return std::nullopt;
  return IdRecord{Instance(x.begin(), x.end()), *unfav, *fav, 0.0};
}

inline std::optional<IdRecord> record_id(const Network& net, std::span<const int> x, const ProtectedSpace& space,
                                         int favorable_label) {
  return id_from_labels(x, evaluate_counterfactuals(net, x, space, favorable_label).labels, favorable_label);
}

namespace detail {

struct InstanceHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int x : v) h = (h ^ static_cast<std::size_t>(static_cast<unsigned>(x))) * 0x100000001b3ULL;
    return h;
  }
};

}  // namespace detail

/// Thread-safe collector of evaluated instances. Test cases and IDs are
/// de-duplicated on the non-protected values.
class SearchSink {
 public:
  using Clock = std::chrono::steady_clock;

  SearchSink(const AttributeSchema& schema, int favorable_label, Clock::time_point start)
      : np_(schema.non_protected_indices()), favorable_(favorable_label), start_(start) {}

  void record(std::span<const int> x, const CounterfactualOutcome& outcome, const ClusterPartition& part,
              Phase phase) {
    const double now = seconds();
    std::vector<int> key;
    key.reserve(np_.size());
    for (auto i : np_) key.push_back(x[i]);

    std::lock_guard lock(mu_);
    (phase == Phase::kGlobal ? report_.global_samples : report_.local_samples)++;
    if (seen_.insert(key).second) {
      const auto q = measure(part);
      report_.test_cases.push_back({Instance(x.begin(), x.end()), q.k, q.q_inf, q.q_shannon, q.delta, phase, now});
      if (q.k > report_.k_max) {
        report_.k_max = q.k;
        report_.time_to_k_max = now;
      }
    }
    if (phase != Phase::kLocal) return;
    if (auto id = id_from_labels(x, outcome.labels, favorable_); id && ids_.insert(key).second) {
      id->wall_time = now;
      report_.id_instances.push_back(std::move(*id));
      if (report_.id_instances.size() == 1) report_.time_first_id = now;
      if (report_.id_instances.size() == 1000) report_.time_1000th_id = now;
    }
  }

  void count_seed() {
    std::lock_guard lock(mu_);
    ++report_.seeds;
  }

  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  SearchReport take() {
    std::lock_guard lock(mu_);
    return std::move(report_);
  }

 private:
  std::vector<std::size_t> np_;
  int favorable_;
  Clock::time_point start_;
  std::mutex mu_;
  SearchReport report_;
  std::unordered_set<std::vector<int>, detail::InstanceHash> seen_;
  std::unordered_set<std::vector<int>, detail::InstanceHash> ids_;
};

/// Local phase from `seed`: greedy basin hopping with eval_f as objective
/// and perturb_local as step. Every evaluated point goes to the sink.
inline std::size_t local_search(const SearchContext& ctx, std::span<const int> seed, int step_size,
                                std::size_t max_evals, Rng& rng, SearchSink& sink,
                                const std::function<bool()>& stop = [] { return false; },
                                const DomainConstraint& constraint = {}) {
  ClusterPartition current;
  ClusterPartition candidate;
  auto eval = [&](const Instance& x) {
    const auto outcome = ctx.evaluate(x);
    candidate = cluster_scores(outcome.scores, ctx.epsilon);
    sink.record(x, outcome, candidate, Phase::kLocal);
    return eval_objective(candidate);
  };
  auto step = [&](const Instance& x) {
    Instance next = perturb_local(ctx, x, current, step_size, rng);
    if (constraint && !constraint(next)) return x;
    return next;
  };
  auto accept = [&](const Instance&) { current = candidate; };
  return greedy_basin_hop(Instance(seed.begin(), seed.end()), eval, step, max_evals, stop, accept).evaluations;
}

/// Mean cluster count over (up to `limit`) dataset rows, spread evenly.
inline double initial_cluster_count(const SearchContext& ctx, const Dataset& data, std::size_t limit = 1000) {
  if (data.empty()) return 0.0;
  const std::size_t n = std::min(limit, data.size());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = data.row(i * data.size() / n);
    total += static_cast<double>(cluster_scores(ctx.evaluate(row).scores, ctx.epsilon).k());
  }
  return total / static_cast<double>(n);
}

/// Timed global/local search for instances that maximise the number of
/// counterfactual score clusters.
inline SearchReport run_search(const Network& net, const Dataset& data, const AttributeSchema& schema,
                               const SearchConfig& cfg) {
  if (!(cfg.timeout_seconds > 0)) throw ConfigError("search timeout must be positive");
  if (net.empty()) throw ConfigError("search needs a trained network");
  if (net.input_size() != schema.size())
    throw ShapeError("network expects " + std::to_string(net.input_size()) + " inputs, schema has " +
                     std::to_string(schema.size()) + " attributes");
  if (net.output_size() < 2) throw ShapeError("search needs a classifier with at least two classes");
  if (data.empty()) throw ConfigError("search needs a non-empty dataset");
  if (cfg.max_global == 0 || cfg.global_step <= 0 || cfg.local_step <= 0 || cfg.workers == 0)
    throw ConfigError("max_global, step sizes and workers must be positive");

  const auto start = SearchSink::Clock::now();
  const auto deadline = start + std::chrono::duration_cast<SearchSink::Clock::duration>(
                                    std::chrono::duration<double>(cfg.timeout_seconds));
  const SearchContext ctx(net, schema, cfg.epsilon);
  const auto groups = kmeans_partition(data, schema, std::min(cfg.partitions, data.size()), cfg.seed);
  const double k_initial = initial_cluster_count(ctx, data);
  SearchSink sink(schema, ctx.favorable_label, start);
  std::atomic<std::size_t> seeds_taken{0};

  auto timed_out = [&] { return SearchSink::Clock::now() >= deadline; };

  auto worker = [&](std::size_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(id)};
    Rng rng(seq);
    while (!timed_out()) {
      if (cfg.max_seeds && seeds_taken.fetch_add(1) >= *cfg.max_seeds) break;
      sink.count_seed();
      Instance x = data.instance(pick_seed(groups, rng));
      std::size_t k = 1;
      double best_delta = 0.0;
      for (std::size_t i = 0; i < cfg.max_global && !timed_out(); ++i) {
        auto step = global_step(ctx, x, cfg.global_step, k, best_delta, rng);
        sink.record(x, step.outcome, step.partition, Phase::kGlobal);
        if (step.enter_local)
          local_search(ctx, x, cfg.local_step, cfg.max_local, rng, sink, timed_out, cfg.constraint);
        const auto k_now = step.partition.k();
        const double d_now = delta(step.partition);
        if (k_now > k) {
          k = k_now;
          best_delta = d_now;
        } else if (k_now == k) {
          best_delta = std::max(best_delta, d_now);
        }
        if (std::all_of(step.direction.begin(), step.direction.end(), [](int v) { return v == 0; })) break;
        if (cfg.constraint && !cfg.constraint(step.next)) break;
        x = std::move(step.next);
      }
    }
  };

  if (cfg.workers == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < cfg.workers; ++w) pool.emplace_back(worker, w);
  }

  SearchReport report = sink.take();
  report.elapsed = sink.seconds();
  report.m = ctx.space.size();
  report.k_initial = k_initial;
  report.q_inf = std::log2(static_cast<double>(report.k_max));
  report.q_max = qid_max(ctx.space.size(), cfg.epsilon);
  for (const auto& tc : report.test_cases)
    if (tc.k == report.k_max) report.q_shannon = std::max(report.q_shannon, tc.q_shannon);
  std::map<std::size_t, std::size_t, std::greater<>> levels;
  for (const auto& tc : report.test_cases) ++levels[tc.k];
  for (const auto& [k, count] : levels) {
    if (report.severity.size() == 3) break;
    report.severity.push_back({k, count});
  }
  report.local_success_rate = report.local_samples == 0
                                  ? 0.0
                                  : static_cast<double>(report.id_instances.size()) /
                                        static_cast<double>(report.local_samples);
  return report;
}

}  // namespace qidfair

#endif  // QIDFAIR_SEARCH_HPP
