#ifndef QIDFAIR_PIPELINE_HPP
#define QIDFAIR_PIPELINE_HPP

// train -> search -> localize -> mitigate -> report, driven by one RunConfig.
// The CLI is a thin wrapper over these functions.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/debug.hpp"
#include "qidfair/error.hpp"
#include "qidfair/network_io.hpp"
#include "qidfair/report_io.hpp"
#include "qidfair/search.hpp"
#include "qidfair/synthetic.hpp"
#include "qidfair/training.hpp"

namespace qidfair {

inline constexpr const char* kOutputDirEnv = "QIDFAIR_OUTPUT_DIR";

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path schema;
  std::filesystem::path model;       // default: <output_dir>/model.json
  std::filesystem::path output_dir = "qidfair-out";
  std::filesystem::path test_cases;  // default: <output_dir>/testcases.csv
  std::filesystem::path eval_test_cases;  // mitigation inputs; default: test_cases
  std::filesystem::path localization;     // default: <output_dir>/localization.json
  TrainConfig train;
  SearchConfig search;
  DebugConfig debug;
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  std::string mode = "deactivate";  // activate | deactivate | both
  std::optional<std::size_t> layer;
  std::optional<std::size_t> neuron;
  std::optional<double> value;

  std::filesystem::path model_path() const { return model.empty() ? output_dir / "model.json" : model; }
  std::filesystem::path test_case_path() const {
    return test_cases.empty() ? output_dir / "testcases.csv" : test_cases;
  }
  std::filesystem::path eval_path() const { return eval_test_cases.empty() ? test_case_path() : eval_test_cases; }
  std::filesystem::path localization_path() const {
    return localization.empty() ? output_dir / "localization.json" : localization;
  }
};

/// Search timeouts: desk (60 s), rq2 (15 min), rq1 (1 h).
inline void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "desk")
    cfg.search.timeout_seconds = 60;
  else if (preset == "rq2")
    cfg.search.timeout_seconds = 900;
  else if (preset == "rq1")
    cfg.search.timeout_seconds = 3600;
  else
    throw ConfigError("unknown preset '" + preset + "' (expected desk, rq2 or rq1)");
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json search = {{"partitions", c.search.partitions},   {"max_global", c.search.max_global},
                           {"max_local", c.search.max_local},     {"epsilon", c.search.epsilon},
                           {"global_step", c.search.global_step}, {"local_step", c.search.local_step},
                           {"timeout_seconds", c.search.timeout_seconds},
                           {"workers", c.search.workers}};
  search["max_seeds"] = c.search.max_seeds ? nlohmann::json(*c.search.max_seeds) : nlohmann::json(nullptr);
  nlohmann::json j = {
      {"dataset", c.dataset.string()},
      {"schema", c.schema.string()},
      {"model", c.model_path().string()},
      {"output_dir", c.output_dir.string()},
      {"test_cases", c.test_case_path().string()},
      {"eval_test_cases", c.eval_path().string()},
      {"localization", c.localization_path().string()},
      {"seed", c.seed},
      {"repeats", c.repeats},
      {"mode", c.mode},
      {"train",
       {{"hidden", c.train.hidden},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate}}},
      {"search", search},
      {"debug",
       {{"layer_epsilon", c.debug.layer_epsilon},
        {"accuracy_tolerance", c.debug.accuracy_tolerance},
        {"top_k", c.debug.top_k},
        {"max_inputs", c.debug.max_inputs},
        {"workers", c.debug.workers}}},
  };
  j["layer"] = c.layer ? nlohmann::json(*c.layer) : nlohmann::json(nullptr);
  j["neuron"] = c.neuron ? nlohmann::json(*c.neuron) : nlohmann::json(nullptr);
  j["value"] = c.value ? nlohmann::json(*c.value) : nlohmann::json(nullptr);
  return j;
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& obj, const std::string& key, T& out, const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + where + key + "' has the wrong type");
  }
}

template <class T>
void read_optional(const nlohmann::json& obj, const std::string& key, std::optional<T>& out,
                   const std::string& where) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  T v{};
  read_field(obj, key, v, where);
  out = v;
}

inline void read_path(const nlohmann::json& obj, const std::string& key, std::filesystem::path& out) {
  std::string s;
  read_field(obj, key, s, "");
  if (!s.empty()) out = s;
}

inline void reject_unknown(const nlohmann::json& obj, const std::vector<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config field '" + where + key + "'");
}

}  // namespace detail

/// Overlays the fields present in `j` onto `cfg`. Relative paths are taken
/// relative to `base`.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j,
                         {"dataset", "schema", "model", "output_dir", "test_cases", "eval_test_cases", "localization",
                          "seed", "repeats", "mode", "layer", "neuron", "value", "preset", "train", "search", "debug"},
                         "");
  auto path = [&](const std::string& key, std::filesystem::path& out) {
    std::filesystem::path p;
    detail::read_path(j, key, p);
    if (!p.empty()) out = p.is_relative() && !base.empty() ? base / p : p;
  };
  path("dataset", cfg.dataset);
  path("schema", cfg.schema);
  path("model", cfg.model);
  path("output_dir", cfg.output_dir);
  path("test_cases", cfg.test_cases);
  path("eval_test_cases", cfg.eval_test_cases);
  path("localization", cfg.localization);
  detail::read_field(j, "seed", cfg.seed, "");
  detail::read_field(j, "repeats", cfg.repeats, "");
  detail::read_field(j, "mode", cfg.mode, "");
  detail::read_optional(j, "layer", cfg.layer, "");
  detail::read_optional(j, "neuron", cfg.neuron, "");
  detail::read_optional(j, "value", cfg.value, "");
  if (j.contains("preset")) apply_preset(cfg, j["preset"].get<std::string>());
  if (j.contains("train")) {
    const auto& t = j["train"];
    detail::reject_unknown(t, {"hidden", "epochs", "batch_size", "learning_rate"}, "train.");
    detail::read_field(t, "hidden", cfg.train.hidden, "train.");
    detail::read_field(t, "epochs", cfg.train.epochs, "train.");
    detail::read_field(t, "batch_size", cfg.train.batch_size, "train.");
    detail::read_field(t, "learning_rate", cfg.train.learning_rate, "train.");
  }
  if (j.contains("search")) {
    const auto& s = j["search"];
    detail::reject_unknown(s,
                           {"partitions", "max_global", "max_local", "epsilon", "global_step", "local_step",
                            "timeout_seconds", "max_seeds", "workers"},
                           "search.");
    detail::read_field(s, "partitions", cfg.search.partitions, "search.");
    detail::read_field(s, "max_global", cfg.search.max_global, "search.");
    detail::read_field(s, "max_local", cfg.search.max_local, "search.");
    detail::read_field(s, "epsilon", cfg.search.epsilon, "search.");
    detail::read_field(s, "global_step", cfg.search.global_step, "search.");
    detail::read_field(s, "local_step", cfg.search.local_step, "search.");
    detail::read_field(s, "timeout_seconds", cfg.search.timeout_seconds, "search.");
    detail::read_optional(s, "max_seeds", cfg.search.max_seeds, "search.");
    detail::read_field(s, "workers", cfg.search.workers, "search.");
  }
  if (j.contains("debug")) {
    const auto& d = j["debug"];
    detail::reject_unknown(d, {"layer_epsilon", "accuracy_tolerance", "top_k", "max_inputs", "workers"}, "debug.");
    detail::read_field(d, "layer_epsilon", cfg.debug.layer_epsilon, "debug.");
    detail::read_field(d, "accuracy_tolerance", cfg.debug.accuracy_tolerance, "debug.");
    detail::read_field(d, "top_k", cfg.debug.top_k, "debug.");
    detail::read_field(d, "max_inputs", cfg.debug.max_inputs, "debug.");
    detail::read_field(d, "workers", cfg.debug.workers, "debug.");
  }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  apply_config_json(cfg, read_json(path), path.parent_path());
}

/// QIDFAIR_OUTPUT_DIR, when set and non-empty, replaces the output directory.
inline void apply_environment(RunConfig& cfg) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) cfg.output_dir = dir;
}

inline void validate(const RunConfig& cfg) {
  if (cfg.repeats == 0) throw ConfigError("repeats must be at least 1");
  if (cfg.mode != "activate" && cfg.mode != "deactivate" && cfg.mode != "both")
    throw ConfigError("mode must be activate, deactivate or both");
  if (!(cfg.search.epsilon > 0 && cfg.search.epsilon < 1)) throw ConfigError("search.epsilon must be in (0, 1)");
  if (cfg.debug.top_k == 0) throw ConfigError("debug.top_k must be positive");
  if (cfg.debug.max_inputs == 0) throw ConfigError("debug.max_inputs must be positive");
  if (cfg.search.workers == 0 || cfg.debug.workers == 0) throw ConfigError("workers must be positive");
}

namespace detail {

inline const std::filesystem::path& require_path(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("no ") + what + " given");
  if (!std::filesystem::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  return p;
}

inline void ensure_output_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
}

struct Inputs {
  AttributeSchema schema;
  Dataset data;
};

inline Inputs load_inputs(const RunConfig& cfg) {
  Inputs in;
  in.schema = load_schema(require_path(cfg.schema, "schema file"));
  in.data = load_csv(require_path(cfg.dataset, "dataset"), in.schema);
  if (in.data.empty()) throw ConfigError("dataset " + cfg.dataset.string() + " has no rows");
  return in;
}

inline Network load_model(const RunConfig& cfg, const AttributeSchema& schema) {
  Network net = load_network(require_path(cfg.model_path(), "model file"));
  if (net.input_size() != schema.size())
    throw ShapeError("model expects " + std::to_string(net.input_size()) + " inputs, schema has " +
                     std::to_string(schema.size()) + " attributes");
  return net;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fixed(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

/// Trains the classifier, writes the model and train.json.
inline nlohmann::json cmd_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto in = detail::load_inputs(cfg);
  detail::ensure_output_dir(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const auto result = train(in.data, in.schema, tc);
  save_network(result.net, cfg.model_path());
  const auto doc = make_document("qidfair.train", config_to_json(cfg),
                                 {{"accuracy", result.accuracy},
                                  {"final_loss", result.final_loss},
                                  {"rows", in.data.size()},
                                  {"layer_dims", result.net.layer_dims()},
                                  {"model", cfg.model_path().string()}},
                                 {{"seconds", detail::seconds_since(t0)}});
  write_json(cfg.output_dir / "train.json", doc);
  log << "accuracy " << detail::fixed(result.accuracy, 4) << " (" << in.data.size() << " rows, model "
      << cfg.model_path().string() << ")\n";
  return doc;
}

/// Runs the search `repeats` times. Run 1 writes testcases.csv, ids.csv and
/// search.json; with repeats > 1 every run also gets suffixed copies and
/// search_summary.json holds the mean and deviation of each metric.
inline nlohmann::json cmd_search(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto in = detail::load_inputs(cfg);
  const Network net = detail::load_model(cfg, in.schema);
  detail::ensure_output_dir(cfg);
  const auto config = config_to_json(cfg);

  std::vector<nlohmann::json> payloads, timings;
  nlohmann::json first;
  for (std::size_t run = 0; run < cfg.repeats; ++run) {
    SearchConfig sc = cfg.search;
    sc.seed = cfg.seed + run;
    const auto report = run_search(net, in.data, in.schema, sc);
    auto doc = make_document(kSearchFormat, config, search_payload(report), search_timing(report));
    doc["payload"]["run"] = run + 1;
    payloads.push_back(doc["payload"]);
    timings.push_back(doc["timing"]);

    const std::string suffix = cfg.repeats > 1 ? ".run" + std::to_string(run + 1) : "";
    if (run == 0) {
      save_test_cases(cfg.test_case_path(), in.schema, report.test_cases, config);
      save_id_instances(cfg.output_dir / "ids.csv", in.schema, report.id_instances, config);
      write_json(cfg.output_dir / "search.json", doc);
      first = doc;
    }
    if (cfg.repeats > 1) {
      save_test_cases(cfg.output_dir / ("testcases" + suffix + ".csv"), in.schema, report.test_cases, config);
      write_json(cfg.output_dir / ("search" + suffix + ".json"), doc);
    }

    log << "run " << run + 1 << ": K_I " << detail::fixed(report.k_initial, 2) << "  K_F " << report.k_max
        << "  Q_inf " << detail::fixed(report.q_inf, 2) << "  Q_1 " << detail::fixed(report.q_shannon, 2)
        << "  Q_max " << detail::fixed(report.q_max, 2) << "  #I " << report.id_instances.size() << "  #T "
        << report.test_cases.size() << "  l_s " << detail::fixed(100 * report.local_success_rate, 2) << "%\n";
    log << "  severity:";
    for (const auto& s : report.severity) log << "  k=" << s.k << " (" << s.count << ")";
    log << '\n';
  }
  if (cfg.repeats == 1) return first;

  auto summary = make_document("qidfair.search_summary", config, summarize_runs(payloads), summarize_runs(timings));
  write_json(cfg.output_dir / "search_summary.json", summary);
  log << "mean over " << cfg.repeats << " runs:";
  for (const char* key : {"k_initial", "k_final", "q_inf", "q_shannon", "id_instances"}) {
    const auto& e = summary["payload"][key];
    log << "  " << key << " " << detail::fixed(e["mean"].get<double>(), 2) << " ("
        << detail::fixed(e["deviation"].get<double>(), 2) << ")";
  }
  log << '\n';
  return summary;
}

/// Chooses the layer and ranks its neurons by ACD; writes localization.json.
inline nlohmann::json cmd_localize(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto in = detail::load_inputs(cfg);
  const Network net = detail::load_model(cfg, in.schema);
  const auto cases = load_test_cases(detail::require_path(cfg.test_case_path(), "test-case file"), in.schema);
  if (cases.empty()) throw ConfigError("test-case file " + cfg.test_case_path().string() + " is empty");
  detail::ensure_output_dir(cfg);

  DebugConfig dc = cfg.debug;
  dc.epsilon = cfg.search.epsilon;
  const auto inputs = select_debug_inputs(cases, dc.max_inputs);
  const auto loc = localize(net, inputs, in.data, in.schema, dc);
  const auto doc =
      make_document(kLocalizationFormat, config_to_json(cfg), localization_payload(loc),
                    {{"seconds", detail::seconds_since(t0)}});
  write_json(cfg.localization_path(), doc);

  log << "layer " << loc.layer << "  influence " << detail::fixed(loc.influence, 3) << "  inputs " << loc.inputs
      << "  baseline K " << detail::fixed(loc.baseline_k, 3) << '\n';
  auto print = [&](const char* title, const std::vector<std::optional<AcdResult>>& list) {
    log << title;
    for (const auto& r : list) {
      if (r)
        log << "  N" << r->neuron << " " << detail::fixed(r->acd, 3);
      else
        log << "  N/A";
    }
    log << '\n';
  };
  print("positive:", loc.positive);
  print("negative:", loc.negative);
  if (!loc.skipped.empty()) log << "skipped (no admissible value): " << loc.skipped.size() << " neurons\n";
  return doc;
}

namespace detail {

/// Intervention for one mode, from the localization payload and overrides.
inline Intervention pick_intervention(const RunConfig& cfg, const nlohmann::json& loc, const Network& net,
                                      bool activate) {
  const std::size_t layer = cfg.layer ? *cfg.layer : loc.at("layer").get<std::size_t>();
  if (layer < 1 || layer >= net.depth())
    throw ConfigError("layer " + std::to_string(layer) + " is not a hidden layer of the model");
  const char* value_key = activate ? "activated_value" : "deactivated_value";
  if (cfg.neuron) {
    if (*cfg.neuron >= net.width(layer))
      throw ConfigError("neuron " + std::to_string(*cfg.neuron) + " does not exist in layer " + std::to_string(layer) +
                        " (width " + std::to_string(net.width(layer)) + ")");
    if (cfg.value) return {layer, *cfg.neuron, *cfg.value};
    if (layer == loc.at("layer").get<std::size_t>())
      for (const auto& n : loc.at("neurons"))
        if (n.at("neuron").get<std::size_t>() == *cfg.neuron && !n.at(value_key).is_null())
          return {layer, *cfg.neuron, n.at(value_key).get<double>()};
    if (!activate) return {layer, *cfg.neuron, 0.0};
    throw ConfigError("neuron " + std::to_string(*cfg.neuron) + " has no admissible activation value; pass --value");
  }
  if (cfg.layer) throw ConfigError("--layer needs --neuron");
  for (const auto& entry : loc.at(activate ? "positive" : "negative")) {
    if (!entry.is_object()) continue;
    return {layer, entry.at("neuron").get<std::size_t>(),
            cfg.value ? *cfg.value : entry.at(value_key).get<double>()};
  }
  throw InadmissibleIntervention(std::string("no neuron with a ") + (activate ? "positive" : "negative") +
                                 " fairness effect to " + (activate ? "activate" : "deactivate"));
}

}  // namespace detail

/// Applies the deactivation and/or activation mitigation and reports
/// accuracy and mean cluster count before and after; writes mitigation.json.
inline nlohmann::json cmd_mitigate(const RunConfig& cfg, std::ostream& log) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto in = detail::load_inputs(cfg);
  const Network net = detail::load_model(cfg, in.schema);
  const auto loc = read_document(detail::require_path(cfg.localization_path(), "localization report"),
                                 kLocalizationFormat)["payload"];
  const auto cases = load_test_cases(detail::require_path(cfg.eval_path(), "evaluation test-case file"), in.schema);
  if (cases.empty()) throw ConfigError("evaluation test-case file " + cfg.eval_path().string() + " is empty");
  std::vector<Instance> inputs;
  for (const auto& tc : cases) inputs.push_back(tc.x);
  detail::ensure_output_dir(cfg);

  std::vector<std::pair<std::string, bool>> modes;
  if (cfg.mode != "activate") modes.emplace_back("deactivate", false);
  if (cfg.mode != "deactivate") modes.emplace_back("activate", true);

  nlohmann::json payload = nlohmann::json::object();
  std::optional<InadmissibleIntervention> failure;
  std::size_t applied = 0;
  for (const auto& [name, activate] : modes) {
    try {
      const auto iv = detail::pick_intervention(cfg, loc, net, activate);
      const auto r =
          mitigate(net, iv, in.data, inputs, in.schema, cfg.search.epsilon, cfg.debug.accuracy_tolerance);
      payload[name] = mitigation_json(r);
      ++applied;
      log << name << " N" << iv.neuron << " (layer " << iv.layer << ", value " << detail::fixed(iv.value, 4)
          << "):  A " << detail::fixed(r.accuracy_before, 4) << " -> " << detail::fixed(r.accuracy_after, 4)
          << "  K " << detail::fixed(r.k_before, 3) << " -> " << detail::fixed(r.k_after, 3) << '\n';
    } catch (const InadmissibleIntervention& e) {
      payload[name] = {{"error", e.what()}};
      failure = e;
      log << name << ": " << e.what() << '\n';
    }
  }
  const auto doc = make_document(kMitigationFormat, config_to_json(cfg), payload,
                                 {{"seconds", detail::seconds_since(t0)}});
  write_json(cfg.output_dir / "mitigation.json", doc);
  if (applied == 0 && failure) throw *failure;
  return doc;
}

/// Prints the reports found in the output directory.
inline nlohmann::json cmd_report(const RunConfig& cfg, std::ostream& log) {
  nlohmann::json all = nlohmann::json::object();
  auto section = [&](const char* file, const char* format) -> std::optional<nlohmann::json> {
    const auto p = cfg.output_dir / file;
    if (!std::filesystem::exists(p)) return std::nullopt;
    auto doc = read_document(p, format);
    all[file] = doc["payload"];
    return doc["payload"];
  };
  if (auto t = section("train.json", "qidfair.train"))
    log << "[train]     accuracy " << detail::fixed((*t)["accuracy"].get<double>(), 4) << '\n';
  if (auto s = section("search.json", kSearchFormat)) {
    log << "[search]    m " << (*s)["m"] << "  K_I " << detail::fixed((*s)["k_initial"].get<double>(), 2) << "  K_F "
        << (*s)["k_final"] << "  Q_inf " << detail::fixed((*s)["q_inf"].get<double>(), 2) << "  Q_1 "
        << detail::fixed((*s)["q_shannon"].get<double>(), 2) << "  Q_max "
        << detail::fixed((*s)["q_max"].get<double>(), 2) << "  #I " << (*s)["id_instances"] << '\n';
    log << "            severity";
    for (const auto& lvl : (*s)["severity"]) log << "  k=" << lvl["k"] << " (" << lvl["count"] << ")";
    log << '\n';
  }
  if (auto s = section("search_summary.json", "qidfair.search_summary")) {
    log << "[repeats]  ";
    for (const char* key : {"k_final", "q_inf", "q_shannon", "id_instances"})
      if (s->contains(key))
        log << "  " << key << " " << detail::fixed((*s)[key]["mean"].get<double>(), 2) << " ("
            << detail::fixed((*s)[key]["deviation"].get<double>(), 2) << ")";
    log << '\n';
  }
  if (std::filesystem::exists(cfg.localization_path())) {
    const auto l = read_document(cfg.localization_path(), kLocalizationFormat)["payload"];
    all["localization.json"] = l;
    log << "[localize]  layer " << l["layer"];
    for (const char* side : {"positive", "negative"}) {
      log << "  " << side << ":";
      for (const auto& e : l[side])
        log << (e.is_object() ? " N" + std::to_string(e["neuron"].get<std::size_t>()) + "=" +
                                    detail::fixed(e["acd"].get<double>(), 3)
                              : std::string(" N/A"));
    }
    log << '\n';
  }
  if (auto m = section("mitigation.json", kMitigationFormat)) {
    for (const auto& [mode, r] : m->items()) {
      if (r.contains("error")) {
        log << "[mitigate]  " << mode << ": " << r["error"].get<std::string>() << '\n';
        continue;
      }
      log << "[mitigate]  " << mode << " N" << r["neuron"] << "  A " << detail::fixed(r["accuracy_before"].get<double>(), 4)
          << " -> " << detail::fixed(r["accuracy_after"].get<double>(), 4) << "  K "
          << detail::fixed(r["k_before"].get<double>(), 3) << " -> " << detail::fixed(r["k_after"].get<double>(), 3)
          << '\n';
    }
  }
  if (all.empty()) throw ConfigError("no reports found in " + cfg.output_dir.string());
  return all;
}

/// Writes a generated dataset and schema ("census") or the two-path fixture
/// with its model ("fixture") into the output directory.
inline void cmd_synth(const RunConfig& cfg, const std::string& kind, std::size_t rows, std::ostream& log) {
  detail::ensure_output_dir(cfg);
  if (kind == "census") {
    save_schema(census_schema(), cfg.output_dir / "schema.json");
    save_csv(cfg.output_dir / "data.csv", census_schema(), make_census(rows, cfg.seed));
  } else if (kind == "fixture") {
    const auto f = two_path_fixture();
    save_schema(f.schema, cfg.output_dir / "schema.json");
    save_csv(cfg.output_dir / "data.csv", f.schema, f.data);
    save_network(f.net, cfg.model_path());
  } else {
    throw ConfigError("unknown synth kind '" + kind + "' (expected census or fixture)");
  }
  log << "wrote " << kind << " data to " << cfg.output_dir.string() << '\n';
}

}  // namespace qidfair

#endif  // QIDFAIR_PIPELINE_HPP
