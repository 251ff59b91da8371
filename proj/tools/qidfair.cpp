// qidfair command-line front end.
//
//   qidfair train    --dataset d.csv --schema s.json [--out dir]
//   qidfair search   ... [--timeout 60 | --preset rq1] [--repeats 10]
//   qidfair localize ...
//   qidfair mitigate ... [--mode deactivate|activate|both] [--neuron j]
//   qidfair report   --out dir
//   qidfair synth    census|fixture --out dir
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "qidfair/pipeline.hpp"

namespace {

struct Flags {
  std::string config, dataset, schema, model, out, test_cases, eval_test_cases, localization, preset, mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> timeout, value;
  std::optional<std::size_t> repeats, workers, max_seeds, epochs, layer, neuron;
  std::string synth_kind = "census";
  std::size_t synth_rows = 2000;
};

qidfair::RunConfig resolve(const Flags& f) {
  qidfair::RunConfig cfg;
  if (!f.config.empty()) qidfair::load_config_file(cfg, f.config);
  qidfair::apply_environment(cfg);
  if (!f.dataset.empty()) cfg.dataset = f.dataset;
  if (!f.schema.empty()) cfg.schema = f.schema;
  if (!f.model.empty()) cfg.model = f.model;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.test_cases.empty()) cfg.test_cases = f.test_cases;
  if (!f.eval_test_cases.empty()) cfg.eval_test_cases = f.eval_test_cases;
  if (!f.localization.empty()) cfg.localization = f.localization;
  if (!f.preset.empty()) qidfair::apply_preset(cfg, f.preset);
  if (!f.mode.empty()) cfg.mode = f.mode;
  if (f.seed) cfg.seed = *f.seed;
  if (f.timeout) cfg.search.timeout_seconds = *f.timeout;
  if (f.repeats) cfg.repeats = *f.repeats;
  if (f.workers) cfg.search.workers = cfg.debug.workers = *f.workers;
  if (f.max_seeds) cfg.search.max_seeds = *f.max_seeds;
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.layer) cfg.layer = *f.layer;
  if (f.neuron) cfg.neuron = *f.neuron;
  if (f.value) cfg.value = *f.value;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantitative individual discrimination testing and causal debugging for tabular DNNs"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config, "JSON run configuration");
  app.add_option("--dataset", f.dataset, "dataset CSV");
  app.add_option("--schema", f.schema, "attribute schema JSON");
  app.add_option("--model", f.model, "model weights file (default <out>/model.json)");
  app.add_option("-o,--out", f.out, "output directory (overrides " + std::string(qidfair::kOutputDirEnv) + ")");
  app.add_option("--test-cases", f.test_cases, "test-case CSV (default <out>/testcases.csv)");
  app.add_option("--eval-test-cases", f.eval_test_cases, "test cases for mitigation (default --test-cases)");
  app.add_option("--localization", f.localization, "localization report (default <out>/localization.json)");
  app.add_option("--seed", f.seed, "global seed");
  app.add_option("--timeout", f.timeout, "search time budget in seconds");
  app.add_option("--preset", f.preset, "search budget preset")->check(CLI::IsMember({"desk", "rq2", "rq1"}));
  app.add_option("--repeats", f.repeats, "number of search runs to average");
  app.add_option("--workers", f.workers, "worker threads for search and ACD");
  app.add_option("--max-seeds", f.max_seeds, "stop the search after this many seeds");
  app.add_option("--epochs", f.epochs, "training epochs");
  app.add_option("--mode", f.mode, "mitigation mode")->check(CLI::IsMember({"activate", "deactivate", "both"}));
  app.add_option("--layer", f.layer, "mitigation layer (with --neuron)");
  app.add_option("--neuron", f.neuron, "mitigation neuron index");
  app.add_option("--value", f.value, "mitigation value");

  auto* train = app.add_subcommand("train", "train the classifier and save the model");
  auto* search = app.add_subcommand("search", "search for discriminatory test cases");
  auto* localize = app.add_subcommand("localize", "find the layer and neurons that drive discrimination");
  auto* mitigate = app.add_subcommand("mitigate", "apply a neuron intervention and measure its effect");
  auto* report = app.add_subcommand("report", "print the reports in the output directory");
  auto* synth = app.add_subcommand("synth", "write a generated dataset (census) or the two-path fixture");
  synth->add_option("kind", f.synth_kind, "census or fixture")->check(CLI::IsMember({"census", "fixture"}));
  synth->add_option("--rows", f.synth_rows, "rows for the census dataset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(f);
    if (train->parsed()) qidfair::cmd_train(cfg, std::cout);
    if (search->parsed()) qidfair::cmd_search(cfg, std::cout);
    if (localize->parsed()) qidfair::cmd_localize(cfg, std::cout);
    if (mitigate->parsed()) qidfair::cmd_mitigate(cfg, std::cout);
    if (report->parsed()) qidfair::cmd_report(cfg, std::cout);
    if (synth->parsed()) qidfair::cmd_synth(cfg, f.synth_kind, f.synth_rows, std::cout);
  } catch (const qidfair::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const qidfair::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const qidfair::RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const qidfair::ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
