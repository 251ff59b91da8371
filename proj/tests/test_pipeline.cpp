#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qidfair/pipeline.hpp"

using namespace qidfair;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("qidfair_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const std::string& env = "") {
  const auto dir = fs::temp_directory_path();
  const auto out = dir / "qidfair_cli_stdout.txt", err = dir / "qidfair_cli_stderr.txt";
  const std::string cmd = env + " " + std::string(QIDFAIR_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string common(const fs::path& d) {
  return "--dataset " + (d / "data.csv").string() + " --schema " + (d / "schema.json").string() + " --out " +
         d.string();
}

}  // namespace

TEST(Config, DefaultsMatchPublishedSettings) {
  const RunConfig c;
  EXPECT_EQ(c.search.max_global, 10u);
  EXPECT_EQ(c.search.max_local, 1000u);
  EXPECT_DOUBLE_EQ(c.search.epsilon, 0.025);
  EXPECT_DOUBLE_EQ(c.debug.layer_epsilon, 1e-7);
  EXPECT_DOUBLE_EQ(c.debug.accuracy_tolerance, 0.05);
  EXPECT_EQ(c.debug.top_k, 3u);
  EXPECT_EQ(c.train.hidden, (std::vector<std::size_t>{64, 32, 16, 8, 4}));
  EXPECT_DOUBLE_EQ(c.search.timeout_seconds, 60.0);
  EXPECT_EQ(c.search.workers, 1u);
}

TEST(Config, JsonOverlayAndPresets) {
  RunConfig c;
  apply_config_json(c, nlohmann::json::parse(R"({"seed": 7, "preset": "rq2", "dataset": "d.csv",
      "search": {"max_seeds": 4, "epsilon": 0.05}, "train": {"hidden": [8, 4]}, "debug": {"top_k": 2}})"),
                    "/base");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.search.timeout_seconds, 900.0);
  EXPECT_EQ(c.dataset, fs::path("/base/d.csv"));
  EXPECT_EQ(c.search.max_seeds, std::optional<std::size_t>(4));
  EXPECT_DOUBLE_EQ(c.search.epsilon, 0.05);
  EXPECT_EQ(c.train.hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(c.debug.top_k, 2u);
  apply_preset(c, "rq1");
  EXPECT_DOUBLE_EQ(c.search.timeout_seconds, 3600.0);
  EXPECT_THROW(apply_preset(c, "huge"), ConfigError);
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"search": {"epsilon": "x"}})")), ConfigError);
  // The snapshot round-trips through the overlay.
  RunConfig d;
  auto snap = config_to_json(c);
  apply_config_json(d, snap);
  EXPECT_EQ(config_to_json(d), snap);
}

TEST(Config, EnvironmentOverridesOutputDir) {
  RunConfig c;
  ::setenv(kOutputDirEnv, "/tmp/from-env", 1);
  apply_environment(c);
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(c.output_dir, fs::path("/tmp/from-env"));
}

TEST(TestCaseFile, RoundTrip) {
  const auto f = two_path_fixture();
  std::vector<TestCase> cases{{{4, 1, 2}, 3, std::log2(3.0), 1.5, 0.17, Phase::kGlobal, 0.25},
                              {{5, 0, 0}, 1, 0.0, 0.0, 0.0, Phase::kLocal, 1e-3}};
  std::stringstream s;
  write_test_cases(s, f.schema, cases, {{"seed", 1}});
  const auto back = read_test_cases(s, f.schema);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].x, cases[0].x);
  EXPECT_EQ(back[0].k, 3u);
  EXPECT_DOUBLE_EQ(back[0].q_inf, cases[0].q_inf);
  EXPECT_DOUBLE_EQ(back[1].wall_time, 1e-3);
  EXPECT_EQ(back[1].phase, Phase::kLocal);
  std::stringstream untagged("id,phase\n");
  EXPECT_THROW(read_test_cases(untagged, f.schema), ParseError);
}

TEST(Summary, MeanAndDeviation) {
  const auto s = summarize_runs({{{"k", 2}, {"name", "a"}}, {{"k", 4}}, {{"k", 6}}});
  EXPECT_DOUBLE_EQ(s["k"]["mean"].get<double>(), 4.0);
  EXPECT_DOUBLE_EQ(s["k"]["deviation"].get<double>(), 4.0 / 3);
  EXPECT_FALSE(s.contains("name"));
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("search --timeout abc").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, MissingSchemaNamesThePath) {
  const auto d = fresh_dir("missing");
  const auto r = cli("train --dataset " + (d / "data.csv").string() + " --schema " + (d / "nope.json").string() +
                     " --out " + d.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos);
}

TEST(Cli, TrainTwiceWithSameSeedGivesIdenticalModels) {
  const auto d = fresh_dir("train");
  ASSERT_EQ(cli("synth census --rows 200 --out " + d.string()).code, 0);
  const auto args = common(d) + " --epochs 5 --seed 7";
  const auto r1 = cli("train " + args + " --model " + (d / "a.json").string());
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.out.find("accuracy"), std::string::npos);
  ASSERT_EQ(cli("train " + args + " --model " + (d / "b.json").string()).code, 0);
  EXPECT_EQ(slurp(d / "a.json"), slurp(d / "b.json"));
  const auto net = load_network(d / "a.json");
  EXPECT_EQ(net.layer_dims(), (std::vector<std::size_t>{9, 64, 32, 16, 8, 4, 2}));
}

TEST(Cli, DatasetSchemaMismatchExitsTwo) {
  const auto d = fresh_dir("mismatch");
  ASSERT_EQ(cli("synth census --rows 50 --out " + d.string()).code, 0);
  const auto other = fresh_dir("mismatch_fixture");
  ASSERT_EQ(cli("synth fixture --out " + other.string()).code, 0);
  const auto r = cli("train --dataset " + (d / "data.csv").string() + " --schema " +
                     (other / "schema.json").string() + " --out " + d.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, FixturePipelineEndToEnd) {
  const auto d = fresh_dir("fixture");
  ASSERT_EQ(cli("synth fixture --out " + d.string()).code, 0);
  const auto args = common(d) + " --seed 3";
  const auto s = cli("search " + args + " --timeout 10 --max-seeds 20");
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("K_F"), std::string::npos);
  const auto report = read_document(d / "search.json", kSearchFormat);
  EXPECT_EQ(report["payload"]["m"], 4);
  EXPECT_GE(report["payload"]["k_final"].get<int>(), 2);
  EXPECT_TRUE(report["config"].contains("search"));
  EXPECT_EQ(slurp(d / "testcases.csv").rfind("# qidfair.testcases format_version 1", 0), 0u);

  const auto l = cli("localize " + args);
  ASSERT_EQ(l.code, 0) << l.err;
  const auto loc = read_document(d / "localization.json", kLocalizationFormat)["payload"];
  EXPECT_EQ(loc["layer"], 1);
  EXPECT_EQ(loc["negative"][0]["neuron"], 1);
  EXPECT_EQ(loc["positive"][0], "N/A");
  EXPECT_NE(l.out.find("N/A"), std::string::npos);

  const auto m = cli("mitigate " + args + " --mode both");
  ASSERT_EQ(m.code, 0) << m.err;
  const auto mit = read_document(d / "mitigation.json", kMitigationFormat)["payload"];
  EXPECT_LT(mit["deactivate"]["k_after"].get<double>(), mit["deactivate"]["k_before"].get<double>());
  EXPECT_TRUE(mit["activate"].contains("error"));

  EXPECT_EQ(cli("mitigate " + args + " --neuron 99").code, 2);
  EXPECT_EQ(cli("mitigate " + args + " --neuron 1 --layer 7").code, 2);
  const auto manual = cli("mitigate " + args + " --neuron 2");
  EXPECT_EQ(manual.code, 0) << manual.err;
  EXPECT_EQ(read_document(d / "mitigation.json", kMitigationFormat)["payload"]["deactivate"]["neuron"], 2);
  // Forcing the label path to zero costs half the accuracy.
  EXPECT_EQ(cli("mitigate " + args + " --neuron 0").code, 1);

  const auto rep = cli("report --out " + d.string());
  EXPECT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("[localize]"), std::string::npos);
}

TEST(Cli, EmptyTestCaseFileIsRejected) {
  const auto d = fresh_dir("empty_cases");
  ASSERT_EQ(cli("synth fixture --out " + d.string()).code, 0);
  {
    std::ofstream out(d / "testcases.csv");
    write_test_cases(out, two_path_fixture().schema, {}, nlohmann::json::object());
  }
  const auto r = cli("localize " + common(d));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("empty"), std::string::npos);
}

TEST(Cli, RepeatsWritePerRunFilesAndSummary) {
  const auto d = fresh_dir("repeats");
  ASSERT_EQ(cli("synth fixture --out " + d.string()).code, 0);
  const auto r = cli("search " + common(d) + " --timeout 5 --max-seeds 3 --repeats 3");
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 1; i <= 3; ++i) {
    EXPECT_TRUE(fs::exists(d / ("search.run" + std::to_string(i) + ".json")));
    EXPECT_TRUE(fs::exists(d / ("testcases.run" + std::to_string(i) + ".csv")));
  }
  const auto summary = read_document(d / "search_summary.json", "qidfair.search_summary");
  EXPECT_EQ(summary["payload"]["k_final"]["runs"], 3);
  EXPECT_TRUE(summary["payload"]["k_final"].contains("deviation"));
}

TEST(Cli, ConfigFileAndEnvironment) {
  const auto d = fresh_dir("config");
  ASSERT_EQ(cli("synth fixture --out " + d.string()).code, 0);
  const auto env_out = fresh_dir("config_env");
  {
    std::ofstream cfg(d / "run.json");
    cfg << R"({"dataset": "data.csv", "schema": "schema.json", "model": "model.json",
               "seed": 2, "search": {"timeout_seconds": 5, "max_seeds": 3}})";
  }
  const auto r = cli("search --config " + (d / "run.json").string(), std::string(kOutputDirEnv) + "=" + env_out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_out / "search.json"));
  const auto doc = read_document(env_out / "search.json", kSearchFormat);
  EXPECT_EQ(doc["config"]["seed"], 2);
  {
    std::ofstream cfg(d / "bad.json");
    cfg << R"({"datasett": "x"})";
  }
  EXPECT_EQ(cli("search --config " + (d / "bad.json").string()).code, 2);
}
