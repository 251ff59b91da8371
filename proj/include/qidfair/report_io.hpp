#ifndef QIDFAIR_REPORT_IO_HPP
#define QIDFAIR_REPORT_IO_HPP

// Versioned output files. Every JSON report has the layout
//   {format, format_version, config, payload, timing}
// where only `timing` holds wall-clock values, so two runs with the same seed
// can be compared on `payload` alone.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qidfair/dataset.hpp"
#include "qidfair/debug.hpp"
#include "qidfair/error.hpp"
#include "qidfair/search.hpp"

namespace qidfair {

inline constexpr int kReportFormatVersion = 1;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return {buf, end};
}

inline nlohmann::json make_document(const std::string& format, nlohmann::json config, nlohmann::json payload,
                                    nlohmann::json timing) {
  return {{"format", format},
          {"format_version", kReportFormatVersion},
          {"config", std::move(config)},
          {"payload", std::move(payload)},
          {"timing", std::move(timing)}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what());
  }
}

/// Reads a report written by make_document and checks its format tag.
inline nlohmann::json read_document(const std::filesystem::path& path, const std::string& format) {
  auto doc = read_json(path);
  if (!doc.is_object() || doc.value("format", "") != format)
    throw ParseError(path.string() + " is not a " + format + " file");
  if (doc.value("format_version", 0) != kReportFormatVersion)
    throw ParseError(path.string() + ": unsupported format_version");
  if (!doc.contains("payload")) throw ParseError(path.string() + ": missing payload");
  return doc;
}

// ---- test cases -----------------------------------------------------------

inline constexpr const char* kTestCaseFormat = "qidfair.testcases";

/// CSV with a two-line comment header (format tag, config snapshot), then
/// id, phase, wall_time, k, q_inf, q_shannon, delta and one column per
/// attribute.
inline void write_test_cases(std::ostream& out, const AttributeSchema& schema, const std::vector<TestCase>& cases,
                             const nlohmann::json& config) {
  out << "# " << kTestCaseFormat << " format_version " << kReportFormatVersion << '\n';
  out << "# config " << config.dump() << '\n';
  out << "id,phase,wall_time,k,q_inf,q_shannon,delta";
  for (const auto& a : schema.attributes()) out << ',' << a.name;
  out << '\n';
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& tc = cases[i];
    out << i << ',' << phase_name(tc.phase) << ',' << format_double(tc.wall_time) << ',' << tc.k << ','
        << format_double(tc.q_inf) << ',' << format_double(tc.q_shannon) << ',' << format_double(tc.delta);
    for (int v : tc.x) out << ',' << v;
    out << '\n';
  }
}

inline void save_test_cases(const std::filesystem::path& path, const AttributeSchema& schema,
                            const std::vector<TestCase>& cases, const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_test_cases(out, schema, cases, config);
}

namespace detail {

inline double parse_double_cell(const std::string& cell, std::size_t line, const std::string& column) {
  double v = 0;
  auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size())
    throw ParseError("line " + std::to_string(line) + ", column '" + column + "': not a number: '" + cell + "'");
  return v;
}

}  // namespace detail

inline std::vector<TestCase> read_test_cases(std::istream& in, const AttributeSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  bool tagged = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#", 0) == 0) {
      if (line.find(kTestCaseFormat) != std::string::npos) tagged = true;
      continue;
    }
    header = detail::split_csv_line(line);
    break;
  }
  if (!tagged) throw ParseError("not a test-case file (missing format header)");
  const std::vector<std::string> fixed{"id", "phase", "wall_time", "k", "q_inf", "q_shannon", "delta"};
  if (header.size() != fixed.size() + schema.size())
    throw ParseError("test-case header has " + std::to_string(header.size()) + " columns, expected " +
                     std::to_string(fixed.size() + schema.size()));
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& want = c < fixed.size() ? fixed[c] : schema.attribute(c - fixed.size()).name;
    if (header[c] != want) throw ParseError("test-case column " + std::to_string(c + 1) + " is '" + header[c] +
                                            "', expected '" + want + "'");
  }

  std::vector<TestCase> cases;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " cells");
    TestCase tc;
    if (cells[1] == "global")
      tc.phase = Phase::kGlobal;
    else if (cells[1] == "local")
      tc.phase = Phase::kLocal;
    else
      throw ParseError("line " + std::to_string(line_no) + ": unknown phase '" + cells[1] + "'");
    tc.wall_time = detail::parse_double_cell(cells[2], line_no, "wall_time");
    const int k = detail::parse_int_cell(cells[3], line_no, "k");
    if (k < 1) throw ParseError("line " + std::to_string(line_no) + ": k must be positive");
    tc.k = static_cast<std::size_t>(k);
    tc.q_inf = detail::parse_double_cell(cells[4], line_no, "q_inf");
    tc.q_shannon = detail::parse_double_cell(cells[5], line_no, "q_shannon");
    tc.delta = detail::parse_double_cell(cells[6], line_no, "delta");
    for (std::size_t c = fixed.size(); c < cells.size(); ++c)
      tc.x.push_back(detail::parse_int_cell(cells[c], line_no, header[c]));
    if (!schema.contains(tc.x)) throw RangeError("line " + std::to_string(line_no) + ": value outside schema domain");
    cases.push_back(std::move(tc));
  }
  return cases;
}

inline std::vector<TestCase> load_test_cases(const std::filesystem::path& path, const AttributeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read test cases " + path.string());
  try {
    return read_test_cases(in, schema);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// ID instances: attribute columns plus the two disagreeing tuple indices.
inline void save_id_instances(const std::filesystem::path& path, const AttributeSchema& schema,
                              const std::vector<IdRecord>& ids, const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# qidfair.ids format_version " << kReportFormatVersion << '\n';
  out << "# config " << config.dump() << '\n';
  out << "id,wall_time,unfavorable_tuple,favorable_tuple";
  for (const auto& a : schema.attributes()) out << ',' << a.name;
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << i << ',' << format_double(ids[i].wall_time) << ',' << ids[i].unfavorable_tuple << ','
        << ids[i].favorable_tuple;
    for (int v : ids[i].x) out << ',' << v;
    out << '\n';
  }
}

// ---- search ---------------------------------------------------------------

inline constexpr const char* kSearchFormat = "qidfair.search";

inline nlohmann::json search_payload(const SearchReport& r) {
  nlohmann::json severity = nlohmann::json::array();
  for (const auto& s : r.severity) severity.push_back({{"k", s.k}, {"count", s.count}});
  return {{"m", r.m},
          {"k_initial", r.k_initial},
          {"k_final", r.k_max},
          {"q_inf", r.q_inf},
          {"q_shannon", r.q_shannon},
          {"q_max", r.q_max},
          {"test_cases", r.test_cases.size()},
          {"id_instances", r.id_instances.size()},
          {"seeds", r.seeds},
          {"global_samples", r.global_samples},
          {"local_samples", r.local_samples},
          {"local_success_rate", r.local_success_rate},
          {"severity", severity}};
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json search_timing(const SearchReport& r) {
  return {{"elapsed_seconds", r.elapsed},
          {"time_to_k_final", r.time_to_k_max},
          {"time_first_id", optional_json(r.time_first_id)},
          {"time_1000th_id", optional_json(r.time_1000th_id)}};
}

/// Mean and mean absolute deviation of each numeric field across runs.
inline nlohmann::json summarize_runs(const std::vector<nlohmann::json>& runs) {
  nlohmann::json out = nlohmann::json::object();
  if (runs.empty()) return out;
  for (const auto& [key, value] : runs.front().items()) {
    if (!value.is_number()) continue;
    std::vector<double> xs;
    for (const auto& r : runs)
      if (r.contains(key) && r[key].is_number()) xs.push_back(r[key].get<double>());
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double dev = 0;
    for (double x : xs) dev += std::abs(x - mean);
    dev /= static_cast<double>(xs.size());
    out[key] = {{"mean", mean}, {"deviation", dev}, {"runs", xs.size()}};
  }
  return out;
}

// ---- localization / mitigation ---------------------------------------------

inline constexpr const char* kLocalizationFormat = "qidfair.localization";
inline constexpr const char* kMitigationFormat = "qidfair.mitigation";

inline nlohmann::json acd_json(const AcdResult& r) {
  return {{"neuron", r.neuron},
          {"acd", r.acd},
          {"acd_bits", r.acd_bits},
          {"effect", effect_name(r.effect)},
          {"activated_value", r.activated_value},
          {"deactivated_value", r.deactivated_value},
          {"mean_k_activated", r.mean_k_activated},
          {"mean_k_deactivated", r.mean_k_deactivated}};
}

inline nlohmann::json localization_payload(const Localization& loc) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 1; l < loc.sensitivity.delta.size(); ++l)
    layers.push_back({{"layer", l}, {"delta", loc.sensitivity.delta[l]}, {"rho", loc.sensitivity.rho[l]}});
  auto top = [](const std::vector<std::optional<AcdResult>>& list) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : list) a.push_back(r ? acd_json(*r) : nlohmann::json("N/A"));
    return a;
  };
  nlohmann::json neurons = nlohmann::json::array();
  for (const auto& c : loc.candidates.neurons) {
    nlohmann::json n = {{"neuron", c.neuron},
                        {"min", c.min},
                        {"max", c.max},
                        {"mean", c.mean},
                        {"stddev", c.stddev},
                        {"admissible", c.admissible},
                        {"skipped", c.skipped()}};
    n["activated_value"] = optional_json(c.activated);
    n["deactivated_value"] = optional_json(c.deactivated);
    for (const auto& r : loc.results)
      if (r.neuron == c.neuron) n["acd"] = acd_json(r);
    neurons.push_back(std::move(n));
  }
  return {{"layer", loc.layer},
          {"influence", loc.influence},
          {"layers", layers},
          {"baseline_accuracy", loc.baseline_accuracy},
          {"baseline_k", loc.baseline_k},
          {"inputs", loc.inputs},
          {"positive", top(loc.positive)},
          {"negative", top(loc.negative)},
          {"skipped", loc.skipped},
          {"neurons", neurons}};
}

inline nlohmann::json mitigation_json(const MitigationResult& r) {
  return {{"layer", r.intervention.layer},
          {"neuron", r.intervention.neuron},
          {"value", r.intervention.value},
          {"accuracy_before", r.accuracy_before},
          {"accuracy_after", r.accuracy_after},
          {"k_before", r.k_before},
          {"k_after", r.k_after},
          {"k_reduction", r.k_before > 0 ? (r.k_before - r.k_after) / r.k_before : 0.0},
          {"inputs", r.inputs}};
}

}  // namespace qidfair

#endif  // QIDFAIR_REPORT_IO_HPP
