#ifndef QIDFAIR_DATASET_HPP
#define QIDFAIR_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qidfair/error.hpp"

namespace qidfair {

/// A full attribute row in schema order (protected and non-protected).
using Instance = std::vector<int>;

/// Optional extra validity check on candidate instances (e.g. conditional
/// domain constraints). An empty function accepts everything.
using DomainConstraint = std::function<bool(std::span<const int>)>;

enum class AttributeKind { kOrdinal, kCategorical };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::kOrdinal;
  int lo = 0;
  int hi = 0;
  bool is_protected = false;

  std::size_t domain_size() const { return hi < lo ? 0 : static_cast<std::size_t>(hi - lo) + 1; }
  bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;

  explicit AttributeSchema(std::vector<Attribute> attributes, std::string label_name = "label",
                           int favorable_label = 1)
      : attributes_(std::move(attributes)), label_name_(std::move(label_name)), favorable_label_(favorable_label) {
    if (attributes_.empty()) throw ConfigError("schema has no attributes");
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
      const auto& a = attributes_[i];
      if (a.name.empty()) throw ConfigError("attribute " + std::to_string(i) + " has no name");
      if (a.lo > a.hi) throw ConfigError("attribute '" + a.name + "' has an empty range");
      if (seen[a.name]++) throw ConfigError("duplicate attribute '" + a.name + "'");
      (a.is_protected ? protected_ : non_protected_).push_back(i);
    }
    if (seen.count(label_name_)) throw ConfigError("label column '" + label_name_ + "' clashes with an attribute");
    if (protected_.empty()) throw ConfigError("schema needs at least one protected attribute");
    if (non_protected_.empty()) throw ConfigError("schema needs at least one non-protected attribute");
    if (favorable_label_ != 0 && favorable_label_ != 1) throw ConfigError("favorable label must be 0 or 1");
  }

  std::size_t size() const { return attributes_.size(); }
  const std::vector<Attribute>& attributes() const { return attributes_; }
  const Attribute& attribute(std::size_t i) const { return attributes_.at(i); }
  const std::vector<std::size_t>& protected_indices() const { return protected_; }
  const std::vector<std::size_t>& non_protected_indices() const { return non_protected_; }
  const std::string& label_name() const { return label_name_; }
  int favorable_label() const { return favorable_label_; }

  std::vector<bool> non_protected_mask() const {
    std::vector<bool> mask(attributes_.size(), false);
    for (auto i : non_protected_) mask[i] = true;
    return mask;
  }

  std::ptrdiff_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < attributes_.size(); ++i)
      if (attributes_[i].name == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  bool contains(std::span<const int> row) const {
    if (row.size() != attributes_.size()) return false;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] < attributes_[i].lo || row[i] > attributes_[i].hi) return false;
    return true;
  }

  /// Rounds every coordinate to the nearest integer and clamps it into its
  /// attribute's range.
  Instance clamp(std::span<const double> row) const {
    if (row.size() != attributes_.size())
      throw ShapeError("clamp: row has " + std::to_string(row.size()) + " values, schema has " +
                       std::to_string(attributes_.size()));
    Instance out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto& a = attributes_[i];
      const double v = std::isfinite(row[i]) ? std::round(row[i]) : (row[i] > 0 ? a.hi : a.lo);
      out[i] = static_cast<int>(std::clamp(v, static_cast<double>(a.lo), static_cast<double>(a.hi)));
    }
    return out;
  }

  Instance clamp(std::span<const int> row) const {
    std::vector<double> d(row.begin(), row.end());
    return clamp(std::span<const double>(d));
  }

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
  std::string label_name_ = "label";
  int favorable_label_ = 1;
  std::vector<std::size_t> protected_;
  std::vector<std::size_t> non_protected_;
};

/// The m protected-value tuples in lexicographic order (first protected
/// attribute most significant).
class ProtectedSpace {
 public:
  ProtectedSpace() = default;
  ProtectedSpace(std::vector<std::size_t> columns, std::vector<std::vector<int>> tuples)
      : columns_(std::move(columns)), tuples_(std::move(tuples)) {}

  std::size_t size() const { return tuples_.size(); }
  const std::vector<std::size_t>& columns() const { return columns_; }
  const std::vector<int>& tuple(std::size_t i) const { return tuples_.at(i); }
  const std::vector<std::vector<int>>& tuples() const { return tuples_; }

  /// Position of the row's protected values in the enumeration.
  std::size_t index_of(std::span<const int> row) const {
    for (std::size_t t = 0; t < tuples_.size(); ++t) {
      bool match = true;
      for (std::size_t c = 0; c < columns_.size() && match; ++c) match = row[columns_[c]] == tuples_[t][c];
      if (match) return t;
    }
    throw RangeError("row's protected values are outside the protected space");
  }

  /// Copy of `row` with its protected columns set to tuple `t`.
  Instance with_tuple(std::span<const int> row, std::size_t t) const {
    Instance out(row.begin(), row.end());
    const auto& tup = tuples_.at(t);
    for (std::size_t c = 0; c < columns_.size(); ++c) out[columns_[c]] = tup[c];
    return out;
  }

 private:
  std::vector<std::size_t> columns_;
  std::vector<std::vector<int>> tuples_;
};

inline ProtectedSpace enumerate_protected(const AttributeSchema& schema) {
  const auto& cols = schema.protected_indices();
  if (cols.empty()) throw ConfigError("schema has no protected attributes");
  std::size_t m = 1;
  for (auto c : cols) {
    const auto n = schema.attribute(c).domain_size();
    if (n == 0) throw ConfigError("protected attribute '" + schema.attribute(c).name + "' has an empty domain");
    m *= n;
  }
  std::vector<std::vector<int>> tuples;
  tuples.reserve(m);
  std::vector<int> cur;
  for (auto c : cols) cur.push_back(schema.attribute(c).lo);
  for (std::size_t i = 0; i < m; ++i) {
    tuples.push_back(cur);
    // Odometer increment, last column fastest.
    for (std::size_t k = cols.size(); k-- > 0;) {
      if (cur[k] < schema.attribute(cols[k]).hi) {
        ++cur[k];
        break;
      }
      cur[k] = schema.attribute(cols[k]).lo;
    }
  }
  return ProtectedSpace(cols, std::move(tuples));
}

/// All m counterfactuals of `x`: identical non-protected values, one row per
/// protected tuple in enumeration order. The protected values of `x` are
/// ignored.
inline std::vector<Instance> make_counterfactuals(std::span<const int> x, const ProtectedSpace& space) {
  std::vector<Instance> rows;
  rows.reserve(space.size());
  for (std::size_t t = 0; t < space.size(); ++t) rows.push_back(space.with_tuple(x, t));
  return rows;
}

/// Integer-coded table plus binary labels.
class Dataset {
 public:
  Dataset() = default;

  Dataset(const AttributeSchema& schema, const std::vector<Instance>& rows, std::vector<int> labels)
      : cols_(schema.size()), labels_(std::move(labels)) {
    if (rows.size() != labels_.size()) throw ShapeError("row count and label count differ");
    values_.reserve(rows.size() * cols_);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols_)
        throw ShapeError("row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) + " values, expected " +
                         std::to_string(cols_));
      for (std::size_t c = 0; c < cols_; ++c) {
        const auto& a = schema.attribute(c);
        if (rows[r][c] < a.lo || rows[r][c] > a.hi)
          throw RangeError("row " + std::to_string(r + 1) + ", column '" + a.name + "': value " +
                           std::to_string(rows[r][c]) + " outside [" + std::to_string(a.lo) + ", " +
                           std::to_string(a.hi) + "]");
      }
      if (labels_[r] != 0 && labels_[r] != 1)
        throw RangeError("row " + std::to_string(r + 1) + ": label must be 0 or 1");
      values_.insert(values_.end(), rows[r].begin(), rows[r].end());
    }
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t columns() const { return cols_; }
  std::span<const int> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  Instance instance(std::size_t i) const {
    auto r = row(i);
    return {r.begin(), r.end()};
  }
  int label(std::size_t i) const { return labels_.at(i); }
  const std::vector<int>& labels() const { return labels_; }

  /// Features as a (columns x rows) matrix, one sample per column.
  Eigen::MatrixXd feature_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(cols_), static_cast<Eigen::Index>(size()));
    for (std::size_t r = 0; r < size(); ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = values_[r * cols_ + c];
    return m;
  }

 private:
  std::size_t cols_ = 0;
  std::vector<int> values_;
  std::vector<int> labels_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline int parse_int_cell(const std::string& cell, std::size_t row, const std::string& column) {
  int v = 0;
  const auto* end = cell.data() + cell.size();
  const auto [p, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc{} || p != end)
    throw ParseError("row " + std::to_string(row) + ", column '" + column + "': '" + cell + "' is not an integer");
  return v;
}

}  // namespace detail

/// Reads a header-first CSV. Columns are matched to the schema by name; the
/// label column is `schema.label_name()`. Lines starting with '#' are skipped.
inline Dataset parse_csv(std::istream& in, const AttributeSchema& schema) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw ParseError("CSV is empty");
  } while (line.empty() || line[0] == '#');
  const auto header = detail::split_csv_line(line);

  std::vector<std::ptrdiff_t> target(header.size(), -2);  // -1 = label
  std::vector<bool> found(schema.size(), false);
  bool have_label = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.label_name()) {
      target[c] = -1;
      have_label = true;
      continue;
    }
    const auto idx = schema.index_of(header[c]);
    if (idx < 0) throw ParseError("unknown column '" + header[c] + "'");
    if (found[static_cast<std::size_t>(idx)]) throw ParseError("duplicate column '" + header[c] + "'");
    found[static_cast<std::size_t>(idx)] = true;
    target[c] = idx;
  }
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (!found[i]) throw ParseError("missing column '" + schema.attribute(i).name + "'");
  if (!have_label) throw ParseError("missing label column '" + schema.label_name() + "'");

  std::vector<Instance> rows;
  std::vector<int> labels;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    ++row_no;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    Instance r(schema.size());
    int label = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const int v = detail::parse_int_cell(cells[c], row_no, header[c]);
      if (target[c] == -1)
        label = v;
      else
        r[static_cast<std::size_t>(target[c])] = v;
    }
    rows.push_back(std::move(r));
    labels.push_back(label);
  }
  return Dataset(schema, rows, std::move(labels));
}

inline Dataset load_csv(const std::filesystem::path& path, const AttributeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  return parse_csv(in, schema);
}

inline void write_csv(std::ostream& out, const AttributeSchema& schema, const Dataset& data) {
  for (const auto& a : schema.attributes()) out << a.name << ',';
  out << schema.label_name() << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (int v : data.row(r)) out << v << ',';
    out << data.label(r) << '\n';
  }
}

inline void save_csv(const std::filesystem::path& path, const AttributeSchema& schema, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  write_csv(out, schema, data);
}

// Schema file (JSON):
//   {"format": "qidfair.schema", "format_version": 1, "label": "y",
//    "favorable_label": 1,
//    "attributes": [{"name": "age", "kind": "ordinal", "range": [0, 9],
//                    "protected": true}, ...]}

inline constexpr const char* kSchemaFormat = "qidfair.schema";
inline constexpr int kSchemaFormatVersion = 1;

inline nlohmann::json schema_to_json(const AttributeSchema& schema) {
  nlohmann::json j;
  j["format"] = kSchemaFormat;
  j["format_version"] = kSchemaFormatVersion;
  j["label"] = schema.label_name();
  j["favorable_label"] = schema.favorable_label();
  auto& attrs = j["attributes"] = nlohmann::json::array();
  for (const auto& a : schema.attributes())
    attrs.push_back({{"name", a.name},
                     {"kind", a.kind == AttributeKind::kOrdinal ? "ordinal" : "categorical"},
                     {"range", {a.lo, a.hi}},
                     {"protected", a.is_protected}});
  return j;
}

inline AttributeSchema schema_from_json(const nlohmann::json& j) {
  auto field = [](const nlohmann::json& obj, const std::string& key, const std::string& where) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    return obj.at(key);
  };
  try {
    if (field(j, "format", "schema").get<std::string>() != kSchemaFormat)
      throw ParseError("schema: field 'format' is not '" + std::string(kSchemaFormat) + "'");
    if (field(j, "format_version", "schema").get<int>() != kSchemaFormatVersion)
      throw ParseError("schema: unsupported format_version");
    std::vector<Attribute> attrs;
    const auto& list = field(j, "attributes", "schema");
    if (!list.is_array()) throw ParseError("schema: field 'attributes' must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "attributes[" + std::to_string(i) + "]";
      Attribute a;
      a.name = field(list[i], "name", where).get<std::string>();
      const auto kind = list[i].value("kind", std::string("ordinal"));
      if (kind == "ordinal")
        a.kind = AttributeKind::kOrdinal;
      else if (kind == "categorical")
        a.kind = AttributeKind::kCategorical;
      else
        throw ParseError(where + ": field 'kind' must be 'ordinal' or 'categorical'");
      const auto& range = field(list[i], "range", where);
      if (!range.is_array() || range.size() != 2) throw ParseError(where + ": field 'range' must be [lo, hi]");
      a.lo = range[0].get<int>();
      a.hi = range[1].get<int>();
      a.is_protected = list[i].value("protected", false);
      attrs.push_back(std::move(a));
    }
    return AttributeSchema(std::move(attrs), j.value("label", std::string("label")), j.value("favorable_label", 1));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
}

inline AttributeSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read schema file " + path.string());
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("schema file " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline void save_schema(const AttributeSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write schema file " + path.string());
  out << schema_to_json(schema).dump(2) << '\n';
}

}  // namespace qidfair

#endif  // QIDFAIR_DATASET_HPP
