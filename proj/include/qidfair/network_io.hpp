#ifndef QIDFAIR_NETWORK_IO_HPP
#define QIDFAIR_NETWORK_IO_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qidfair/error.hpp"
#include "qidfair/network.hpp"

namespace qidfair {

inline constexpr const char* kNetworkFormat = "qidfair.network";
inline constexpr int kNetworkFormatVersion = 1;

// Weight file layout (JSON):
//   format, format_version, layer_dims,
//   input_offset / input_scale (optional, length layer_dims[0]),
//   layers: [{rows, cols, weights: row-major rows*cols, bias: rows}]
// Doubles are written in shortest round-trip form, so save/load is exact.

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = kNetworkFormat;
  j["format_version"] = kNetworkFormatVersion;
  j["layer_dims"] = net.layer_dims();
  if (!net.scaling().identity()) {
    const auto& s = net.scaling();
    j["input_offset"] = std::vector<double>(s.offset.data(), s.offset.data() + s.offset.size());
    j["input_scale"] = std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size());
  }
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return j;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline std::vector<double> read_doubles(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError("field '" + field + "' contains a non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::size_t read_count(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() <= 0)
    throw ParseError("field '" + field + "' must be a positive integer");
  return j.get<std::size_t>();
}

}  // namespace detail

inline Network network_from_json(const nlohmann::json& j) {
  using detail::require;
  if (require(j, "format", "network").get<std::string>() != kNetworkFormat)
    throw ParseError("field 'format' is not '" + std::string(kNetworkFormat) + "'");
  const auto& version = require(j, "format_version", "network");
  if (!version.is_number_integer() || version.get<int>() != kNetworkFormatVersion)
    throw ParseError("field 'format_version': unsupported version");

  const auto& dims_j = require(j, "layer_dims", "network");
  if (!dims_j.is_array() || dims_j.size() < 2) throw ParseError("field 'layer_dims' must list at least two widths");
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < dims_j.size(); ++i)
    dims.push_back(detail::read_count(dims_j[i], "layer_dims[" + std::to_string(i) + "]"));

  const auto& layers_j = require(j, "layers", "network");
  if (!layers_j.is_array()) throw ParseError("field 'layers' must be an array");
  if (layers_j.size() + 1 != dims.size())
    throw ShapeError("declared layer_dims imply " + std::to_string(dims.size() - 1) + " layers, file has " +
                     std::to_string(layers_j.size()));

  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < layers_j.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    const auto& lj = layers_j[i];
    const std::size_t rows = detail::read_count(require(lj, "rows", where), where + ".rows");
    const std::size_t cols = detail::read_count(require(lj, "cols", where), where + ".cols");
    if (rows != dims[i + 1] || cols != dims[i])
      throw ShapeError(where + " is " + std::to_string(rows) + "x" + std::to_string(cols) + " but layer_dims declare " +
                       std::to_string(dims[i + 1]) + "x" + std::to_string(dims[i]));
    const auto w = detail::read_doubles(require(lj, "weights", where), where + ".weights");
    const auto b = detail::read_doubles(require(lj, "bias", where), where + ".bias");
    if (w.size() != rows * cols)
      throw ShapeError(where + ".weights has " + std::to_string(w.size()) + " entries, expected " +
                       std::to_string(rows * cols));
    if (b.size() != rows)
      throw ShapeError(where + ".bias has " + std::to_string(b.size()) + " entries, expected " + std::to_string(rows));
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c)
        layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * cols + c];
      layer.bias[static_cast<Eigen::Index>(r)] = b[r];
    }
    layers.push_back(std::move(layer));
  }

  InputScaling scaling;
  if (j.contains("input_offset") || j.contains("input_scale")) {
    const auto off = detail::read_doubles(require(j, "input_offset", "network"), "input_offset");
    const auto sc = detail::read_doubles(require(j, "input_scale", "network"), "input_scale");
    if (off.size() != dims.front() || sc.size() != dims.front())
      throw ShapeError("input_offset/input_scale must have " + std::to_string(dims.front()) + " entries");
    scaling.offset = Eigen::Map<const Eigen::VectorXd>(off.data(), static_cast<Eigen::Index>(off.size()));
    scaling.scale = Eigen::Map<const Eigen::VectorXd>(sc.data(), static_cast<Eigen::Index>(sc.size()));
  }
  return Network(std::move(layers), std::move(scaling));
}

inline void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << network_to_json(net).dump(1) << '\n';
  if (!out) throw Error("failed writing model file " + path.string());
}

inline Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read model file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return network_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file " + path.string() + ": " + e.what());
  }
}

}  // namespace qidfair

#endif  // QIDFAIR_NETWORK_IO_HPP
