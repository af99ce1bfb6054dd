#pragma once

// Network <-> JSON. Doubles are written as shortest round-trip decimals, so
// save/load is value-exact.

#include <string>
#include <vector>

#include "json.hpp"
#include "pvmppt/errors.hpp"
#include "pvmppt/io.hpp"
#include "pvmppt/nn.hpp"

namespace pvmppt {

inline constexpr const char* kModelFormat = "pvmppt-model";
inline constexpr int kModelVersion = 1;

/// Optional training summary stored next to the weights.
struct TrainingInfo {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;
  bool converged = false;
};

inline nlohmann::json model_to_json(const Network& net, const TrainingInfo* info = nullptr) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["layer_sizes"] = net.layer_sizes();
  auto acts = nlohmann::json::array();
  for (Activation a : net.activations()) acts.push_back(to_string(a));
  j["activations"] = acts;
  auto layers = nlohmann::json::array();
  const auto& sizes = net.layer_sizes();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    auto w = nlohmann::json::array();
    for (int r = 0; r < out; ++r) {
      auto row = nlohmann::json::array();
      for (int c = 0; c < in; ++c) row.push_back(net.weight(l, r, c));
      w.push_back(row);
    }
    auto b = nlohmann::json::array();
    for (int r = 0; r < out; ++r) b.push_back(net.bias(l, r));
    layers.push_back({{"weights", w}, {"biases", b}});
  }
  j["layers"] = layers;
  j["normalization"] = {{"g", {net.norm.g.lo, net.norm.g.hi}},
                        {"t", {net.norm.t.lo, net.norm.t.hi}},
                        {"p", {net.norm.p.lo, net.norm.p.hi}}};
  if (info) {
    j["training"] = {{"seed", info->seed},
                     {"epochs", info->epochs},
                     {"final_loss", info->final_loss},
                     {"converged", info->converged}};
  }
  return j;
}

inline std::string model_to_string(const Network& net, const TrainingInfo* info = nullptr) {
  return model_to_json(net, info).dump(2) + "\n";
}

namespace detail {

inline MinMax read_bounds(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string("normalization.") + key + " must be [lo, hi]");
  MinMax m{v[0].get<double>(), v[1].get<double>()};
  if (!(m.hi > m.lo)) throw ConfigError(std::string("normalization.") + key + " needs hi > lo");
  return m;
}

}  // namespace detail

inline Network model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw ConfigError("not a pvmppt model file");
    if (j.at("version").get<int>() != kModelVersion) {
      throw ConfigError("unsupported model version " + j.at("version").dump());
    }
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    std::vector<Activation> acts;
    for (const auto& a : j.at("activations")) acts.push_back(activation_from_string(a.get<std::string>()));
    Network net(sizes, acts);
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != net.num_layers()) throw DimensionMismatch("layer count mismatch");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto& w = layers[l].at("weights");
      const auto& b = layers[l].at("biases");
      const int in = sizes[l];
      const int out = sizes[l + 1];
      if (w.size() != static_cast<std::size_t>(out) || b.size() != static_cast<std::size_t>(out)) {
        throw DimensionMismatch("layer " + std::to_string(l) + " has the wrong number of rows");
      }
      for (int r = 0; r < out; ++r) {
        if (w[r].size() != static_cast<std::size_t>(in)) {
          throw DimensionMismatch("layer " + std::to_string(l) + " has the wrong number of columns");
        }
        for (int c = 0; c < in; ++c) net.weight(l, r, c) = w[r][c].get<double>();
        net.bias(l, r) = b[r].get<double>();
      }
    }
    const auto& n = j.at("normalization");
    net.norm.g = detail::read_bounds(n, "g");
    net.norm.t = detail::read_bounds(n, "t");
    net.norm.p = detail::read_bounds(n, "p");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

inline Network load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const std::string& path, const Network& net, const TrainingInfo* info = nullptr) {
  write_text_file(path, model_to_string(net, info));
}

}  // namespace pvmppt
