#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fast/error.hpp"
#include "fast/rng.hpp"
#include "fast/tensor.hpp"

namespace fast {

/// Named trainable tensors, iterated in name order.
class ParameterSet {
 public:
  void add(const std::string& name, Tensor value) {
    if (!values_.emplace(name, std::move(value)).second) {
      throw Error("parameter '" + name + "' declared twice");
    }
  }

  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor& get(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw Error("unknown parameter '" + name + "'");
    return it->second;
  }

  /// Replaces a value, keeping the declared shape.
  void set(const std::string& name, Tensor value) {
    Tensor& slot = get(name);
    if (!slot.same_shape(value)) {
      throw Error("parameter '" + name + "': shape " + value.shape_string() + " does not match " +
                  slot.shape_string());
    }
    slot = std::move(value);
  }

  Var bind(Tape& tape, const std::string& name) const { return tape.parameter(name, get(name)); }

  std::size_t count() const { return values_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : values_) n += t.size();
    return n;
  }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }
  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, Tensor> values_;
};

/// uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const Real a = std::sqrt(6.0 / static_cast<Real>(rows + cols));
  Tensor t(rows, cols);
  for (Real& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

/// Checkpoint layout (JSON):
///   {"format": "fast-params", "version": 1,
///    "params": {"<name>": {"shape": [rows, cols], "data": [row-major values]}, ...}}
/// Values are written with round-trip precision, so save/load is exact.
inline constexpr int kParamFormatVersion = 1;

inline nlohmann::json params_to_json(const ParameterSet& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, t] : params) {
    out[name] = {{"shape", {t.rows(), t.cols()}},
                 {"data", std::vector<Real>(t.data().begin(), t.data().end())}};
  }
  return out;
}

inline ParameterSet params_from_json(const nlohmann::json& j) {
  ParameterSet params;
  try {
    for (const auto& [name, entry] : j.items()) {
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw Error("parameter '" + name + "': shape must have two entries");
      params.add(name, Tensor(shape[0], shape[1], entry.at("data").get<std::vector<Real>>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed parameter block: ") + e.what());
  }
  return params;
}

inline void save_params(const ParameterSet& params, const std::string& path) {
  nlohmann::json doc = {{"format", "fast-params"},
                        {"version", kParamFormatVersion},
                        {"params", params_to_json(params)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump() << '\n';
}

inline ParameterSet load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  if (doc.value("format", "") != "fast-params" || doc.value("version", 0) != kParamFormatVersion) {
    throw Error(path + ": not a version " + std::to_string(kParamFormatVersion) + " parameter file");
  }
  return params_from_json(doc.at("params"));
}

}  // namespace fast
