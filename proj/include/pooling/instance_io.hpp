#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "pooling/instance.hpp"

// JSON wire format for instances. Layout (indexes 0-based, numbers written
// with round-trip precision, capacities simply absent when unbounded):
//
// {
//   "inputs": 3, "pools": 2, "outputs": 3, "attributes": 2,
//   "arcs": [
//     {"tail": {"layer": "input", "index": 0},
//      "head": {"layer": "pool",  "index": 1},
//      "weight": -4.0, "capacity": 12.5},
//     ...
//   ],
//   "node_capacities": [{"layer": "output", "index": 0, "capacity": 42.0}, ...],
//   "input_quality": [[...|K|...], ...|I| rows...],
//   "quality_lb":    [[...|K|...], ...|J| rows...],
//   "quality_ub":    [[...|K|...], ...|J| rows...]
// }
//
// save_instance always writes arcs in canonical order and only the bounded
// node capacities, so save(load(f)) reproduces f for files it wrote itself.

namespace pooling {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Layer parse_layer(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) throw ParseError(where + ": layer must be a string");
  std::string s = j.get<std::string>();
  if (s == "input") return Layer::Input;
  if (s == "pool") return Layer::Pool;
  if (s == "output") return Layer::Output;
  throw ParseError(where + ": unknown layer '" + s + "'");
}

inline int require_count(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number_integer())
    throw ParseError(std::string(field) + ": missing or not an integer");
  return j[field].get<int>();
}

inline Matrix parse_matrix(const nlohmann::json& j, const char* field, int rows, int cols) {
  if (!j.contains(field) || !j[field].is_array())
    throw ParseError(std::string(field) + ": missing or not an array");
  const auto& m = j[field];
  if (static_cast<int>(m.size()) != rows)
    throw ParseError(std::string(field) + ": expected " + std::to_string(rows) + " rows");
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!m[r].is_array() || static_cast<int>(m[r].size()) != cols)
      throw ParseError(std::string(field) + "[" + std::to_string(r) + "]: expected " +
                       std::to_string(cols) + " numbers");
    for (int c = 0; c < cols; ++c) {
      if (!m[r][c].is_number())
        throw ParseError(std::string(field) + "[" + std::to_string(r) + "][" +
                         std::to_string(c) + "]: not a number");
      out(r, c) = m[r][c].get<double>();
    }
  }
  return out;
}

}  // namespace detail

inline nlohmann::json instance_to_json(const PoolingInstance& inst) {
  nlohmann::json j;
  j["inputs"] = inst.num_inputs;
  j["pools"] = inst.num_pools;
  j["outputs"] = inst.num_outputs;
  j["attributes"] = inst.num_attributes;

  nlohmann::json arcs = nlohmann::json::array();
  for (int a = 0; a < inst.num_arcs(); ++a) {
    nlohmann::json e;
    e["tail"] = {{"layer", layer_name(inst.arcs[a].tail.layer)},
                 {"index", inst.arcs[a].tail.index}};
    e["head"] = {{"layer", layer_name(inst.arcs[a].head.layer)},
                 {"index", inst.arcs[a].head.index}};
    e["weight"] = inst.arc_weight[a];
    if (inst.arc_capacity[a]) e["capacity"] = *inst.arc_capacity[a];
    arcs.push_back(std::move(e));
  }
  j["arcs"] = std::move(arcs);

  nlohmann::json caps = nlohmann::json::array();
  auto emit_caps = [&caps](const std::vector<Bound>& list, Layer layer) {
    for (int i = 0; i < static_cast<int>(list.size()); ++i)
      if (list[i])
        caps.push_back({{"layer", layer_name(layer)}, {"index", i}, {"capacity", *list[i]}});
  };
  emit_caps(inst.input_capacity, Layer::Input);
  emit_caps(inst.pool_capacity, Layer::Pool);
  emit_caps(inst.output_capacity, Layer::Output);
  j["node_capacities"] = std::move(caps);

  auto matrix_rows = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < m.cols; ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["input_quality"] = matrix_rows(inst.input_quality);
  j["quality_lb"] = matrix_rows(inst.quality_lb);
  j["quality_ub"] = matrix_rows(inst.quality_ub);
  return j;
}

inline PoolingInstance instance_from_json(const nlohmann::json& j) {
  PoolingInstance inst;
  inst.num_inputs = detail::require_count(j, "inputs");
  inst.num_pools = detail::require_count(j, "pools");
  inst.num_outputs = detail::require_count(j, "outputs");
  inst.num_attributes = detail::require_count(j, "attributes");
  if (inst.num_inputs < 0 || inst.num_pools < 0 || inst.num_outputs < 0 ||
      inst.num_attributes < 0)
    throw ParseError("counts: must be non-negative");

  inst.input_capacity.assign(inst.num_inputs, std::nullopt);
  inst.pool_capacity.assign(inst.num_pools, std::nullopt);
  inst.output_capacity.assign(inst.num_outputs, std::nullopt);

  if (!j.contains("arcs") || !j["arcs"].is_array())
    throw ParseError("arcs: missing or not an array");
  int a = 0;
  auto parse_endpoint = [](const nlohmann::json& e, const char* field,
                           const std::string& where) {
    if (!e.contains(field) || !e[field].is_object() || !e[field].contains("layer") ||
        !e[field].contains("index") || !e[field]["index"].is_number_integer())
      throw ParseError(where + "." + field + ": needs {layer, index}");
    return NodeId{detail::parse_layer(e[field]["layer"], where + "." + field),
                  e[field]["index"].get<int>()};
  };
  for (const auto& e : j["arcs"]) {
    std::string where = "arcs[" + std::to_string(a) + "]";
    NodeId tail = parse_endpoint(e, "tail", where);
    NodeId head = parse_endpoint(e, "head", where);
    if (!e.contains("weight") || !e["weight"].is_number())
      throw ParseError(where + ".weight: missing or not a number");
    inst.arcs.push_back({tail, head});
    inst.arc_weight.push_back(e["weight"].get<double>());
    Bound cap;
    if (e.contains("capacity")) {
      if (!e["capacity"].is_number()) throw ParseError(where + ".capacity: not a number");
      cap = e["capacity"].get<double>();
    }
    inst.arc_capacity.push_back(cap);
    ++a;
  }

  if (j.contains("node_capacities")) {
    if (!j["node_capacities"].is_array()) throw ParseError("node_capacities: not an array");
    int n = 0;
    for (const auto& e : j["node_capacities"]) {
      std::string where = "node_capacities[" + std::to_string(n++) + "]";
      if (!e.is_object() || !e.contains("layer") || !e.contains("index") ||
          !e["index"].is_number_integer())
        throw ParseError(where + ": needs {layer, index, capacity}");
      Layer layer = detail::parse_layer(e["layer"], where);
      int index = e["index"].get<int>();
      if (!e.contains("capacity") || !e["capacity"].is_number())
        throw ParseError(where + ".capacity: missing or not a number");
      double cap = e["capacity"].get<double>();
      std::vector<Bound>& list = layer == Layer::Input  ? inst.input_capacity
                                 : layer == Layer::Pool ? inst.pool_capacity
                                                        : inst.output_capacity;
      if (index < 0 || index >= static_cast<int>(list.size()))
        throw ParseError(where + ".index: out of range");
      list[index] = cap;
    }
  }

  inst.input_quality =
      detail::parse_matrix(j, "input_quality", inst.num_inputs, inst.num_attributes);
  inst.quality_lb = detail::parse_matrix(j, "quality_lb", inst.num_outputs, inst.num_attributes);
  inst.quality_ub = detail::parse_matrix(j, "quality_ub", inst.num_outputs, inst.num_attributes);

  inst.finalize();
  ValidationReport rep = validate(inst);
  if (!rep.ok())
    throw ParseError(rep.issues.front().where + ": " + rep.issues.front().message);
  return inst;
}

inline void save_instance(const PoolingInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_json(inst).dump(2) << "\n";
}

inline PoolingInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return instance_from_json(j);
  } catch (ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace pooling
