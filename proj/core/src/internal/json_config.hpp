#ifndef KAGNN_INTERNAL_JSON_CONFIG_HPP
#define KAGNN_INTERNAL_JSON_CONFIG_HPP

// Shared JSON <-> config plumbing for the checkpoint, run-artifact, and CLI
// translation units. Not installed; the public headers stay free of the JSON
// dependency.

#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "kagnn/models.hpp"
#include "kagnn/train.hpp"

namespace kagnn::internal {

using nlohmann::json;

inline json model_config_to_json(const ModelConfig& c) {
  json j;
  j["layer_kind"] = to_string(c.layer_kind);
  j["num_layers"] = c.num_layers;
  j["hidden_dim"] = c.hidden_dim;
  j["dropout"] = c.dropout;
  j["grid_size"] = c.grid_size;
  j["spline_order"] = c.spline_order;
  j["head"] = to_string(c.head);
  j["in_dim"] = c.in_dim;
  j["out_dim"] = c.out_dim;
  j["epsilon"] = c.epsilon;
  return j;
}

inline HeadKind head_kind_from_string_or_throw(const std::string& s) {
  if (s == "node_readout") return HeadKind::node_readout;
  if (s == "graph_pool") return HeadKind::graph_pool;
  if (s == "edge_dot") return HeadKind::edge_dot;
  throw std::invalid_argument("unknown head kind: " + s);
}

// Applies the fields present in j on top of base; unknown fields are
// collected, absent fields keep their base values.
inline ModelConfig model_config_from_json(const json& j, const ModelConfig& base,
                                          std::vector<std::string>* unknown) {
  if (!j.is_object())
    throw std::invalid_argument("model config must be a JSON object");
  ModelConfig c = base;
  for (const auto& [key, val] : j.items()) {
    if (key == "layer_kind") {
      const auto k = layer_kind_from_string(val.get<std::string>());
      if (!k)
        throw std::invalid_argument("unknown layer kind: " +
                                    val.get<std::string>());
      c.layer_kind = *k;
    } else if (key == "num_layers") {
      c.num_layers = val.get<int>();
    } else if (key == "hidden_dim") {
      c.hidden_dim = val.get<int>();
    } else if (key == "dropout") {
      c.dropout = val.get<double>();
    } else if (key == "grid_size") {
      c.grid_size = val.get<int>();
    } else if (key == "spline_order") {
      c.spline_order = val.get<int>();
    } else if (key == "head") {
      c.head = head_kind_from_string_or_throw(val.get<std::string>());
    } else if (key == "in_dim") {
      c.in_dim = val.get<int>();
    } else if (key == "out_dim") {
      c.out_dim = val.get<int>();
    } else if (key == "epsilon") {
      c.epsilon = val.get<double>();
    } else if (unknown) {
      unknown->push_back(key);
    }
  }
  return c;
}

inline json train_config_to_json(const TrainConfig& c) {
  json j;
  j["learning_rate"] = c.learning_rate;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["loss_kind"] = to_string(c.loss_kind);
  j["metric_kind"] = to_string(c.metric_kind);
  return j;
}

inline TrainConfig train_config_from_json(const json& j, const TrainConfig& base,
                                          std::vector<std::string>* unknown) {
  if (!j.is_object())
    throw std::invalid_argument("train config must be a JSON object");
  TrainConfig c = base;
  for (const auto& [key, val] : j.items()) {
    if (key == "learning_rate") {
      c.learning_rate = val.get<double>();
    } else if (key == "max_epochs") {
      c.max_epochs = val.get<int>();
    } else if (key == "patience") {
      c.patience = val.get<int>();
    } else if (key == "batch_size") {
      c.batch_size = val.get<int>();
    } else if (key == "seed") {
      c.seed = val.get<std::uint64_t>();
    } else if (key == "loss_kind") {
      const auto k = loss_kind_from_string(val.get<std::string>());
      if (!k)
        throw std::invalid_argument("unknown loss kind: " + val.get<std::string>());
      c.loss_kind = *k;
    } else if (key == "metric_kind") {
      const auto k = metric_kind_from_string(val.get<std::string>());
      if (!k)
        throw std::invalid_argument("unknown metric kind: " +
                                    val.get<std::string>());
      c.metric_kind = *k;
    } else if (unknown) {
      unknown->push_back(key);
    }
  }
  return c;
}

}  // namespace kagnn::internal

#endif
