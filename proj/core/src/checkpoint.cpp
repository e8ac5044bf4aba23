#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "internal/json_config.hpp"
#include "kagnn/checkpoint.hpp"

namespace kagnn {

namespace {

using internal::json;

void require_finite(const std::vector<std::vector<double>>& arrays,
                    const char* what) {
  for (const auto& a : arrays) {
    for (double v : a) {
      if (!std::isfinite(v))
        throw std::invalid_argument(std::string("save_checkpoint: non-finite ") +
                                    what);
    }
  }
}

}  // namespace

Checkpoint make_checkpoint(const Model& m, TaskKind task,
                           const std::optional<FeatureScaler>& scaler,
                           bool restored_best) {
  Checkpoint c;
  c.config = m.config;
  c.task = task;
  c.scaler = scaler;
  c.restored_best = restored_best;
  for_each_param(m, [&](const ad::Tensor& t) { c.param_values.push_back(t.values()); });
  for (const auto& layer : m.params.layers) {
    if (layer.bn) {
      c.bn_running.push_back(layer.bn->running_mean);
      c.bn_running.push_back(layer.bn->running_var);
    }
  }
  return c;
}

Model checkpoint_to_model(const Checkpoint& c) {
  const std::vector<std::string> errs = validate_config(c.config);
  if (!errs.empty())
    throw std::invalid_argument("checkpoint_to_model: invalid config: " + errs[0]);
  Rng throwaway(0);
  Model m = build_model(c.config, throwaway);

  std::size_t i = 0;
  for_each_param(m, [&](ad::Tensor& t) {
    if (i >= c.param_values.size())
      throw std::invalid_argument("checkpoint_to_model: too few parameter arrays");
    if (c.param_values[i].size() != t.numel())
      throw std::invalid_argument("checkpoint_to_model: parameter size mismatch");
    t.values_mut() = c.param_values[i];
    ++i;
  });
  if (i != c.param_values.size())
    throw std::invalid_argument("checkpoint_to_model: too many parameter arrays");

  std::size_t b = 0;
  for (auto& layer : m.params.layers) {
    if (!layer.bn) continue;
    if (b + 2 > c.bn_running.size())
      throw std::invalid_argument("checkpoint_to_model: too few running-stat arrays");
    if (c.bn_running[b].size() != layer.bn->running_mean.size() ||
        c.bn_running[b + 1].size() != layer.bn->running_var.size())
      throw std::invalid_argument("checkpoint_to_model: running-stat size mismatch");
    layer.bn->running_mean = c.bn_running[b];
    layer.bn->running_var = c.bn_running[b + 1];
    b += 2;
  }
  if (b != c.bn_running.size())
    throw std::invalid_argument("checkpoint_to_model: too many running-stat arrays");
  return m;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  require_finite(c.param_values, "parameter value");
  require_finite(c.bn_running, "running statistic");

  json j;
  j["kind"] = "kagnn-checkpoint";
  j["format_version"] = checkpoint_format_version;
  j["task"] = to_string(c.task);
  j["restored_best"] = c.restored_best;
  j["model"]["config"] = internal::model_config_to_json(c.config);
  j["model"]["params"] = c.param_values;
  j["model"]["bn_running"] = c.bn_running;
  if (c.scaler) {
    j["scaler"]["lo"] = c.scaler->lo;
    j["scaler"]["hi"] = c.scaler->hi;
  } else {
    j["scaler"] = nullptr;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }

  if (j.value("kind", "") != "kagnn-checkpoint")
    throw std::runtime_error("load_checkpoint: " + path +
                             ": not a model checkpoint file");
  const int version = j.value("format_version", -1);
  if (version != checkpoint_format_version)
    throw std::runtime_error("load_checkpoint: " + path +
                             ": unsupported format version " +
                             std::to_string(version));

  Checkpoint c;
  const auto task = task_kind_from_string(j.value("task", ""));
  if (!task)
    throw std::runtime_error("load_checkpoint: " + path + ": unknown task kind");
  c.task = *task;
  c.restored_best = j.value("restored_best", false);
  try {
    c.config = internal::model_config_from_json(j.at("model").at("config"),
                                                ModelConfig{}, nullptr);
    c.param_values =
        j.at("model").at("params").get<std::vector<std::vector<double>>>();
    c.bn_running =
        j.at("model").at("bn_running").get<std::vector<std::vector<double>>>();
    if (!j.at("scaler").is_null()) {
      FeatureScaler s;
      s.lo = j.at("scaler").at("lo").get<std::vector<double>>();
      s.hi = j.at("scaler").at("hi").get<std::vector<double>>();
      if (s.lo.size() != s.hi.size())
        throw std::runtime_error("scaler lo/hi length mismatch");
      c.scaler = std::move(s);
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: " + path + ": " + e.what());
  }
  return c;
}

}  // namespace kagnn
