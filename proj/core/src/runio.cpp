#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "internal/json_config.hpp"
#include "kagnn/runio.hpp"

namespace kagnn {

namespace {

using internal::json;

json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error(std::string(what) + ": cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string(what) + ": " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error(std::string(what) + ": cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out)
    throw std::runtime_error(std::string(what) + ": write failed for " + path);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ResolvedRun load_run_config(const std::string& path, const ModelConfig& model_base,
                            const TrainConfig& train_base,
                            std::vector<std::string>* warnings) {
  const json j = read_json_file(path, "load_run_config");
  if (!j.is_object())
    throw std::runtime_error("load_run_config: " + path +
                             ": top level must be an object");
  ResolvedRun r;
  r.model = model_base;
  r.train = train_base;
  for (const auto& [key, val] : j.items()) {
    if (key == "model") {
      std::vector<std::string> unknown;
      r.model = internal::model_config_from_json(val, r.model, &unknown);
      if (warnings)
        for (const auto& u : unknown)
          warnings->push_back("unknown model field: " + u);
    } else if (key == "train") {
      std::vector<std::string> unknown;
      r.train = internal::train_config_from_json(val, r.train, &unknown);
      if (warnings)
        for (const auto& u : unknown)
          warnings->push_back("unknown train field: " + u);
    } else if (key == "task") {
      const auto t = task_kind_from_string(val.get<std::string>());
      if (!t)
        throw std::runtime_error("load_run_config: " + path +
                                 ": unknown task: " + val.get<std::string>());
      r.task = *t;
    } else if (warnings) {
      warnings->push_back("unknown config field: " + key);
    }
  }
  return r;
}

void save_run_config(const ResolvedRun& r, const std::string& path) {
  json j;
  j["model"] = internal::model_config_to_json(r.model);
  j["train"] = internal::train_config_to_json(r.train);
  if (r.task) j["task"] = to_string(*r.task);
  write_json_file(j, path, "save_run_config");
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  json j;
  j["kind"] = "kagnn-run-manifest";
  j["subcommand"] = m.subcommand;
  j["toolkit_version"] = m.toolkit_version_str;
  j["dataset"]["path"] = m.dataset_path;
  j["dataset"]["hash"] = m.dataset_hash;
  if (m.task) j["task"] = to_string(*m.task);
  j["model"] = internal::model_config_to_json(m.model);
  j["train"] = internal::train_config_to_json(m.train);
  if (m.synth) {
    j["synth"]["task"] = to_string(m.synth->task);
    j["synth"]["n_graphs"] = m.synth->n_graphs;
    j["synth"]["nodes_lo"] = m.synth->nodes_lo;
    j["synth"]["nodes_hi"] = m.synth->nodes_hi;
  }
  j["seeds"] = m.seeds;
  j["artifacts"] = m.artifacts;
  // Recorded because it is a protocol choice a reproducer must mirror.
  j["restore_best_before_test"] = true;
  write_json_file(j, path, "write_manifest");
}

RunManifest load_manifest(const std::string& path) {
  const json j = read_json_file(path, "load_manifest");
  if (j.value("kind", "") != "kagnn-run-manifest")
    throw std::runtime_error("load_manifest: " + path + ": not a run manifest");
  RunManifest m;
  try {
    m.subcommand = j.value("subcommand", "");
    m.toolkit_version_str = j.value("toolkit_version", "");
    m.dataset_path = j.at("dataset").value("path", "");
    m.dataset_hash = j.at("dataset").value("hash", "");
    if (j.contains("task")) {
      const auto t = task_kind_from_string(j["task"].get<std::string>());
      if (!t) throw std::runtime_error("unknown task kind");
      m.task = *t;
    }
    m.model = internal::model_config_from_json(j.at("model"), ModelConfig{}, nullptr);
    m.train = internal::train_config_from_json(j.at("train"), TrainConfig{}, nullptr);
    if (j.contains("synth")) {
      SynthSpec s;
      const auto t = task_kind_from_string(j["synth"].value("task", ""));
      if (!t) throw std::runtime_error("unknown synth task kind");
      s.task = *t;
      s.n_graphs = j["synth"].value("n_graphs", 0);
      s.nodes_lo = j["synth"].value("nodes_lo", 0);
      s.nodes_hi = j["synth"].value("nodes_hi", 0);
      m.synth = s;
    }
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    m.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  } catch (const json::exception& e) {
    throw std::runtime_error("load_manifest: " + path + ": " + e.what());
  }
  return m;
}

void write_epoch_log(const RunResult& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_epoch_log: cannot write " + path);
  for (std::size_t e = 0; e < r.epoch_train_loss.size(); ++e) {
    out << (e + 1) << '\t' << fmt17(r.epoch_train_loss[e]) << '\t';
    if (e < r.epoch_val_metric.size())
      out << fmt17(r.epoch_val_metric[e]);
    else
      out << "-";
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_epoch_log: write failed for " + path);
}

void write_metrics_json(const RunResult& r, MetricKind metric,
                        const std::string& path) {
  json j;
  j["kind"] = "kagnn-run-metrics";
  j["status"] = to_string(r.status);
  j["metric"] = to_string(metric);
  j["stop_epoch"] = r.stop_epoch;
  j["best_epoch"] = r.best_epoch;
  j["best_val_metric"] = std::isfinite(r.best_val_metric)
                             ? json(r.best_val_metric)
                             : json(nullptr);
  j["test_metric"] =
      r.test_eval_count > 0 ? json(r.test_metric) : json(nullptr);
  j["test_eval_count"] = r.test_eval_count;
  j["seed"] = r.seed;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["restored_best"] = r.restored_best;
  write_json_file(j, path, "write_metrics_json");
}

std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows) {
  std::string out = "task         model       metric        result\n";
  char line[192];
  for (const BenchmarkRow& row : rows) {
    char result[96];
    if (row.unstable) {
      std::snprintf(result, sizeof result, "Unstable");
    } else {
      std::snprintf(result, sizeof result, "%.4f +/- %.4f", row.mean, row.stddev);
    }
    std::snprintf(line, sizeof line, "%-12s %-11s %-13s %s\n",
                  to_string(row.task).c_str(), to_string(row.layer_kind).c_str(),
                  to_string(row.metric).c_str(), result);
    out += line;
  }
  return out;
}

}  // namespace kagnn
