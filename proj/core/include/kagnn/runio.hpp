#ifndef KAGNN_RUNIO_HPP
#define KAGNN_RUNIO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kagnn/models.hpp"
#include "kagnn/train.hpp"

namespace kagnn {

inline constexpr const char* toolkit_version = "0.1.0";

// A run configuration as stored on disk: model and train sections plus an
// optional task binding. Files written by the search command feed straight
// back into the train command.
struct ResolvedRun {
  ModelConfig model;
  TrainConfig train;
  std::optional<TaskKind> task;
};

// Reads a JSON config file ({"model": {...}, "train": {...}, "task": "..."}),
// layering the present fields over the given defaults. Unknown fields are
// collected as warnings. Throws on unreadable files or malformed values.
ResolvedRun load_run_config(const std::string& path, const ModelConfig& model_base,
                            const TrainConfig& train_base,
                            std::vector<std::string>* warnings);
void save_run_config(const ResolvedRun& r, const std::string& path);

// FNV-1a 64-bit digest of a file's bytes; identifies the dataset a run used.
std::uint64_t fnv1a64_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

// Everything needed to reproduce a run, written before work starts.
struct RunManifest {
  std::string subcommand;
  std::string toolkit_version_str = toolkit_version;
  std::string dataset_path;
  std::string dataset_hash;  // "fnv1a64:<hex>"
  std::optional<TaskKind> task;
  ModelConfig model;
  TrainConfig train;
  std::optional<SynthSpec> synth;  // generator runs only
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> artifacts;  // role -> path
};

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest load_manifest(const std::string& path);

// One line per epoch: "<epoch>\t<train_loss>\t<val_metric>", doubles printed
// with enough digits to reparse bit-identically.
void write_epoch_log(const RunResult& r, const std::string& path);

// Final result record of a single run.
void write_metrics_json(const RunResult& r, MetricKind metric,
                        const std::string& path);

// Text table, one row per benchmark entry (task, model, metric, mean ± std);
// unstable rows show the label instead of numbers.
std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows);

}  // namespace kagnn

#endif
