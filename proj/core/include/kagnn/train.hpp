#ifndef KAGNN_TRAIN_HPP
#define KAGNN_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kagnn/data.hpp"
#include "kagnn/models.hpp"

namespace kagnn {

// ----- metrics -----

// Per-class F1 averaged with weights equal to true-class support. A class
// whose precision + recall is zero contributes F1 = 0.
double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred,
                   int n_classes);

double mse(std::span<const double> y_true, std::span<const double> y_pred);
double mae(std::span<const double> y_true, std::span<const double> y_pred);

enum class LossKind { cross_entropy, mse };
enum class MetricKind { weighted_f1, mse, mae };

std::string to_string(LossKind k);
std::string to_string(MetricKind k);
std::optional<LossKind> loss_kind_from_string(const std::string& s);
std::optional<MetricKind> metric_kind_from_string(const std::string& s);

// Task-default pairing: classification trains on cross-entropy and reports
// weighted F1; regression trains on MSE and reports MSE (MAE selectable).
LossKind loss_for_task(TaskKind t);
MetricKind metric_for_task(TaskKind t);

// true when larger metric values are better (F1); false for MSE/MAE.
bool metric_improves_upward(MetricKind m);

// ----- configuration -----

struct TrainConfig {
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int patience = 20;
  int batch_size = 32;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::cross_entropy;
  MetricKind metric_kind = MetricKind::weighted_f1;
};

// All violations, one message each; empty means usable.
std::vector<std::string> validate_train_config(const TrainConfig& c);

// A finite loss past this magnitude still aborts the run as unstable; keeps
// divergence detection deterministic instead of waiting for inf/NaN.
inline constexpr double divergence_loss_bound = 1e12;
// Validation must beat the best value by more than this to count as progress.
inline constexpr double improvement_tolerance = 1e-12;
// Global-norm bound applied to the gradient before every optimizer step.
inline constexpr double gradient_clip_norm = 10.0;

// ----- optimizer -----

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, one pair of buffers per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;

  static AdamState make(const std::vector<ad::Tensor>& params);
};

// One bias-corrected Adam update of every tensor from its accumulated
// gradient. Shapes must match the state the buffers were built from.
void adam_step(std::vector<ad::Tensor>& params, AdamState& state,
               const AdamConfig& cfg);

// Scales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_gradients(const std::vector<ad::Tensor>& params, double max_norm);

// ----- batching -----

// Disjoint union of several records: node and edge lists are concatenated
// with per-graph index offsets so one forward pass covers the whole batch.
// Supervision is flattened next to it in the model's output-row order.
struct GraphBatch {
  Graph graph;                  // merged structure; its targets stay empty
  std::vector<int> node_graph;  // graph index of every merged node
  int num_graphs = 0;
  std::vector<int> labels;            // classification: one id per output row
  std::vector<double> target_values;  // regression: row-major target matrix
  int target_rows = 0;
  int target_dim = 0;
};

GraphBatch make_batch(const std::vector<DatasetRecord>& records,
                      std::span<const int> indices, TaskKind task);

// Mean loss over the batch's output rows.
ad::Tensor batch_loss(Model& m, const GraphBatch& b, LossKind loss, bool training,
                      Rng& rng);

// ----- training -----

enum class RunStatus { ok, unstable };

std::string to_string(RunStatus s);

struct RunResult {
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_metric;
  int stop_epoch = 0;   // completed epochs
  int best_epoch = 0;   // 1-based epoch that produced best_val_metric
  double best_val_metric = 0.0;
  double test_metric = 0.0;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  RunStatus status = RunStatus::ok;
  int test_eval_count = 0;  // how many times the test split was evaluated
  bool restored_best = false;
};

// Record ids fed to the model per role; lets audits prove the test split
// stayed untouched during training or search.
struct IngestionLog {
  std::set<std::string> train_ids;
  std::set<std::string> val_ids;
  std::set<std::string> test_ids;
};

// Full protocol: shuffled mini-batches, per-epoch validation, early stopping
// once `patience` consecutive epochs fail to improve, restore of the best
// checkpoint, then a single test evaluation (skipped when test_idx is empty,
// as during hyperparameter search).
RunResult train_model(Model& m, const std::vector<DatasetRecord>& records,
                      std::span<const int> train_idx, std::span<const int> val_idx,
                      std::span<const int> test_idx, TaskKind task,
                      const TrainConfig& cfg, IngestionLog* ingestion = nullptr);

// Metric of the model over the given records, eval mode, fixed batch layout.
double evaluate_split(Model& m, const std::vector<DatasetRecord>& records,
                      std::span<const int> idx, TaskKind task, MetricKind metric,
                      int batch_size);

// Snapshot/restore of every trainable value plus batchnorm running
// statistics, in a fixed order; backs best-checkpoint restoration.
std::vector<std::vector<double>> snapshot_state(const Model& m);
void restore_state(Model& m, const std::vector<std::vector<double>>& state);

// ----- multi-seed benchmark -----

struct BenchmarkRow {
  LayerKind layer_kind{};
  TaskKind task{};
  MetricKind metric{};
  std::vector<RunResult> runs;  // seed order
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over seeds
  bool unstable = false;
};

// Trains the configuration once per seed {base, base+1, ...}; each run draws
// fresh parameters from its seed. The row aggregates per-seed test metrics
// and is flagged unstable when any run aborts or the spread exceeds the mean.
BenchmarkRow run_benchmark(const ModelConfig& mc,
                           const std::vector<DatasetRecord>& records,
                           const Splits& splits, TaskKind task,
                           const TrainConfig& cfg, int n_seeds = 3);

}  // namespace kagnn

#endif
