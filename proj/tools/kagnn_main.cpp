// Command-line front end: dataset synthesis, training, evaluation,
// multi-seed benchmarking, and hyperparameter search over the same library
// calls the tests use.
//
// Exit codes: 0 success; 2 usage, configuration, or data errors;
// 3 numerical instability or a failed search.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kagnn/checkpoint.hpp"
#include "kagnn/data.hpp"
#include "kagnn/hpsearch.hpp"
#include "kagnn/models.hpp"
#include "kagnn/runio.hpp"
#include "kagnn/train.hpp"

namespace fs = std::filesystem;
using namespace kagnn;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_unstable = 3;

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

// Flag bundle shared by every subcommand that trains models.
struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  int jobs = 1;
  int max_epochs = 500;
  int patience = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
};

// Attaches the shared flags; returns the option pointers needed for
// explicit-flag precedence checks.
struct CommonFlagHandles {
  CLI::Option* seed = nullptr;
  CLI::Option* out_dir = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* max_epochs = nullptr;
  CLI::Option* patience = nullptr;
  CLI::Option* batch_size = nullptr;
  CLI::Option* learning_rate = nullptr;
};

CommonFlagHandles add_common_flags(CLI::App* sub, CommonOpts& o,
                                   bool out_dir_required) {
  CommonFlagHandles h;
  h.seed = sub->add_option("--seed", o.seed, "Root seed; every random draw derives from it");
  h.out_dir = sub->add_option("--out-dir", o.out_dir, "Directory for run artifacts");
  if (out_dir_required) h.out_dir->required();
  h.jobs = sub->add_option("--jobs", o.jobs, "Worker processes (currently runs sequentially)")
               ->check(CLI::PositiveNumber);
  h.max_epochs = sub->add_option("--max-epochs", o.max_epochs, "Epoch cap");
  h.patience = sub->add_option("--patience", o.patience,
                               "Consecutive non-improving epochs before stopping");
  h.batch_size = sub->add_option("--batch-size", o.batch_size, "Graphs per mini-batch");
  h.learning_rate = sub->add_option("--lr", o.learning_rate, "Adam learning rate");
  return h;
}

void note_sequential_jobs(int jobs) {
  if (jobs > 1)
    std::fprintf(stderr,
                 "note: --jobs %d requested; running sequentially (parallel "
                 "execution is not implemented)\n",
                 jobs);
}

TaskKind parse_task_or_throw(const std::string& s) {
  const auto t = task_kind_from_string(s);
  if (!t) throw std::invalid_argument("unknown task: " + s);
  return *t;
}

LayerKind parse_model_or_throw(const std::string& s) {
  const auto k = layer_kind_from_string(s);
  if (!k) throw std::invalid_argument("unknown model kind: " + s);
  return *k;
}

// Loads, validates, and preprocesses a dataset: records, fitted scaler, and
// the seeded stratified split.
struct PreparedData {
  std::vector<DatasetRecord> records;  // already feature-scaled
  FeatureScaler scaler;
  Splits splits;
  int in_dim = 0;
  int out_dim = 0;
};

PreparedData prepare_data(const std::string& path, TaskKind task,
                          std::uint64_t seed) {
  LoadResult loaded = load_dataset(path);
  print_warnings(loaded.warnings);
  if (loaded.records.empty())
    throw std::invalid_argument("dataset is empty: " + path);
  PreparedData p;
  const StratifyKey key = default_stratify_key(loaded.records, task);
  p.splits = split_dataset(loaded.records, seed, key);
  p.scaler = FeatureScaler::fit(loaded.records, p.splits.train);
  p.records = p.scaler.apply_all(loaded.records);
  p.in_dim = infer_in_dim(p.records);
  p.out_dim = infer_out_dim(p.records, task);
  return p;
}

// CLI flags > config file > defaults. The config file, when given, is read
// first; explicitly passed flags then overwrite its values.
struct ResolvedTrainRequest {
  ModelConfig model;
  TrainConfig train;
  std::optional<TaskKind> task;
};

ResolvedTrainRequest resolve_configs(
    const std::string& config_path, const std::string& task_flag,
    const std::string& model_flag, const CommonOpts& common,
    const CommonFlagHandles& handles, CLI::Option* model_opt,
    CLI::Option* task_opt, int layers, CLI::Option* layers_opt, int hidden,
    CLI::Option* hidden_opt, double dropout, CLI::Option* dropout_opt, int grid,
    CLI::Option* grid_opt, int spline, CLI::Option* spline_opt) {
  ResolvedTrainRequest r;
  if (!config_path.empty()) {
    std::vector<std::string> warnings;
    ResolvedRun file = load_run_config(config_path, r.model, r.train, &warnings);
    print_warnings(warnings);
    r.model = file.model;
    r.train = file.train;
    r.task = file.task;
  }
  if (task_opt->count() > 0) r.task = parse_task_or_throw(task_flag);
  if (model_opt && model_opt->count() > 0)
    r.model.layer_kind = parse_model_or_throw(model_flag);
  if (layers_opt->count() > 0) r.model.num_layers = layers;
  if (hidden_opt->count() > 0) r.model.hidden_dim = hidden;
  if (dropout_opt->count() > 0) r.model.dropout = dropout;
  if (grid_opt->count() > 0) r.model.grid_size = grid;
  if (spline_opt->count() > 0) r.model.spline_order = spline;
  if (handles.seed->count() > 0 || config_path.empty()) r.train.seed = common.seed;
  if (handles.max_epochs->count() > 0 || config_path.empty())
    r.train.max_epochs = common.max_epochs;
  if (handles.patience->count() > 0 || config_path.empty())
    r.train.patience = common.patience;
  if (handles.batch_size->count() > 0 || config_path.empty())
    r.train.batch_size = common.batch_size;
  if (handles.learning_rate->count() > 0 || config_path.empty())
    r.train.learning_rate = common.learning_rate;
  return r;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::invalid_argument("cannot create output directory " + dir + ": " +
                                ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ----- synth -----

int cmd_synth(const std::string& task_str, int n, int nodes_lo, int nodes_hi,
              const std::string& out_path, std::uint64_t seed) {
  SynthSpec spec;
  spec.task = parse_task_or_throw(task_str);
  spec.n_graphs = n;
  spec.nodes_lo = nodes_lo;
  spec.nodes_hi = nodes_hi;
  const std::vector<DatasetRecord> records = synth_generate(spec, seed);
  save_dataset(records, out_path);

  RunManifest manifest;
  manifest.subcommand = "synth";
  manifest.dataset_path = out_path;
  manifest.dataset_hash = "fnv1a64:" + hash_hex(fnv1a64_file(out_path));
  manifest.task = spec.task;
  manifest.synth = spec;
  manifest.seeds = {seed};
  manifest.artifacts["dataset"] = out_path;
  write_manifest(manifest, out_path + ".manifest.json");

  std::printf("wrote %zu records to %s\n", records.size(), out_path.c_str());
  return exit_ok;
}

// ----- train -----

int cmd_train(const std::string& data_path, const ResolvedTrainRequest& req,
              const CommonOpts& common) {
  if (!req.task)
    throw std::invalid_argument("no task given: pass --task or a config file with one");
  const TaskKind task = *req.task;

  PreparedData data = prepare_data(data_path, task, req.train.seed);

  ModelConfig mc = req.model;
  mc.head = head_for_task(task);
  mc.in_dim = data.in_dim;
  mc.out_dim = mc.head == HeadKind::edge_dot ? 0 : data.out_dim;
  TrainConfig tc = req.train;
  tc.loss_kind = loss_for_task(task);
  tc.metric_kind = metric_for_task(task);

  std::vector<std::string> errs = validate_config(mc);
  for (const auto& e : validate_train_config(tc)) errs.push_back(e);
  if (!errs.empty()) {
    std::string joined = "invalid configuration:";
    for (const auto& e : errs) joined += "\n  - " + e;
    throw std::invalid_argument(joined);
  }

  ensure_out_dir(common.out_dir);
  const std::string manifest_path = join_path(common.out_dir, "manifest.json");
  const std::string epochs_path = join_path(common.out_dir, "epochs.tsv");
  const std::string metrics_path = join_path(common.out_dir, "metrics.json");
  const std::string ckpt_path = join_path(common.out_dir, "checkpoint.json");

  RunManifest manifest;
  manifest.subcommand = "train";
  manifest.dataset_path = data_path;
  manifest.dataset_hash = "fnv1a64:" + hash_hex(fnv1a64_file(data_path));
  manifest.task = task;
  manifest.model = mc;
  manifest.train = tc;
  manifest.seeds = {tc.seed};
  manifest.artifacts["epoch_log"] = epochs_path;
  manifest.artifacts["metrics"] = metrics_path;
  manifest.artifacts["checkpoint"] = ckpt_path;
  write_manifest(manifest, manifest_path);

  Rng seed_root(tc.seed);
  Rng init_rng = seed_root.stream(rng_streams::model_init);
  Model model = build_model(mc, init_rng);
  RunResult result = train_model(model, data.records, data.splits.train,
                                 data.splits.val, data.splits.test, task, tc);

  write_epoch_log(result, epochs_path);
  write_metrics_json(result, tc.metric_kind, metrics_path);

  if (result.status == RunStatus::unstable) {
    std::fprintf(stderr, "unstable: training diverged at epoch %d\n",
                 result.stop_epoch + 1);
    return exit_unstable;
  }

  save_checkpoint(make_checkpoint(model, task, data.scaler, result.restored_best),
                  ckpt_path);
  std::printf("status: ok\n");
  std::printf("stop_epoch: %d\n", result.stop_epoch);
  std::printf("best_epoch: %d\n", result.best_epoch);
  std::printf("best_val_metric: %.17g\n", result.best_val_metric);
  std::printf("test_metric %s: %.17g\n", to_string(tc.metric_kind).c_str(),
              result.test_metric);
  std::printf("wall_time_seconds: %.3f\n", result.wall_time_seconds);
  return exit_ok;
}

// ----- eval -----

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split, const CommonOpts& common,
             bool out_dir_given) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Model model = checkpoint_to_model(ckpt);
  const TaskKind task = ckpt.task;

  LoadResult loaded = load_dataset(data_path);
  print_warnings(loaded.warnings);
  if (loaded.records.empty())
    throw std::invalid_argument("dataset is empty: " + data_path);

  const int data_in_dim = infer_in_dim(loaded.records);
  if (data_in_dim != model.config.in_dim)
    throw std::invalid_argument(
        "feature dimension mismatch: checkpoint expects " +
        std::to_string(model.config.in_dim) + ", dataset has " +
        std::to_string(data_in_dim));

  std::vector<DatasetRecord> records =
      ckpt.scaler ? ckpt.scaler->apply_all(loaded.records) : loaded.records;

  std::vector<int> idx;
  if (split == "all") {
    for (int i = 0; i < static_cast<int>(records.size()); ++i) idx.push_back(i);
  } else {
    const StratifyKey key = default_stratify_key(loaded.records, task);
    Splits splits = split_dataset(loaded.records, common.seed, key);
    if (split == "train")
      idx = splits.train;
    else if (split == "val")
      idx = splits.val;
    else if (split == "test")
      idx = splits.test;
    else
      throw std::invalid_argument("unknown split: " + split +
                                  " (expected train, val, test, or all)");
  }
  if (idx.empty()) throw std::invalid_argument("selected split is empty");

  const MetricKind metric = metric_for_task(task);
  const double value =
      evaluate_split(model, records, idx, task, metric, common.batch_size);
  std::printf("%s %.17g\n", to_string(metric).c_str(), value);

  if (out_dir_given) {
    ensure_out_dir(common.out_dir);
    RunManifest manifest;
    manifest.subcommand = "eval";
    manifest.dataset_path = data_path;
    manifest.dataset_hash = "fnv1a64:" + hash_hex(fnv1a64_file(data_path));
    manifest.task = task;
    manifest.model = model.config;
    manifest.seeds = {common.seed};
    manifest.artifacts["checkpoint"] = ckpt_path;
    manifest.artifacts["split"] = split;
    write_manifest(manifest, join_path(common.out_dir, "manifest.json"));
  }
  return exit_ok;
}

// ----- benchmark -----

int cmd_benchmark(const std::string& data_path, const std::string& task_str,
                  const std::vector<std::string>& model_strs, int n_seeds,
                  const ResolvedTrainRequest& req, const CommonOpts& common) {
  const TaskKind task = parse_task_or_throw(task_str);
  if (model_strs.empty()) throw std::invalid_argument("no model kinds given");
  std::vector<LayerKind> kinds;
  for (const auto& s : model_strs) kinds.push_back(parse_model_or_throw(s));
  note_sequential_jobs(common.jobs);

  PreparedData data = prepare_data(data_path, task, req.train.seed);

  TrainConfig tc = req.train;
  tc.loss_kind = loss_for_task(task);
  tc.metric_kind = metric_for_task(task);
  for (const auto& e : validate_train_config(tc))
    throw std::invalid_argument("invalid configuration: " + e);

  ensure_out_dir(common.out_dir);
  const std::string table_path = join_path(common.out_dir, "benchmark.txt");

  std::vector<BenchmarkRow> rows;
  for (LayerKind kind : kinds) {
    ModelConfig mc = req.model;
    mc.layer_kind = kind;
    if (!is_kan_kind(kind)) {
      mc.grid_size = default_grid_size;
      mc.spline_order = default_spline_order;
    }
    mc.head = head_for_task(task);
    mc.in_dim = data.in_dim;
    mc.out_dim = mc.head == HeadKind::edge_dot ? 0 : data.out_dim;
    for (const auto& e : validate_config(mc))
      throw std::invalid_argument("invalid configuration for " + to_string(kind) +
                                  ": " + e);

    RunManifest manifest;
    manifest.subcommand = "benchmark";
    manifest.dataset_path = data_path;
    manifest.dataset_hash = "fnv1a64:" + hash_hex(fnv1a64_file(data_path));
    manifest.task = task;
    manifest.model = mc;
    manifest.train = tc;
    for (int s = 0; s < n_seeds; ++s)
      manifest.seeds.push_back(tc.seed + static_cast<std::uint64_t>(s));
    manifest.artifacts["table"] = table_path;
    write_manifest(manifest,
                   join_path(common.out_dir, "manifest-" + to_string(kind) + ".json"));

    rows.push_back(run_benchmark(mc, data.records, data.splits, task, tc, n_seeds));
  }

  const std::string table = format_benchmark_table(rows);
  std::printf("%s", table.c_str());
  std::ofstream out(table_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + table_path);
  out << table;
  return exit_ok;
}

// ----- hpsearch -----

int cmd_hpsearch(const std::string& data_path, const std::string& task_str,
                 const std::string& model_str, int trials,
                 const ResolvedTrainRequest& req, const CommonOpts& common) {
  const TaskKind task = parse_task_or_throw(task_str);
  const LayerKind kind = parse_model_or_throw(model_str);
  note_sequential_jobs(common.jobs);

  PreparedData data = prepare_data(data_path, task, req.train.seed);

  TrainConfig base = req.train;
  base.loss_kind = loss_for_task(task);
  base.metric_kind = metric_for_task(task);

  ensure_out_dir(common.out_dir);
  const std::string table_path = join_path(common.out_dir, "trials.txt");
  const std::string best_path = join_path(common.out_dir, "best_config.json");

  RunManifest manifest;
  manifest.subcommand = "hpsearch";
  manifest.dataset_path = data_path;
  manifest.dataset_hash = "fnv1a64:" + hash_hex(fnv1a64_file(data_path));
  manifest.task = task;
  manifest.model.layer_kind = kind;
  manifest.train = base;
  manifest.seeds = {base.seed};
  manifest.artifacts["trial_table"] = table_path;
  manifest.artifacts["best_config"] = best_path;
  write_manifest(manifest, join_path(common.out_dir, "manifest.json"));

  SearchSpace space;
  try {
    SearchResult result = run_search(space, kind, task, data.records, data.splits,
                                     base, trials, base.seed);
    const std::string table = format_trial_table(result.trials);
    std::ofstream out(table_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + table_path);
    out << table;
    out.close();

    ResolvedRun best;
    best.model = result.best.model;
    best.train = result.best.train;
    best.task = task;
    save_run_config(best, best_path);

    std::printf("%s", table.c_str());
    std::printf("best trial: %d (val %s %.17g)\n", result.best_index,
                to_string(base.metric_kind).c_str(),
                result.trials[static_cast<std::size_t>(result.best_index)].val_metric);
    std::printf("best config written to %s\n", best_path.c_str());
    return exit_ok;
  } catch (const SearchFailure& e) {
    const std::string table = format_trial_table(e.trials());
    std::ofstream out(table_path, std::ios::binary);
    if (out) out << table;
    std::fprintf(stderr, "%serror: %s\n", table.c_str(), e.what());
    return exit_unstable;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spline-based and baseline graph neural networks: data synthesis, "
               "training, evaluation, benchmarking, and hyperparameter search"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "Generate a synthetic graph dataset");
  std::string synth_task;
  int synth_n = 100;
  int synth_nodes_lo = 8;
  int synth_nodes_hi = 30;
  std::string synth_out;
  CommonOpts synth_common;
  synth->add_option("--task", synth_task, "Task kind")->required();
  synth->add_option("--n", synth_n, "Number of graphs");
  synth->add_option("--nodes-lo", synth_nodes_lo, "Minimum nodes per graph");
  synth->add_option("--nodes-hi", synth_nodes_hi, "Maximum nodes per graph");
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  add_common_flags(synth, synth_common, false);

  // --- train ---
  auto* train = app.add_subcommand("train", "Train one model on a dataset");
  std::string train_data, train_task, train_model_str, train_config;
  int train_layers = 1, train_hidden = 16, train_grid = 3, train_spline = 3;
  double train_dropout = 0.0;
  CommonOpts train_common;
  train->add_option("--data", train_data, "Dataset path")->required();
  auto* train_task_opt = train->add_option("--task", train_task, "Task kind");
  auto* train_model_opt = train->add_option("--model", train_model_str, "Layer kind");
  train->add_option("--config", train_config, "JSON config file");
  auto* train_layers_opt = train->add_option("--layers", train_layers, "Hidden blocks");
  auto* train_hidden_opt = train->add_option("--hidden", train_hidden, "Hidden width");
  auto* train_dropout_opt = train->add_option("--dropout", train_dropout, "Dropout rate");
  auto* train_grid_opt = train->add_option("--grid", train_grid, "Spline grid size");
  auto* train_spline_opt = train->add_option("--spline", train_spline, "Spline order");
  CommonFlagHandles train_handles = add_common_flags(train, train_common, true);

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "test";
  CommonOpts eval_common;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Dataset path")->required();
  eval->add_option("--split", eval_split, "train, val, test, or all");
  CommonFlagHandles eval_handles = add_common_flags(eval, eval_common, false);

  // --- benchmark ---
  auto* bench = app.add_subcommand("benchmark",
                                   "Train several model kinds over several seeds");
  std::string bench_data, bench_task, bench_config;
  std::vector<std::string> bench_models;
  int bench_seeds = 3;
  int bench_layers = 1, bench_hidden = 16, bench_grid = 3, bench_spline = 3;
  double bench_dropout = 0.0;
  CommonOpts bench_common;
  bench->add_option("--data", bench_data, "Dataset path")->required();
  auto* bench_task_opt = bench->add_option("--task", bench_task, "Task kind");
  bench_task_opt->required();
  auto* bench_models_opt =
      bench->add_option("--models", bench_models, "Layer kinds (comma separated)")
          ->required()
          ->delimiter(',');
  bench->add_option("--config", bench_config, "JSON config file");
  bench->add_option("--seeds", bench_seeds, "Seeds per model")->check(CLI::PositiveNumber);
  auto* bench_layers_opt = bench->add_option("--layers", bench_layers, "Hidden blocks");
  auto* bench_hidden_opt = bench->add_option("--hidden", bench_hidden, "Hidden width");
  auto* bench_dropout_opt = bench->add_option("--dropout", bench_dropout, "Dropout rate");
  auto* bench_grid_opt = bench->add_option("--grid", bench_grid, "Spline grid size");
  auto* bench_spline_opt = bench->add_option("--spline", bench_spline, "Spline order");
  CommonFlagHandles bench_handles = add_common_flags(bench, bench_common, true);

  // --- hpsearch ---
  auto* search = app.add_subcommand("hpsearch",
                                    "Random hyperparameter search on one model kind");
  std::string search_data, search_task, search_model;
  int search_trials = default_search_trials;
  CommonOpts search_common;
  search->add_option("--data", search_data, "Dataset path")->required();
  search->add_option("--task", search_task, "Task kind")->required();
  search->add_option("--model", search_model, "Layer kind")->required();
  search->add_option("--trials", search_trials, "Trial count")->check(CLI::PositiveNumber);
  CommonFlagHandles search_handles = add_common_flags(search, search_common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*synth) {
      return cmd_synth(synth_task, synth_n, synth_nodes_lo, synth_nodes_hi,
                       synth_out, synth_common.seed);
    }
    if (*train) {
      ResolvedTrainRequest req = resolve_configs(
          train_config, train_task, train_model_str, train_common, train_handles,
          train_model_opt, train_task_opt, train_layers, train_layers_opt,
          train_hidden, train_hidden_opt, train_dropout, train_dropout_opt,
          train_grid, train_grid_opt, train_spline, train_spline_opt);
      return cmd_train(train_data, req, train_common);
    }
    if (*eval) {
      return cmd_eval(eval_ckpt, eval_data, eval_split, eval_common,
                      eval_handles.out_dir->count() > 0);
    }
    if (*bench) {
      (void)bench_models_opt;
      ResolvedTrainRequest req = resolve_configs(
          bench_config, bench_task, "", bench_common, bench_handles,
          /*model_opt=*/nullptr, bench_task_opt, bench_layers, bench_layers_opt,
          bench_hidden, bench_hidden_opt, bench_dropout, bench_dropout_opt,
          bench_grid, bench_grid_opt, bench_spline, bench_spline_opt);
      return cmd_benchmark(bench_data, bench_task, bench_models, bench_seeds, req,
                           bench_common);
    }
    if (*search) {
      ResolvedTrainRequest req;
      req.train.seed = search_common.seed;
      req.train.max_epochs = search_common.max_epochs;
      req.train.patience = search_common.patience;
      req.train.batch_size = search_common.batch_size;
      req.train.learning_rate = search_common.learning_rate;
      (void)search_handles;
      return cmd_hpsearch(search_data, search_task, search_model, search_trials,
                          req, search_common);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  }
  return exit_usage;
}
