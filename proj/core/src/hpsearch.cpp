#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <utility>

#include "kagnn/hpsearch.hpp"

namespace kagnn {

std::vector<std::string> validate_search_space(const SearchSpace& s) {
  std::vector<std::string> out;
  if (!(s.lr_lo > 0.0) || !(s.lr_hi >= s.lr_lo))
    out.push_back("learning-rate range must satisfy 0 < lo <= hi");
  if (s.layers_lo < 1 || s.layers_hi < s.layers_lo)
    out.push_back("layer range must satisfy 1 <= lo <= hi");
  if (s.hidden_lo < 1 || s.hidden_hi < s.hidden_lo)
    out.push_back("hidden range must satisfy 1 <= lo <= hi");
  if (s.dropout_lo < 0.0 || s.dropout_hi < s.dropout_lo || s.dropout_hi >= 1.0)
    out.push_back("dropout range must satisfy 0 <= lo <= hi < 1");
  if (s.grid_lo < 1 || s.grid_hi < s.grid_lo)
    out.push_back("grid range must satisfy 1 <= lo <= hi");
  if (s.spline_lo < 0 || s.spline_hi < s.spline_lo)
    out.push_back("spline-order range must satisfy 0 <= lo <= hi");
  return out;
}

SampledConfig sample_config(const SearchSpace& space, LayerKind kind, TaskKind task,
                            int in_dim, int out_dim, const TrainConfig& base,
                            Rng& rng) {
  SampledConfig s;
  s.train = base;
  s.train.learning_rate =
      std::exp(rng.uniform(std::log(space.lr_lo), std::log(space.lr_hi)));
  s.train.loss_kind = loss_for_task(task);
  s.train.metric_kind = metric_for_task(task);

  s.model.layer_kind = kind;
  s.model.num_layers = rng.uniform_int(space.layers_lo, space.layers_hi);
  s.model.hidden_dim = rng.uniform_int(space.hidden_lo, space.hidden_hi);
  s.model.dropout = rng.uniform(space.dropout_lo, space.dropout_hi);
  if (is_kan_kind(kind)) {
    s.model.grid_size = rng.uniform_int(space.grid_lo, space.grid_hi);
    s.model.spline_order = rng.uniform_int(space.spline_lo, space.spline_hi);
  }
  s.model.head = head_for_task(task);
  s.model.in_dim = in_dim;
  s.model.out_dim = out_dim;
  return s;
}

SearchFailure::SearchFailure(std::vector<Trial> trials)
    : std::runtime_error("hyperparameter search failed: every trial was unstable"),
      trials_(std::move(trials)) {}

SearchResult run_search(const SearchSpace& space, LayerKind kind, TaskKind task,
                        const std::vector<DatasetRecord>& records,
                        const Splits& splits, const TrainConfig& base,
                        int n_trials, std::uint64_t seed, const TrainerFn& trainer,
                        IngestionLog* audit) {
  std::vector<std::string> errs = validate_search_space(space);
  if (n_trials < 1) errs.push_back("n_trials must be >= 1");
  if (splits.val.empty()) errs.push_back("dataset has no validation split");
  if (splits.train.empty()) errs.push_back("dataset has no training split");
  if (!errs.empty()) {
    std::string joined = "run_search: invalid request";
    for (const auto& e : errs) joined += "\n  - " + e;
    throw std::invalid_argument(joined);
  }

  const int in_dim = infer_in_dim(records);
  const int out_dim = infer_out_dim(records, task);

  TrainerFn train_fn = trainer;
  if (!train_fn) {
    train_fn = [&records, &splits, task](const SampledConfig& cfg,
                                         IngestionLog* log) {
      Rng seed_root(cfg.train.seed);
      Rng init_rng = seed_root.stream(rng_streams::model_init);
      Model model = build_model(cfg.model, init_rng);
      // The test split is withheld on purpose: trials only ever see
      // train and validation records.
      return train_model(model, records, splits.train, splits.val, {}, task,
                         cfg.train, log);
    };
  }

  Rng search_rng = Rng(seed).stream(rng_streams::search);
  SearchResult result;
  const bool up = metric_improves_upward(metric_for_task(task));
  double best_metric = up ? -std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::infinity();

  for (int i = 0; i < n_trials; ++i) {
    Trial t;
    t.index = i;
    t.cfg = sample_config(space, kind, task, in_dim, out_dim, base, search_rng);
    t.cfg.train.seed = base.seed + static_cast<std::uint64_t>(i);

    RunResult r = train_fn(t.cfg, audit);
    t.stop_epoch = r.stop_epoch;
    if (r.status == RunStatus::unstable) {
      t.status = TrialStatus::unstable;
      t.val_metric = std::numeric_limits<double>::quiet_NaN();
    } else {
      t.status = TrialStatus::ok;
      t.val_metric = r.best_val_metric;
      const bool better = up ? t.val_metric > best_metric : t.val_metric < best_metric;
      if (better) {
        best_metric = t.val_metric;
        result.best_index = i;
      }
    }
    result.trials.push_back(std::move(t));
  }

  if (result.best_index < 0) throw SearchFailure(std::move(result.trials));
  result.best = result.trials[static_cast<std::size_t>(result.best_index)].cfg;
  return result;
}

std::string format_trial_table(const std::vector<Trial>& trials) {
  std::string out =
      "trial        lr  layers  hidden  dropout  grid  spline  val_metric  "
      "stop_epoch  status\n";
  char line[256];
  for (const Trial& t : trials) {
    const ModelConfig& m = t.cfg.model;
    char grid[16] = "-";
    char spline[16] = "-";
    if (is_kan_kind(m.layer_kind)) {
      std::snprintf(grid, sizeof grid, "%d", m.grid_size);
      std::snprintf(spline, sizeof spline, "%d", m.spline_order);
    }
    char metric[32];
    if (std::isnan(t.val_metric))
      std::snprintf(metric, sizeof metric, "-");
    else
      std::snprintf(metric, sizeof metric, "%.6f", t.val_metric);
    std::snprintf(line, sizeof line,
                  "%5d  %8.6f  %6d  %6d  %7.4f  %4s  %6s  %10s  %10d  %s\n",
                  t.index, t.cfg.train.learning_rate, m.num_layers, m.hidden_dim,
                  m.dropout, grid, spline, metric, t.stop_epoch,
                  t.status == TrialStatus::ok ? "ok" : "unstable");
    out += line;
  }
  return out;
}

}  // namespace kagnn
