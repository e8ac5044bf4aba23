#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "kagnn/train.hpp"

namespace kagnn {

namespace {

void throw_joined(const std::string& what, const std::vector<std::string>& msgs) {
  std::string joined = what;
  for (const auto& m : msgs) {
    joined += "\n  - ";
    joined += m;
  }
  throw std::invalid_argument(joined);
}

bool classification_task(TaskKind t) {
  return t == TaskKind::node_class || t == TaskKind::graph_class;
}

void shuffle_in_place(std::vector<int>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::vector<std::string> validate_train_config(const TrainConfig& c) {
  std::vector<std::string> out;
  if (!(c.learning_rate > 0.0))
    out.push_back("learning_rate must be > 0");
  if (c.max_epochs < 1) out.push_back("max_epochs must be >= 1");
  if (c.patience < 1) out.push_back("patience must be >= 1");
  if (c.patience > c.max_epochs)
    out.push_back("patience must not exceed max_epochs");
  if (c.batch_size < 1) out.push_back("batch_size must be >= 1");
  return out;
}

// ----- optimizer -----

AdamState AdamState::make(const std::vector<ad::Tensor>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& p : params) {
    st.m.emplace_back(p.numel(), 0.0);
    st.v.emplace_back(p.numel(), 0.0);
  }
  st.t = 0;
  return st;
}

void adam_step(std::vector<ad::Tensor>& params, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::runtime_error("adam_step: state/parameter count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double>& g = params[i].grad();
    std::vector<double>& x = params[i].values_mut();
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    if (g.size() != m.size() || x.size() != m.size())
      throw std::runtime_error("adam_step: tensor shape changed since state init");
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double clip_gradients(const std::vector<ad::Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      ad::Tensor t = p;  // cheap handle copy; mutates the shared node
      for (double& g : t.grad_mut()) g *= s;
    }
  }
  return norm;
}

// ----- batching -----

GraphBatch make_batch(const std::vector<DatasetRecord>& records,
                      std::span<const int> indices, TaskKind task) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
  GraphBatch b;
  b.num_graphs = static_cast<int>(indices.size());

  // Establish shared shapes from the first record.
  const int n_records = static_cast<int>(records.size());
  for (int idx : indices) {
    if (idx < 0 || idx >= n_records)
      throw std::invalid_argument("make_batch: record index out of range");
  }
  const Graph& first = records[static_cast<std::size_t>(indices[0])].graph;
  b.graph.feature_dim = first.feature_dim;
  const bool want_attr = !first.edge_attr.empty();

  int node_offset = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const DatasetRecord& rec = records[static_cast<std::size_t>(indices[gi])];
    const Graph& g = rec.graph;
    if (g.feature_dim != b.graph.feature_dim)
      throw std::invalid_argument("make_batch: feature dimension mismatch at record " +
                                  rec.id);
    if (want_attr != !g.edge_attr.empty())
      throw std::invalid_argument(
          "make_batch: inconsistent edge attribute presence at record " + rec.id);

    b.graph.features.insert(b.graph.features.end(), g.features.begin(),
                            g.features.end());
    for (const auto& [u, v] : g.edges) {
      b.graph.edges.emplace_back(u + node_offset, v + node_offset);
    }
    b.graph.edge_attr.insert(b.graph.edge_attr.end(), g.edge_attr.begin(),
                             g.edge_attr.end());
    for (int n = 0; n < g.num_nodes; ++n) b.node_graph.push_back(gi);

    switch (task) {
      case TaskKind::node_class: {
        const auto* t = std::get_if<NodeLabels>(&g.targets);
        if (!t || static_cast<int>(t->values.size()) != g.num_nodes)
          throw std::invalid_argument("make_batch: record " + rec.id +
                                      " lacks per-node labels");
        b.labels.insert(b.labels.end(), t->values.begin(), t->values.end());
        break;
      }
      case TaskKind::graph_class: {
        const auto* t = std::get_if<GraphLabel>(&g.targets);
        if (!t)
          throw std::invalid_argument("make_batch: record " + rec.id +
                                      " lacks a graph label");
        b.labels.push_back(t->value);
        break;
      }
      case TaskKind::edge_reg: {
        const auto* t = std::get_if<EdgeScalars>(&g.targets);
        if (!t || t->values.size() != g.edges.size())
          throw std::invalid_argument("make_batch: record " + rec.id +
                                      " lacks per-edge targets");
        b.target_values.insert(b.target_values.end(), t->values.begin(),
                               t->values.end());
        b.target_rows += static_cast<int>(t->values.size());
        b.target_dim = 1;
        break;
      }
      case TaskKind::graph_reg: {
        const auto* t = std::get_if<GraphVector>(&g.targets);
        if (!t)
          throw std::invalid_argument("make_batch: record " + rec.id +
                                      " lacks a graph target vector");
        const int d = static_cast<int>(t->values.size());
        if (b.target_dim == 0) b.target_dim = d;
        if (d != b.target_dim || d == 0)
          throw std::invalid_argument("make_batch: target dimension mismatch at record " +
                                      rec.id);
        b.target_values.insert(b.target_values.end(), t->values.begin(),
                               t->values.end());
        b.target_rows += 1;
        break;
      }
      case TaskKind::node_reg: {
        const auto* t = std::get_if<NodeVectors>(&g.targets);
        if (!t || t->dim <= 0 ||
            static_cast<int>(t->values.size()) != g.num_nodes * t->dim)
          throw std::invalid_argument("make_batch: record " + rec.id +
                                      " lacks per-node target vectors");
        if (b.target_dim == 0) b.target_dim = t->dim;
        if (t->dim != b.target_dim)
          throw std::invalid_argument("make_batch: target dimension mismatch at record " +
                                      rec.id);
        b.target_values.insert(b.target_values.end(), t->values.begin(),
                               t->values.end());
        b.target_rows += g.num_nodes;
        break;
      }
    }
    node_offset += g.num_nodes;
  }
  b.graph.num_nodes = node_offset;
  return b;
}

ad::Tensor batch_loss(Model& m, const GraphBatch& b, LossKind loss, bool training,
                      Rng& rng) {
  ad::Tensor pred = model_forward(m, b.graph, b.node_graph, b.num_graphs, training, rng);
  if (loss == LossKind::cross_entropy) {
    if (b.labels.empty())
      throw std::invalid_argument("batch_loss: cross-entropy needs class labels");
    return ad::softmax_cross_entropy(pred, b.labels);
  }
  if (b.target_values.empty())
    throw std::invalid_argument("batch_loss: mse needs regression targets");
  return ad::mse_loss(pred, b.target_values);
}

// ----- evaluation -----

namespace {

// Appends predictions/targets of one batch in output-row order.
void collect_batch(Model& m, const GraphBatch& b, bool classify,
                   std::vector<int>& y_true, std::vector<int>& y_pred,
                   std::vector<double>& r_true, std::vector<double>& r_pred) {
  Rng unused(0);
  ad::Tensor pred =
      model_forward(m, b.graph, b.node_graph, b.num_graphs, false, unused);
  const std::vector<double>& pv = pred.values();
  if (classify) {
    const std::size_t c = pred.cols();
    const std::size_t rows = pred.rows();
    for (std::size_t r = 0; r < rows; ++r) {
      int arg = 0;
      double best = pv[r * c];
      for (std::size_t k = 1; k < c; ++k) {
        if (pv[r * c + k] > best) {
          best = pv[r * c + k];
          arg = static_cast<int>(k);
        }
      }
      y_pred.push_back(arg);
    }
    y_true.insert(y_true.end(), b.labels.begin(), b.labels.end());
  } else {
    r_pred.insert(r_pred.end(), pv.begin(), pv.end());
    r_true.insert(r_true.end(), b.target_values.begin(), b.target_values.end());
  }
}

}  // namespace

double evaluate_split(Model& m, const std::vector<DatasetRecord>& records,
                      std::span<const int> idx, TaskKind task, MetricKind metric,
                      int batch_size) {
  if (idx.empty()) throw std::invalid_argument("evaluate_split: empty split");
  if (batch_size < 1) throw std::invalid_argument("evaluate_split: batch_size < 1");
  const bool classify = metric == MetricKind::weighted_f1;
  if (classify != classification_task(task))
    throw std::invalid_argument("evaluate_split: metric does not fit the task");

  std::vector<int> y_true, y_pred;
  std::vector<double> r_true, r_pred;
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
    GraphBatch b = make_batch(records, idx.subspan(start, stop - start), task);
    collect_batch(m, b, classify, y_true, y_pred, r_true, r_pred);
  }
  if (classify) return weighted_f1(y_true, y_pred, m.config.out_dim);
  if (metric == MetricKind::mse) return mse(r_true, r_pred);
  return mae(r_true, r_pred);
}

// ----- model state snapshot -----

std::vector<std::vector<double>> snapshot_state(const Model& m) {
  std::vector<std::vector<double>> out;
  for_each_param(m, [&](const ad::Tensor& t) { out.push_back(t.values()); });
  for (const auto& layer : m.params.layers) {
    if (layer.bn) {
      out.push_back(layer.bn->running_mean);
      out.push_back(layer.bn->running_var);
    }
  }
  return out;
}

void restore_state(Model& m, const std::vector<std::vector<double>>& state) {
  std::size_t i = 0;
  auto take = [&]() -> const std::vector<double>& {
    if (i >= state.size())
      throw std::runtime_error("restore_state: snapshot too short");
    return state[i++];
  };
  for_each_param(m, [&](ad::Tensor& t) {
    const std::vector<double>& src = take();
    if (src.size() != t.numel())
      throw std::runtime_error("restore_state: tensor size mismatch");
    t.values_mut() = src;
  });
  for (auto& layer : m.params.layers) {
    if (layer.bn) {
      const std::vector<double>& rm = take();
      const std::vector<double>& rv = take();
      if (rm.size() != layer.bn->running_mean.size() ||
          rv.size() != layer.bn->running_var.size())
        throw std::runtime_error("restore_state: batchnorm size mismatch");
      layer.bn->running_mean = rm;
      layer.bn->running_var = rv;
    }
  }
  if (i != state.size())
    throw std::runtime_error("restore_state: snapshot has extra entries");
}

// ----- training loop -----

RunResult train_model(Model& m, const std::vector<DatasetRecord>& records,
                      std::span<const int> train_idx, std::span<const int> val_idx,
                      std::span<const int> test_idx, TaskKind task,
                      const TrainConfig& cfg, IngestionLog* ingestion) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  std::vector<std::string> errs = validate_train_config(cfg);
  if (train_idx.empty()) errs.push_back("train split is empty");
  if (val_idx.empty()) errs.push_back("validation split is empty");
  const bool classify = classification_task(task);
  if (classify != (cfg.loss_kind == LossKind::cross_entropy))
    errs.push_back("loss kind does not fit the task");
  if (classify != (cfg.metric_kind == MetricKind::weighted_f1))
    errs.push_back("metric kind does not fit the task");
  if (!errs.empty()) throw_joined("train_model: invalid configuration", errs);

  RunResult res;
  res.seed = cfg.seed;

  std::vector<ad::Tensor> params;
  for_each_param(m, [&](ad::Tensor& t) { params.push_back(t); });
  AdamState st = AdamState::make(params);
  AdamConfig acfg;
  acfg.lr = cfg.learning_rate;

  Rng root(cfg.seed);
  Rng shuffle_rng = root.stream(rng_streams::epoch_shuffle);
  Rng dropout_rng = root.stream(rng_streams::dropout);

  std::vector<int> order(train_idx.begin(), train_idx.end());
  const bool up = metric_improves_upward(cfg.metric_kind);
  double best = up ? -std::numeric_limits<double>::infinity()
                   : std::numeric_limits<double>::infinity();
  int since_improve = 0;
  std::vector<std::vector<double>> best_state;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);

    double loss_acc = 0.0;
    double weight_acc = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::span<const int> chunk(order.data() + start, stop - start);
      GraphBatch b = make_batch(records, chunk, task);
      if (ingestion && epoch == 1) {
        for (int idx : chunk)
          ingestion->train_ids.insert(records[static_cast<std::size_t>(idx)].id);
      }
      ad::Tensor loss = batch_loss(m, b, cfg.loss_kind, true, dropout_rng);
      const double lv = loss.item();
      if (!std::isfinite(lv) || std::fabs(lv) > divergence_loss_bound) {
        res.status = RunStatus::unstable;
        res.stop_epoch = epoch - 1;
        res.best_val_metric = best;
        res.wall_time_seconds = elapsed();
        return res;
      }
      ad::backward(loss);
      clip_gradients(params, gradient_clip_norm);
      adam_step(params, st, acfg);

      const double w = cfg.loss_kind == LossKind::cross_entropy
                           ? static_cast<double>(b.labels.size())
                           : static_cast<double>(b.target_values.size());
      loss_acc += lv * w;
      weight_acc += w;
    }
    res.epoch_train_loss.push_back(loss_acc / weight_acc);

    const double v = evaluate_split(m, records, val_idx, task, cfg.metric_kind,
                                    cfg.batch_size);
    if (ingestion && epoch == 1) {
      for (int idx : val_idx)
        ingestion->val_ids.insert(records[static_cast<std::size_t>(idx)].id);
    }
    res.epoch_val_metric.push_back(v);
    res.stop_epoch = epoch;
    if (!std::isfinite(v)) {
      res.status = RunStatus::unstable;
      res.best_val_metric = best;
      res.wall_time_seconds = elapsed();
      return res;
    }

    const bool improved = up ? v > best + improvement_tolerance
                             : v < best - improvement_tolerance;
    if (improved) {
      best = v;
      res.best_epoch = epoch;
      since_improve = 0;
      best_state = snapshot_state(m);
    } else {
      ++since_improve;
      if (since_improve >= cfg.patience) break;
    }
  }

  res.best_val_metric = best;
  if (!best_state.empty()) {
    restore_state(m, best_state);
    res.restored_best = true;
  }
  if (!test_idx.empty()) {
    res.test_metric =
        evaluate_split(m, records, test_idx, task, cfg.metric_kind, cfg.batch_size);
    res.test_eval_count = 1;
    if (ingestion) {
      for (int idx : test_idx)
        ingestion->test_ids.insert(records[static_cast<std::size_t>(idx)].id);
    }
  }
  res.wall_time_seconds = elapsed();
  return res;
}

// ----- multi-seed benchmark -----

BenchmarkRow run_benchmark(const ModelConfig& mc,
                           const std::vector<DatasetRecord>& records,
                           const Splits& splits, TaskKind task,
                           const TrainConfig& cfg, int n_seeds) {
  if (n_seeds < 1) throw std::invalid_argument("run_benchmark: n_seeds < 1");
  BenchmarkRow row;
  row.layer_kind = mc.layer_kind;
  row.task = task;
  row.metric = cfg.metric_kind;

  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    Rng seed_root(seed);
    Rng init_rng = seed_root.stream(rng_streams::model_init);
    Model model = build_model(mc, init_rng);
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    RunResult r = train_model(model, records, splits.train, splits.val, splits.test,
                              task, run_cfg);
    row.runs.push_back(std::move(r));
  }

  bool any_aborted = false;
  std::vector<double> xs;
  for (const auto& r : row.runs) {
    if (r.status == RunStatus::unstable)
      any_aborted = true;
    else
      xs.push_back(r.test_metric);
  }
  if (xs.empty()) {
    row.mean = std::numeric_limits<double>::quiet_NaN();
    row.stddev = std::numeric_limits<double>::quiet_NaN();
    row.unstable = true;
    return row;
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  const double sd =
      xs.size() > 1 ? std::sqrt(sq / static_cast<double>(xs.size() - 1)) : 0.0;
  row.mean = mean;
  row.stddev = sd;
  row.unstable = any_aborted || sd > mean;
  return row;
}

}  // namespace kagnn
