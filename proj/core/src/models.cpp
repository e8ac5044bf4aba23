#include "kagnn/models.hpp"

#include <cmath>
#include <stdexcept>

namespace kagnn {

using ad::Tensor;

bool is_kan_kind(LayerKind k) {
  return k == LayerKind::kagcn || k == LayerKind::kagin || k == LayerKind::kaedgecnn;
}

LayerKind mlp_counterpart(LayerKind k) {
  switch (k) {
    case LayerKind::kagcn: return LayerKind::gcn;
    case LayerKind::kagin: return LayerKind::gin;
    case LayerKind::kaedgecnn: return LayerKind::edgecnn;
    case LayerKind::gcn: return LayerKind::kagcn;
    case LayerKind::gin: return LayerKind::kagin;
    case LayerKind::edgecnn: return LayerKind::kaedgecnn;
  }
  throw std::logic_error("unknown layer kind");
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::gcn: return "gcn";
    case LayerKind::gin: return "gin";
    case LayerKind::edgecnn: return "edgecnn";
    case LayerKind::kagcn: return "kagcn";
    case LayerKind::kagin: return "kagin";
    case LayerKind::kaedgecnn: return "kaedgecnn";
  }
  throw std::logic_error("unknown layer kind");
}

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::node_readout: return "node_readout";
    case HeadKind::graph_pool: return "graph_pool";
    case HeadKind::edge_dot: return "edge_dot";
  }
  throw std::logic_error("unknown head kind");
}

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::node_class: return "node-class";
    case TaskKind::graph_class: return "graph-class";
    case TaskKind::edge_reg: return "edge-reg";
    case TaskKind::graph_reg: return "graph-reg";
    case TaskKind::node_reg: return "node-reg";
  }
  throw std::logic_error("unknown task kind");
}

std::optional<LayerKind> layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::gcn, LayerKind::gin, LayerKind::edgecnn,
                      LayerKind::kagcn, LayerKind::kagin, LayerKind::kaedgecnn})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::optional<TaskKind> task_kind_from_string(const std::string& s) {
  for (TaskKind t : {TaskKind::node_class, TaskKind::graph_class, TaskKind::edge_reg,
                     TaskKind::graph_reg, TaskKind::node_reg})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

HeadKind head_for_task(TaskKind t) {
  switch (t) {
    case TaskKind::node_class:
    case TaskKind::node_reg: return HeadKind::node_readout;
    case TaskKind::graph_class:
    case TaskKind::graph_reg: return HeadKind::graph_pool;
    case TaskKind::edge_reg: return HeadKind::edge_dot;
  }
  throw std::logic_error("unknown task kind");
}

std::vector<std::string> validate_config(const ModelConfig& c) {
  std::vector<std::string> problems;
  if (c.num_layers < 1) problems.push_back("num_layers must be >= 1");
  if (c.hidden_dim < 1) problems.push_back("hidden_dim must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0))
    problems.push_back("dropout must lie in [0, 1)");
  if (c.in_dim < 1) problems.push_back("in_dim must be >= 1");
  if (c.out_dim < 1 && c.head != HeadKind::edge_dot)
    problems.push_back("out_dim must be >= 1");
  if (is_kan_kind(c.layer_kind)) {
    if (c.grid_size < 1) problems.push_back("grid_size must be >= 1");
    if (c.spline_order < 0) problems.push_back("spline_order must be >= 0");
  } else if (c.grid_size != default_grid_size ||
             c.spline_order != default_spline_order) {
    problems.push_back("grid_size/spline_order must stay at defaults for " +
                       to_string(c.layer_kind));
  }
  return problems;
}

std::vector<std::string> validate_search_ranges(const ModelConfig& c) {
  std::vector<std::string> problems = validate_config(c);
  auto in_range = [&](int v, int lo, int hi, const char* name) {
    if (v < lo || v > hi)
      problems.push_back(std::string(name) + " outside search range [" +
                         std::to_string(lo) + ", " + std::to_string(hi) + "]");
  };
  in_range(c.num_layers, 1, 3, "num_layers");
  in_range(c.hidden_dim, 16, 64, "hidden_dim");
  if (c.dropout < 0.0 || c.dropout > 0.5)
    problems.push_back("dropout outside search range [0, 0.5]");
  if (is_kan_kind(c.layer_kind)) {
    in_range(c.grid_size, 3, 5, "grid_size");
    in_range(c.spline_order, 3, 5, "spline_order");
  }
  return problems;
}

// ----- construction -----

namespace {

Tensor init_linear_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({fan_in, fan_out}, std::move(v), true);
}

Tensor init_bias(std::size_t fan_in, std::size_t dim, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({dim}, std::move(v), true);
}

Mlp make_mlp(int in, int width, int out, Rng& rng) {
  Mlp m;
  m.w1 = init_linear_weight(static_cast<std::size_t>(in),
                            static_cast<std::size_t>(width), rng);
  m.b1 = init_bias(static_cast<std::size_t>(in), static_cast<std::size_t>(width), rng);
  m.w2 = init_linear_weight(static_cast<std::size_t>(width),
                            static_cast<std::size_t>(out), rng);
  m.b2 = init_bias(static_cast<std::size_t>(width), static_cast<std::size_t>(out), rng);
  return m;
}

}  // namespace

Model build_model(const ModelConfig& c, Rng& rng) {
  auto problems = validate_config(c);
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw std::invalid_argument(msg);
  }
  Model m;
  m.config = c;
  int din = c.in_dim;
  for (int l = 0; l < c.num_layers; ++l) {
    LayerParams lp;
    int dout = c.hidden_dim;
    switch (c.layer_kind) {
      case LayerKind::gcn:
        lp.gcn_weight = init_linear_weight(static_cast<std::size_t>(din),
                                           static_cast<std::size_t>(dout), rng);
        break;
      case LayerKind::gin:
        lp.mlp = make_mlp(din, c.hidden_dim, dout, rng);
        lp.bn = ad::BatchNorm::make(static_cast<std::size_t>(dout));
        break;
      case LayerKind::edgecnn:
        lp.mlp = make_mlp(2 * din, c.hidden_dim, dout, rng);
        lp.bn = ad::BatchNorm::make(static_cast<std::size_t>(dout));
        break;
      case LayerKind::kagcn:
        lp.kan = kan::make_kan_layer(din, dout, c.grid_size, c.spline_order, rng);
        break;
      case LayerKind::kagin:
        lp.kan = kan::make_kan_layer(din, dout, c.grid_size, c.spline_order, rng);
        lp.bn = ad::BatchNorm::make(static_cast<std::size_t>(dout));
        break;
      case LayerKind::kaedgecnn:
        lp.kan = kan::make_kan_layer(2 * din, dout, c.grid_size, c.spline_order, rng);
        lp.bn = ad::BatchNorm::make(static_cast<std::size_t>(dout));
        break;
    }
    m.params.layers.push_back(std::move(lp));
    din = c.hidden_dim;
  }
  if (c.head != HeadKind::edge_dot) {
    if (is_kan_kind(c.layer_kind)) {
      m.params.head.kan =
          kan::make_kan_layer(c.hidden_dim, c.out_dim, c.grid_size, c.spline_order, rng);
    } else {
      m.params.head.lin_w = init_linear_weight(static_cast<std::size_t>(c.hidden_dim),
                                               static_cast<std::size_t>(c.out_dim), rng);
      m.params.head.lin_b = init_bias(static_cast<std::size_t>(c.hidden_dim),
                                      static_cast<std::size_t>(c.out_dim), rng);
    }
  }
  return m;
}

namespace {

template <typename ModelT, typename Fn>
void visit_params(ModelT& m, const Fn& fn) {
  for (auto& layer : m.params.layers) {
    if (layer.gcn_weight) fn(*layer.gcn_weight);
    if (layer.mlp) {
      fn(layer.mlp->w1);
      fn(layer.mlp->b1);
      fn(layer.mlp->w2);
      fn(layer.mlp->b2);
    }
    if (layer.kan) {
      fn(layer.kan->base_weight);
      fn(layer.kan->spline_weight);
      fn(layer.kan->spline_scaler);
    }
    if (layer.bn) {
      fn(layer.bn->gamma);
      fn(layer.bn->beta);
    }
  }
  auto& head = m.params.head;
  if (head.kan) {
    fn(head.kan->base_weight);
    fn(head.kan->spline_weight);
    fn(head.kan->spline_scaler);
  }
  if (head.lin_w) fn(*head.lin_w);
  if (head.lin_b) fn(*head.lin_b);
}

}  // namespace

void for_each_param(Model& m, const std::function<void(Tensor&)>& fn) {
  visit_params(m, fn);
}

void for_each_param(const Model& m, const std::function<void(const Tensor&)>& fn) {
  visit_params(m, fn);
}

std::int64_t model_param_count(const ModelConfig& c) {
  std::int64_t total = 0;
  int din = c.in_dim;
  auto mlp_count = [&](int in, int out) {
    return static_cast<std::int64_t>(in) * c.hidden_dim + c.hidden_dim +
           static_cast<std::int64_t>(c.hidden_dim) * out + out;
  };
  for (int l = 0; l < c.num_layers; ++l) {
    int dout = c.hidden_dim;
    switch (c.layer_kind) {
      case LayerKind::gcn:
        total += static_cast<std::int64_t>(din) * dout;
        break;
      case LayerKind::gin:
        total += mlp_count(din, dout) + 2 * dout;
        break;
      case LayerKind::edgecnn:
        total += mlp_count(2 * din, dout) + 2 * dout;
        break;
      case LayerKind::kagcn:
        total += kan::kan_param_count(din, dout, c.grid_size, c.spline_order);
        break;
      case LayerKind::kagin:
        total += kan::kan_param_count(din, dout, c.grid_size, c.spline_order) + 2 * dout;
        break;
      case LayerKind::kaedgecnn:
        total += kan::kan_param_count(2 * din, dout, c.grid_size, c.spline_order) +
                 2 * dout;
        break;
    }
    din = c.hidden_dim;
  }
  if (c.head != HeadKind::edge_dot) {
    if (is_kan_kind(c.layer_kind))
      total += kan::kan_param_count(c.hidden_dim, c.out_dim, c.grid_size, c.spline_order);
    else
      total += static_cast<std::int64_t>(c.hidden_dim) * c.out_dim + c.out_dim;
  }
  return total;
}

std::int64_t enumerate_param_count(const Model& m) {
  std::int64_t total = 0;
  for_each_param(m, [&](const Tensor& t) { total += static_cast<std::int64_t>(t.numel()); });
  return total;
}

// ----- layer operations -----

ad::Tensor gcn_layer(const Graph& g, const Tensor& h, const Tensor& w) {
  std::vector<int> deg = degrees(g);
  Tensor agg = neighbor_sum(g, h, true, [&deg](int a, int b) {
    return degree_coefficient(deg, a, b);
  });
  return ad::matmul(agg, w);
}

ad::Tensor gin_aggregate(const Graph& g, const Tensor& h, double eps) {
  return ad::add(ad::scale(h, 1.0 + eps), neighbor_sum(g, h, false));
}

ad::Tensor mlp_forward(const Tensor& x, const Mlp& mlp) {
  Tensor h = ad::add_rowvec(ad::matmul(x, mlp.w1), mlp.b1);
  h = ad::silu(h);
  return ad::add_rowvec(ad::matmul(h, mlp.w2), mlp.b2);
}

ad::Tensor gin_layer(const Graph& g, const Tensor& h, const Mlp& mlp, double eps) {
  return mlp_forward(gin_aggregate(g, h, eps), mlp);
}

namespace {

// concat(h_i, h_j - h_i) rows for every stored edge (i, j).
Tensor edge_messages_input(const Graph& g, const Tensor& h) {
  std::vector<int> srcs, dsts;
  srcs.reserve(g.edges.size());
  dsts.reserve(g.edges.size());
  for (const auto& [i, j] : g.edges) {
    srcs.push_back(i);
    dsts.push_back(j);
  }
  Tensor hi = ad::gather_rows(h, srcs);
  Tensor hj = ad::gather_rows(h, dsts);
  return ad::concat_cols(hi, ad::sub(hj, hi));
}

Tensor edge_messages_to_nodes(const Graph& g, const Tensor& messages) {
  std::vector<int> srcs;
  srcs.reserve(g.edges.size());
  for (const auto& [i, j] : g.edges) srcs.push_back(i);
  return ad::scatter_sum_rows(messages, srcs, static_cast<std::size_t>(g.num_nodes));
}

}  // namespace

ad::Tensor edgecnn_layer(const Graph& g, const Tensor& h, const Mlp& mlp) {
  return edge_messages_to_nodes(g, mlp_forward(edge_messages_input(g, h), mlp));
}

ad::Tensor kagcn_layer(const Graph& g, const Tensor& h, const kan::KanLayer& kan) {
  std::vector<int> deg = degrees(g);
  Tensor agg = neighbor_sum(g, h, true, [&deg](int a, int b) {
    return degree_coefficient(deg, a, b);
  });
  return kan_layer_forward(agg, kan);
}

ad::Tensor kagin_layer(const Graph& g, const Tensor& h, const kan::KanLayer& kan,
                       double eps) {
  return kan_layer_forward(gin_aggregate(g, h, eps), kan);
}

ad::Tensor kaedgecnn_layer(const Graph& g, const Tensor& h, const kan::KanLayer& kan) {
  return edge_messages_to_nodes(g, kan_layer_forward(edge_messages_input(g, h), kan));
}

ad::Tensor hidden_block(LayerKind kind, const Graph& g, const Tensor& h,
                        LayerParams& layer, double dropout_p, double eps,
                        bool training, Rng& rng) {
  Tensor out;
  switch (kind) {
    case LayerKind::gcn:
      out = ad::silu(gcn_layer(g, h, *layer.gcn_weight));
      break;
    case LayerKind::gin:
      out = ad::batchnorm(gin_layer(g, h, *layer.mlp, eps), *layer.bn, training);
      break;
    case LayerKind::edgecnn:
      out = ad::silu(
          ad::batchnorm(edgecnn_layer(g, h, *layer.mlp), *layer.bn, training));
      break;
    case LayerKind::kagcn:
      out = ad::silu(kagcn_layer(g, h, *layer.kan));
      break;
    case LayerKind::kagin:
      out = ad::batchnorm(kagin_layer(g, h, *layer.kan, eps), *layer.bn, training);
      break;
    case LayerKind::kaedgecnn:
      out = ad::silu(
          ad::batchnorm(kaedgecnn_layer(g, h, *layer.kan), *layer.bn, training));
      break;
  }
  return ad::dropout(out, dropout_p, training, rng);
}

// ----- heads -----

ad::Tensor mean_pool_nodes(const Tensor& h, const std::vector<int>& node_graph,
                           int num_graphs) {
  return ad::segment_mean_rows(h, node_graph, static_cast<std::size_t>(num_graphs));
}

namespace {

Tensor output_layer(const HeadParams& head, const Tensor& x) {
  if (head.kan) return kan_layer_forward(x, *head.kan);
  return ad::add_rowvec(ad::matmul(x, *head.lin_w), *head.lin_b);
}

}  // namespace

ad::Tensor apply_head(const Model& m, const Graph& g, const Tensor& h,
                      const std::vector<int>& node_graph, int num_graphs) {
  switch (m.config.head) {
    case HeadKind::node_readout:
      return output_layer(m.params.head, h);
    case HeadKind::graph_pool:
      return output_layer(m.params.head, mean_pool_nodes(h, node_graph, num_graphs));
    case HeadKind::edge_dot: {
      std::vector<int> srcs, dsts;
      srcs.reserve(g.edges.size());
      dsts.reserve(g.edges.size());
      for (const auto& [i, j] : g.edges) {
        srcs.push_back(i);
        dsts.push_back(j);
      }
      Tensor hi = ad::gather_rows(h, srcs);
      Tensor hj = ad::gather_rows(h, dsts);
      return ad::row_sum(ad::mul(hi, hj));
    }
  }
  throw std::logic_error("unknown head kind");
}

ad::Tensor model_forward(Model& m, const Graph& g, const std::vector<int>& node_graph,
                         int num_graphs, bool training, Rng& rng) {
  if (g.feature_dim != m.config.in_dim)
    throw std::invalid_argument("model_forward: feature dim " +
                                std::to_string(g.feature_dim) + " but model expects " +
                                std::to_string(m.config.in_dim));
  Tensor h = Tensor::from({static_cast<std::size_t>(g.num_nodes),
                           static_cast<std::size_t>(g.feature_dim)},
                          g.features);
  for (auto& layer : m.params.layers)
    h = hidden_block(m.config.layer_kind, g, h, layer, m.config.dropout,
                     m.config.epsilon, training, rng);
  return apply_head(m, g, h, node_graph, num_graphs);
}

}  // namespace kagnn
