#ifndef KAGNN_MODELS_HPP
#define KAGNN_MODELS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kagnn/graph.hpp"
#include "kagnn/kan.hpp"
#include "kagnn/rng.hpp"
#include "kagnn/tensor.hpp"

namespace kagnn {

enum class LayerKind { gcn, gin, edgecnn, kagcn, kagin, kaedgecnn };
enum class HeadKind { node_readout, graph_pool, edge_dot };
enum class TaskKind { node_class, graph_class, edge_reg, graph_reg, node_reg };

bool is_kan_kind(LayerKind k);
// Counterpart with splines swapped for plain transforms (and back).
LayerKind mlp_counterpart(LayerKind k);

std::string to_string(LayerKind k);
std::string to_string(HeadKind h);
std::string to_string(TaskKind t);
std::optional<LayerKind> layer_kind_from_string(const std::string& s);
std::optional<TaskKind> task_kind_from_string(const std::string& s);

// Node-level predictions read each node, graph-level predictions pool, and
// edge regression scores node pairs.
HeadKind head_for_task(TaskKind t);

struct ModelConfig {
  LayerKind layer_kind = LayerKind::kagcn;
  int num_layers = 1;
  int hidden_dim = 16;
  double dropout = 0.0;
  // Spline shape; meaningful for KAN kinds only and must stay at the
  // defaults below for the others.
  int grid_size = 3;
  int spline_order = 3;
  HeadKind head = HeadKind::node_readout;
  int in_dim = 0;
  int out_dim = 0;
  double epsilon = 0.0;  // self-feature weight of the gin family
};

inline constexpr int default_grid_size = 3;
inline constexpr int default_spline_order = 3;

// All structural violations, one message each; empty means usable.
std::vector<std::string> validate_config(const ModelConfig& c);
// Extra bounds applied to sampled configs: layers 1..3, hidden 16..64,
// dropout 0..0.5, grid 3..5, spline 3..5.
std::vector<std::string> validate_search_ranges(const ModelConfig& c);

// ----- parameters -----

// linear -> silu -> linear with biases.
struct Mlp {
  ad::Tensor w1;  // [in, width]
  ad::Tensor b1;  // [width]
  ad::Tensor w2;  // [width, out]
  ad::Tensor b2;  // [out]
};

struct LayerParams {
  std::optional<ad::Tensor> gcn_weight;  // [in, out]
  std::optional<Mlp> mlp;
  std::optional<kan::KanLayer> kan;
  std::optional<ad::BatchNorm> bn;
};

struct HeadParams {
  std::optional<ad::Tensor> lin_w;  // [hidden, out]
  std::optional<ad::Tensor> lin_b;  // [out]
  std::optional<kan::KanLayer> kan;
};

struct ModelParams {
  std::vector<LayerParams> layers;
  HeadParams head;
};

struct Model {
  ModelConfig config;
  ModelParams params;
};

// Seeded parameter construction; the draw order is fixed (layers in order,
// head last) so equal seeds give equal models.
Model build_model(const ModelConfig& c, Rng& rng);

// Visits every trainable tensor in the fixed canonical order used by the
// optimizer and the checkpoint format.
void for_each_param(Model& m, const std::function<void(ad::Tensor&)>& fn);
void for_each_param(const Model& m, const std::function<void(const ad::Tensor&)>& fn);

// Closed-form trainable-parameter total for a config.
std::int64_t model_param_count(const ModelConfig& c);
// Runtime total over the actual tensors.
std::int64_t enumerate_param_count(const Model& m);

// ----- layer operations -----

// Symmetric-normalized convolution with virtual self-loops:
// out = A_hat * h * w, evaluated by edge iteration.
ad::Tensor gcn_layer(const Graph& g, const ad::Tensor& h, const ad::Tensor& w);

// (1+eps) * h[v] + sum of neighbor rows; shared by both gin variants.
ad::Tensor gin_aggregate(const Graph& g, const ad::Tensor& h, double eps);
ad::Tensor gin_layer(const Graph& g, const ad::Tensor& h, const Mlp& mlp, double eps);

// Messages m_ij = f(concat(h_i, h_j - h_i)) over stored edges (i,j), summed
// into node i.
ad::Tensor edgecnn_layer(const Graph& g, const ad::Tensor& h, const Mlp& mlp);

// Spline-transform versions of the three above.
ad::Tensor kagcn_layer(const Graph& g, const ad::Tensor& h, const kan::KanLayer& kan);
ad::Tensor kagin_layer(const Graph& g, const ad::Tensor& h, const kan::KanLayer& kan,
                       double eps);
ad::Tensor kaedgecnn_layer(const Graph& g, const ad::Tensor& h,
                           const kan::KanLayer& kan);

ad::Tensor mlp_forward(const ad::Tensor& x, const Mlp& mlp);

// One hidden block: convolution plus the family's normalization, activation,
// and dropout. gcn family: silu then dropout; gin family: batchnorm then
// dropout; edgecnn family: batchnorm, silu, then dropout.
ad::Tensor hidden_block(LayerKind kind, const Graph& g, const ad::Tensor& h,
                        LayerParams& layer, double dropout_p, double eps,
                        bool training, Rng& rng);

// ----- heads -----

// Column-mean of each graph's node rows; rows follow graph ids.
ad::Tensor mean_pool_nodes(const ad::Tensor& h, const std::vector<int>& node_graph,
                           int num_graphs);

// node_readout: per-node output layer. graph_pool: pooled then output layer.
// edge_dot: per stored edge the dot product of its endpoint rows.
ad::Tensor apply_head(const Model& m, const Graph& g, const ad::Tensor& h,
                      const std::vector<int>& node_graph, int num_graphs);

// Full forward pass: features -> hidden blocks -> head. node_graph maps each
// node to its graph id (all zero for a single graph).
ad::Tensor model_forward(Model& m, const Graph& g, const std::vector<int>& node_graph,
                         int num_graphs, bool training, Rng& rng);

}  // namespace kagnn

#endif
