#ifndef KAGNN_GRAPH_HPP
#define KAGNN_GRAPH_HPP

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kagnn/tensor.hpp"

namespace kagnn {

// Supervision attached to a graph. Exactly one alternative is populated
// (monostate for unlabeled graphs).
struct GraphLabel {
  int value = 0;
};
struct GraphVector {
  std::vector<double> values;
};
struct NodeLabels {
  std::vector<int> values;  // one per node
};
struct NodeVectors {
  int dim = 0;
  std::vector<double> values;  // num_nodes x dim, row-major
};
struct EdgeScalars {
  std::vector<double> values;  // one per stored directed edge
};
using Targets = std::variant<std::monostate, GraphLabel, GraphVector, NodeLabels,
                             NodeVectors, EdgeScalars>;

// Undirected graph stored as a directed edge list that contains both
// orientations of every edge. Self-loops are never stored; layers that need
// them add virtual ones on the fly.
struct Graph {
  int num_nodes = 0;
  int feature_dim = 0;
  std::vector<double> features;            // num_nodes x feature_dim, row-major
  std::vector<std::pair<int, int>> edges;  // both (u,v) and (v,u) present
  std::vector<double> edge_attr;           // optional, aligned with edges
  Targets targets;

  double feature(int node, int f) const {
    return features[static_cast<std::size_t>(node) * feature_dim + f];
  }
};

// Every violated structural invariant, one message each: endpoint range,
// missing reverse orientation, stored self-loops, duplicate edges, feature
// and attribute shape, and target shape against num_nodes/edges.
std::vector<std::string> validate_graph(const Graph& g);

// Neighbor count per node (stored out-edges; equals undirected degree when
// the graph is valid).
std::vector<int> degrees(const Graph& g);

// 1 / sqrt((deg(u)+1) * (deg(v)+1)), the self-loop-augmented symmetric
// normalization weight.
double degree_coefficient(const Graph& g, int u, int v);
double degree_coefficient(const std::vector<int>& degs, int u, int v);

// Dense N x N matrix A_hat with entry (u,v) = degree_coefficient(u,v) when
// u == v or (u,v) is an edge, else 0. Reference implementation for tests and
// small-graph checks; the layers themselves iterate edges.
std::vector<double> normalized_adjacency(const Graph& g);

// Differentiable weighted neighbor aggregation:
// out[v] = sum over stored edges (v,u) of weight(v,u) * h[u]
//          (+ weight(v,v) * h[v] when include_self).
// weight null means all ones.
ad::Tensor neighbor_sum(const Graph& g, const ad::Tensor& h, bool include_self,
                        const std::function<double(int, int)>& weight = nullptr);

}  // namespace kagnn

#endif
