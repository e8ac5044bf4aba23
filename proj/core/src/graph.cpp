#include "kagnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kagnn {

std::vector<std::string> validate_graph(const Graph& g) {
  std::vector<std::string> violations;
  auto report = [&](std::string msg) { violations.push_back(std::move(msg)); };

  if (g.num_nodes < 0) report("num_nodes is negative");
  if (g.feature_dim < 0) report("feature_dim is negative");
  std::size_t want_feat =
      static_cast<std::size_t>(std::max(g.num_nodes, 0)) * std::max(g.feature_dim, 0);
  if (g.features.size() != want_feat)
    report("features has " + std::to_string(g.features.size()) +
           " values, expected " + std::to_string(want_feat));

  bool endpoints_ok = true;
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    auto [u, v] = g.edges[i];
    if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes) {
      report("edge " + std::to_string(i) + " endpoint out of range: (" +
             std::to_string(u) + ", " + std::to_string(v) + ")");
      endpoints_ok = false;
      continue;
    }
    if (u == v) report("edge " + std::to_string(i) + " is a self-loop on node " +
                       std::to_string(u));
    if (!seen.insert({u, v}).second)
      report("edge (" + std::to_string(u) + ", " + std::to_string(v) +
             ") stored more than once");
  }
  if (endpoints_ok) {
    for (const auto& e : seen)
      if (!seen.count({e.second, e.first}))
        report("edge (" + std::to_string(e.first) + ", " + std::to_string(e.second) +
               ") lacks its reverse orientation");
  }

  if (!g.edge_attr.empty() && g.edge_attr.size() != g.edges.size())
    report("edge_attr has " + std::to_string(g.edge_attr.size()) +
           " values, expected one per stored edge (" +
           std::to_string(g.edges.size()) + ")");

  if (const auto* nl = std::get_if<NodeLabels>(&g.targets)) {
    if (nl->values.size() != static_cast<std::size_t>(g.num_nodes))
      report("node label count does not match num_nodes");
  } else if (const auto* nv = std::get_if<NodeVectors>(&g.targets)) {
    if (nv->dim <= 0 ||
        nv->values.size() != static_cast<std::size_t>(g.num_nodes) * nv->dim)
      report("node vector target shape does not match num_nodes x dim");
  } else if (const auto* es = std::get_if<EdgeScalars>(&g.targets)) {
    if (es->values.size() != g.edges.size())
      report("edge scalar target count does not match stored edge count");
  } else if (const auto* gv = std::get_if<GraphVector>(&g.targets)) {
    if (gv->values.empty()) report("graph vector target is empty");
  }

  return violations;
}

std::vector<int> degrees(const Graph& g) {
  std::vector<int> deg(static_cast<std::size_t>(g.num_nodes), 0);
  for (const auto& [u, v] : g.edges) deg[static_cast<std::size_t>(u)]++;
  return deg;
}

double degree_coefficient(const std::vector<int>& degs, int u, int v) {
  double du = static_cast<double>(degs[static_cast<std::size_t>(u)]) + 1.0;
  double dv = static_cast<double>(degs[static_cast<std::size_t>(v)]) + 1.0;
  return 1.0 / std::sqrt(du * dv);
}

double degree_coefficient(const Graph& g, int u, int v) {
  return degree_coefficient(degrees(g), u, v);
}

std::vector<double> normalized_adjacency(const Graph& g) {
  std::size_t n = static_cast<std::size_t>(g.num_nodes);
  std::vector<double> a(n * n, 0.0);
  std::vector<int> deg = degrees(g);
  for (std::size_t v = 0; v < n; ++v)
    a[v * n + v] = degree_coefficient(deg, static_cast<int>(v), static_cast<int>(v));
  for (const auto& [u, v] : g.edges)
    a[static_cast<std::size_t>(u) * n + static_cast<std::size_t>(v)] =
        degree_coefficient(deg, u, v);
  return a;
}

ad::Tensor neighbor_sum(const Graph& g, const ad::Tensor& h, bool include_self,
                        const std::function<double(int, int)>& weight) {
  if (h.shape().size() != 2 || h.rows() != static_cast<std::size_t>(g.num_nodes))
    throw std::invalid_argument("neighbor_sum: h must be [num_nodes, d]");
  std::size_t pairs = g.edges.size() + (include_self ? g.num_nodes : 0);
  std::vector<int> src, dst;
  std::vector<double> w;
  src.reserve(pairs);
  dst.reserve(pairs);
  w.reserve(pairs);
  // Edge order first, then self pairs: fixed order keeps accumulation
  // bitwise reproducible.
  for (const auto& [a, b] : g.edges) {
    src.push_back(b);
    dst.push_back(a);
    w.push_back(weight ? weight(a, b) : 1.0);
  }
  if (include_self)
    for (int v = 0; v < g.num_nodes; ++v) {
      src.push_back(v);
      dst.push_back(v);
      w.push_back(weight ? weight(v, v) : 1.0);
    }
  return ad::index_weighted_sum(h, src, dst, w,
                                static_cast<std::size_t>(g.num_nodes));
}

}  // namespace kagnn
