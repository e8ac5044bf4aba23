#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kagnn/data.hpp"

namespace kagnn {

namespace {

std::string record_id(TaskKind task, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "synth-%s-%06d", to_string(task).c_str(), index);
  return buf;
}

void add_undirected_edge(Graph& g, int u, int v) {
  g.edges.emplace_back(u, v);
  g.edges.emplace_back(v, u);
}

// Sparse Erdos-Renyi graph with expected degree about 2.5.
Graph random_sparse_graph(int n, Rng& rng) {
  Graph g;
  g.num_nodes = n;
  double p = n > 1 ? std::min(1.0, 2.5 / (n - 1)) : 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) add_undirected_edge(g, i, j);
  return g;
}

// Uniform points in [0, box]^2 joined when closer than radius; isolated
// nodes get an edge to their nearest neighbor so every node participates
// in message passing.
Graph random_geometric_graph(int n, double box, double radius, Rng& rng,
                             std::vector<double>& coords_out) {
  Graph g;
  g.num_nodes = n;
  coords_out.resize(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    coords_out[static_cast<std::size_t>(i) * 2] = rng.uniform(0.0, box);
    coords_out[static_cast<std::size_t>(i) * 2 + 1] = rng.uniform(0.0, box);
  }
  auto dist = [&](int a, int b) {
    double dx = coords_out[static_cast<std::size_t>(a) * 2] -
                coords_out[static_cast<std::size_t>(b) * 2];
    double dy = coords_out[static_cast<std::size_t>(a) * 2 + 1] -
                coords_out[static_cast<std::size_t>(b) * 2 + 1];
    return std::sqrt(dx * dx + dy * dy);
  };
  std::vector<bool> connected(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (dist(i, j) < radius) {
        add_undirected_edge(g, i, j);
        connected[static_cast<std::size_t>(i)] = true;
        connected[static_cast<std::size_t>(j)] = true;
      }
  for (int i = 0; i < n; ++i) {
    if (connected[static_cast<std::size_t>(i)] || n < 2) continue;
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = dist(i, j);
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    add_undirected_edge(g, i, nearest);
    connected[static_cast<std::size_t>(i)] = true;
    connected[static_cast<std::size_t>(nearest)] = true;
  }
  return g;
}

void fill_edge_distances(Graph& g, const std::vector<double>& coords) {
  g.edge_attr.clear();
  g.edge_attr.reserve(g.edges.size());
  for (const auto& [u, v] : g.edges) {
    double dx = coords[static_cast<std::size_t>(u) * 2] -
                coords[static_cast<std::size_t>(v) * 2];
    double dy = coords[static_cast<std::size_t>(u) * 2 + 1] -
                coords[static_cast<std::size_t>(v) * 2 + 1];
    g.edge_attr.push_back(std::sqrt(dx * dx + dy * dy));
  }
}

DatasetRecord make_node_class(int index, int n, Rng& rng) {
  DatasetRecord rec;
  rec.id = record_id(TaskKind::node_class, index);
  rec.graph = random_sparse_graph(n, rng);
  std::vector<int> deg = degrees(rec.graph);
  rec.graph.feature_dim = 4;
  rec.graph.features.resize(static_cast<std::size_t>(n) * 4);
  NodeLabels labels;
  labels.values.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    auto row = static_cast<std::size_t>(v) * 4;
    rec.graph.features[row] = deg[static_cast<std::size_t>(v)] + rng.uniform(-0.25, 0.25);
    for (int f = 1; f < 4; ++f) rec.graph.features[row + f] = rng.uniform(-1.0, 1.0);
    labels.values[static_cast<std::size_t>(v)] =
        std::min(deg[static_cast<std::size_t>(v)], 3);
  }
  rec.graph.targets = std::move(labels);
  return rec;
}

Graph motif_graph(int motif, int n) {
  Graph g;
  switch (motif) {
    case 0:  // path
      g.num_nodes = n;
      for (int i = 0; i + 1 < n; ++i) add_undirected_edge(g, i, i + 1);
      break;
    case 1:  // cycle
      g.num_nodes = std::max(n, 3);
      for (int i = 0; i + 1 < g.num_nodes; ++i) add_undirected_edge(g, i, i + 1);
      add_undirected_edge(g, g.num_nodes - 1, 0);
      break;
    case 2:  // star
      g.num_nodes = std::max(n, 2);
      for (int i = 1; i < g.num_nodes; ++i) add_undirected_edge(g, 0, i);
      break;
    case 3: {  // rectangular lattice, about n nodes
      int a = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(n))));
      int b = std::max(2, n / a);
      g.num_nodes = a * b;
      auto id = [b](int r, int c) { return r * b + c; };
      for (int r = 0; r < a; ++r)
        for (int c = 0; c < b; ++c) {
          if (c + 1 < b) add_undirected_edge(g, id(r, c), id(r, c + 1));
          if (r + 1 < a) add_undirected_edge(g, id(r, c), id(r + 1, c));
        }
      break;
    }
    default:
      throw std::logic_error("unknown motif");
  }
  return g;
}

DatasetRecord make_graph_class(int index, int n, Rng& rng) {
  DatasetRecord rec;
  rec.id = record_id(TaskKind::graph_class, index);
  int motif = index % 4;
  rec.graph = motif_graph(motif, n);
  rec.graph.feature_dim = 8;
  rec.graph.features.resize(static_cast<std::size_t>(rec.graph.num_nodes) * 8);
  // Channel 0 carries compressed degree so the motifs' degree profiles
  // (two endpoints vs. none, one hub, lattice interiors) reach the model
  // directly; log keeps star hubs from stretching the feature range so far
  // that the low-degree distinctions vanish after rescaling. The remaining
  // channels are distractor noise with a positive mean, which keeps
  // neighbor sums on the responsive side of the base activation.
  std::vector<int> deg = degrees(rec.graph);
  for (int v = 0; v < rec.graph.num_nodes; ++v) {
    auto row = static_cast<std::size_t>(v) * 8;
    rec.graph.features[row] = std::log1p(static_cast<double>(deg[static_cast<std::size_t>(v)]));
    for (int f = 1; f < 8; ++f) {
      double u = rng.uniform();
      rec.graph.features[row + f] = 1.0 - 2.0 * u * u;
    }
  }
  rec.graph.targets = GraphLabel{motif};
  return rec;
}

// Crystal-like clouds: a jittered square lattice with a per-graph spacing.
// Edges join points within 1.2 spacings, which admits exactly the four axis
// neighbors (the jitter is small enough that diagonals stay outside), so
// bond lengths hover near the graph's spacing and every node has a bond.
DatasetRecord make_edge_reg(int index, int n, Rng& rng) {
  DatasetRecord rec;
  rec.id = record_id(TaskKind::edge_reg, index);
  const double spacing = rng.uniform(0.4, 1.6);
  const double jitter = 0.05 * spacing;
  const int rows = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(n))));
  const int cols = (n + rows - 1) / rows;
  std::vector<double> coords(static_cast<std::size_t>(n) * 2);
  for (int v = 0; v < n; ++v) {
    const int r = v / cols;
    const int c = v % cols;
    coords[static_cast<std::size_t>(v) * 2] = c * spacing + rng.uniform(-jitter, jitter);
    coords[static_cast<std::size_t>(v) * 2 + 1] = r * spacing + rng.uniform(-jitter, jitter);
  }
  Graph& g = rec.graph;
  g.num_nodes = n;
  auto dist = [&](int a, int b) {
    double dx = coords[static_cast<std::size_t>(a) * 2] - coords[static_cast<std::size_t>(b) * 2];
    double dy = coords[static_cast<std::size_t>(a) * 2 + 1] -
                coords[static_cast<std::size_t>(b) * 2 + 1];
    return std::sqrt(dx * dx + dy * dy);
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (dist(i, j) < 1.2 * spacing) add_undirected_edge(g, i, j);
  fill_edge_distances(g, coords);
  // Features: exact coordinates, a phase-warped reading of the node's mean
  // bond length, and noise. The mean bond length summarizes the local
  // spacing at each endpoint, so an embedding dot product can recover
  // individual bond lengths — but the reading passes through a smooth
  // invertible oscillation (as sensed periodic signals do), so decoding it
  // takes a locally sharp response curve rather than a near-linear one.
  std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(n), 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    sum[static_cast<std::size_t>(g.edges[e].first)] += g.edge_attr[e];
    ++cnt[static_cast<std::size_t>(g.edges[e].first)];
  }
  const double pi = std::numbers::pi;
  const double period = 0.52;
  const double wobble = 0.9 * period / (2.0 * pi);  // keeps the warp invertible
  g.feature_dim = 4;
  g.features.resize(static_cast<std::size_t>(n) * 4);
  for (int v = 0; v < n; ++v) {
    auto row = static_cast<std::size_t>(v) * 4;
    auto sv = static_cast<std::size_t>(v);
    double s = cnt[sv] > 0 ? sum[sv] / cnt[sv] : 0.0;
    g.features[row] = coords[sv * 2];
    g.features[row + 1] = coords[sv * 2 + 1];
    g.features[row + 2] = s + wobble * std::sin(2.0 * pi * s / period);
    g.features[row + 3] = rng.uniform(-1.0, 1.0);
  }
  rec.graph.targets = EdgeScalars{rec.graph.edge_attr};
  return rec;
}

DatasetRecord make_graph_reg(int index, int n, Rng& rng) {
  DatasetRecord rec;
  rec.id = record_id(TaskKind::graph_reg, index);
  rec.graph = random_sparse_graph(n, rng);
  rec.graph.feature_dim = 4;
  rec.graph.features.resize(static_cast<std::size_t>(n) * 4);
  for (auto& x : rec.graph.features) x = rng.uniform(-1.0, 1.0);
  // Smooth image of the degree histogram: Gaussian blur of the degree
  // fractions sampled at 16 points.
  std::vector<int> deg = degrees(rec.graph);
  std::vector<double> hist(16, 0.0);
  for (int d : deg) hist[static_cast<std::size_t>(std::min(d, 15))] += 1.0 / n;
  GraphVector target;
  target.values.resize(16, 0.0);
  for (int j = 0; j < 16; ++j)
    for (int d = 0; d < 16; ++d)
      target.values[static_cast<std::size_t>(j)] +=
          hist[static_cast<std::size_t>(d)] * std::exp(-(d - j) * (d - j) / 4.0);
  rec.graph.targets = std::move(target);
  return rec;
}

DatasetRecord make_node_reg(int index, int n, Rng& rng) {
  DatasetRecord rec;
  rec.id = record_id(TaskKind::node_reg, index);
  std::vector<double> coords;
  rec.graph = random_geometric_graph(n, 5.0, 1.5, rng, coords);
  rec.graph.feature_dim = 4;
  rec.graph.features.resize(static_cast<std::size_t>(n) * 4);
  for (int v = 0; v < n; ++v) {
    auto row = static_cast<std::size_t>(v) * 4;
    rec.graph.features[row] = coords[static_cast<std::size_t>(v) * 2];
    rec.graph.features[row + 1] = coords[static_cast<std::size_t>(v) * 2 + 1];
    rec.graph.features[row + 2] = rng.uniform(-1.0, 1.0);
    rec.graph.features[row + 3] = rng.uniform(-1.0, 1.0);
  }
  NodeVectors target;
  target.dim = 2;
  target.values = coords;
  rec.graph.targets = std::move(target);
  return rec;
}

}  // namespace

std::vector<DatasetRecord> synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_graphs < 1) throw std::invalid_argument("synth_generate: n_graphs must be >= 1");
  if (spec.nodes_lo < 2 || spec.nodes_hi < spec.nodes_lo)
    throw std::invalid_argument("synth_generate: bad node count range");
  Rng rng = Rng(seed).stream(rng_streams::synth);
  std::vector<DatasetRecord> out;
  out.reserve(static_cast<std::size_t>(spec.n_graphs));
  for (int i = 0; i < spec.n_graphs; ++i) {
    int n = rng.uniform_int(spec.nodes_lo, spec.nodes_hi);
    switch (spec.task) {
      case TaskKind::node_class: out.push_back(make_node_class(i, n, rng)); break;
      case TaskKind::graph_class: out.push_back(make_graph_class(i, n, rng)); break;
      case TaskKind::edge_reg: out.push_back(make_edge_reg(i, n, rng)); break;
      case TaskKind::graph_reg: out.push_back(make_graph_reg(i, n, rng)); break;
      case TaskKind::node_reg: out.push_back(make_node_reg(i, n, rng)); break;
    }
  }
  return out;
}

}  // namespace kagnn
