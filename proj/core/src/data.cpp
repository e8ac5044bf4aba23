#include "kagnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace kagnn {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

Targets targets_from_json(const json& t, const std::string& where) {
  if (!t.is_object() || !t.contains("kind"))
    fail(where + ": targets must be an object with a 'kind'");
  std::string kind = t.at("kind").get<std::string>();
  if (kind == "none") return std::monostate{};
  if (kind == "graph_label") return GraphLabel{t.at("value").get<int>()};
  if (kind == "graph_vector")
    return GraphVector{t.at("values").get<std::vector<double>>()};
  if (kind == "node_labels")
    return NodeLabels{t.at("values").get<std::vector<int>>()};
  if (kind == "node_vectors") {
    NodeVectors nv;
    nv.dim = t.at("dim").get<int>();
    nv.values = t.at("values").get<std::vector<double>>();
    return nv;
  }
  if (kind == "edge_scalars")
    return EdgeScalars{t.at("values").get<std::vector<double>>()};
  fail(where + ": unknown target kind '" + kind + "'");
}

json targets_to_json(const Targets& t) {
  json j;
  if (std::holds_alternative<std::monostate>(t)) {
    j["kind"] = "none";
  } else if (const auto* gl = std::get_if<GraphLabel>(&t)) {
    j["kind"] = "graph_label";
    j["value"] = gl->value;
  } else if (const auto* gv = std::get_if<GraphVector>(&t)) {
    j["kind"] = "graph_vector";
    j["values"] = gv->values;
  } else if (const auto* nl = std::get_if<NodeLabels>(&t)) {
    j["kind"] = "node_labels";
    j["values"] = nl->values;
  } else if (const auto* nv = std::get_if<NodeVectors>(&t)) {
    j["kind"] = "node_vectors";
    j["dim"] = nv->dim;
    j["values"] = nv->values;
  } else if (const auto* es = std::get_if<EdgeScalars>(&t)) {
    j["kind"] = "edge_scalars";
    j["values"] = es->values;
  }
  return j;
}

}  // namespace

LoadResult load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset file: " + path);
  LoadResult out;
  std::string line;
  int line_no = 0;
  const std::vector<std::string> known_fields = {"id",        "provenance", "nodes",
                                                 "edges",     "edge_attr",  "targets",
                                                 "meta"};
  const std::vector<std::string> known_meta = {"crystal_system", "space_group"};
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(where + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) fail(where + ": record must be a JSON object");

    DatasetRecord rec;
    try {
      rec.id = j.value("id", std::string("record-") + std::to_string(line_no));
      std::string prov = j.value("provenance", std::string("synthetic"));
      if (prov == "synthetic")
        rec.provenance = Provenance::synthetic;
      else if (prov == "chili-format")
        rec.provenance = Provenance::chili_format;
      else
        fail(where + ": unknown provenance '" + prov + "'");

      const auto& nodes = j.at("nodes");
      if (!nodes.is_array()) fail(where + ": 'nodes' must be an array of rows");
      rec.graph.num_nodes = static_cast<int>(nodes.size());
      rec.graph.feature_dim =
          nodes.empty() ? 0 : static_cast<int>(nodes.at(0).size());
      for (const auto& row : nodes) {
        if (static_cast<int>(row.size()) != rec.graph.feature_dim)
          fail(where + ": record " + rec.id + " has ragged node feature rows");
        for (const auto& v : row) {
          double x = v.get<double>();
          if (!std::isfinite(x))
            fail(where + ": record " + rec.id + " has a non-finite feature");
          rec.graph.features.push_back(x);
        }
      }

      if (j.contains("edges"))
        for (const auto& e : j.at("edges")) {
          if (!e.is_array() || e.size() != 2)
            fail(where + ": record " + rec.id + " has a malformed edge entry");
          rec.graph.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
      if (j.contains("edge_attr"))
        rec.graph.edge_attr = j.at("edge_attr").get<std::vector<double>>();
      if (j.contains("targets"))
        rec.graph.targets = targets_from_json(j.at("targets"), where);
      if (j.contains("meta")) {
        const auto& meta = j.at("meta");
        if (meta.contains("crystal_system"))
          rec.crystal_system = meta.at("crystal_system").get<int>();
        if (meta.contains("space_group"))
          rec.space_group = meta.at("space_group").get<int>();
        for (auto it = meta.begin(); it != meta.end(); ++it)
          if (std::find(known_meta.begin(), known_meta.end(), it.key()) ==
              known_meta.end())
            out.warnings.push_back(where + ": unknown meta field '" + it.key() +
                                   "' ignored");
      }
    } catch (const json::exception& e) {
      fail(where + ": " + e.what());
    }

    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(known_fields.begin(), known_fields.end(), it.key()) ==
          known_fields.end())
        out.warnings.push_back(where + ": unknown field '" + it.key() + "' ignored");

    auto violations = validate_graph(rec.graph);
    if (!violations.empty())
      fail(where + ": record " + rec.id + " is invalid: " + violations.front());
    out.records.push_back(std::move(rec));
  }
  return out;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open dataset file for writing: " + path);
  for (const auto& rec : records) {
    json j;
    j["id"] = rec.id;
    j["provenance"] =
        rec.provenance == Provenance::synthetic ? "synthetic" : "chili-format";
    json nodes = json::array();
    for (int v = 0; v < rec.graph.num_nodes; ++v) {
      json row = json::array();
      for (int f = 0; f < rec.graph.feature_dim; ++f) row.push_back(rec.graph.feature(v, f));
      nodes.push_back(std::move(row));
    }
    j["nodes"] = std::move(nodes);
    json edges = json::array();
    for (const auto& [u, v] : rec.graph.edges) edges.push_back(json::array({u, v}));
    j["edges"] = std::move(edges);
    if (!rec.graph.edge_attr.empty()) j["edge_attr"] = rec.graph.edge_attr;
    j["targets"] = targets_to_json(rec.graph.targets);
    if (rec.crystal_system || rec.space_group) {
      json meta;
      if (rec.crystal_system) meta["crystal_system"] = *rec.crystal_system;
      if (rec.space_group) meta["space_group"] = *rec.space_group;
      j["meta"] = std::move(meta);
    }
    out << j.dump() << "\n";
  }
  if (!out) fail("write failed for dataset file: " + path);
}

// ----- stratification machinery -----

int stratify_value(const DatasetRecord& r, StratifyKey key) {
  switch (key) {
    case StratifyKey::none:
      return 0;
    case StratifyKey::graph_label: {
      const auto* gl = std::get_if<GraphLabel>(&r.graph.targets);
      if (!gl) fail("record " + r.id + " has no graph label to stratify on");
      return gl->value;
    }
    case StratifyKey::crystal_system:
      if (!r.crystal_system)
        fail("record " + r.id + " has no crystal_system to stratify on");
      return *r.crystal_system;
    case StratifyKey::space_group:
      if (!r.space_group)
        fail("record " + r.id + " has no space_group to stratify on");
      return *r.space_group;
  }
  fail("unknown stratify key");
}

StratifyKey default_stratify_key(const std::vector<DatasetRecord>& records,
                                 TaskKind task) {
  if (task == TaskKind::graph_class) return StratifyKey::graph_label;
  bool all_cs = !records.empty();
  for (const auto& r : records)
    if (!r.crystal_system) {
      all_cs = false;
      break;
    }
  return all_cs ? StratifyKey::crystal_system : StratifyKey::none;
}

namespace {

struct ClassGroup {
  int key;
  std::vector<int> indices;
};

std::vector<ClassGroup> group_by_class(const std::vector<DatasetRecord>& records,
                                       StratifyKey key) {
  std::map<int, std::vector<int>> by_key;
  for (int i = 0; i < static_cast<int>(records.size()); ++i)
    by_key[stratify_value(records[static_cast<std::size_t>(i)], key)].push_back(i);
  std::vector<ClassGroup> groups;
  groups.reserve(by_key.size());
  for (auto& [k, idx] : by_key) groups.push_back({k, std::move(idx)});
  return groups;
}

// Largest-remainder apportionment of `total` across classes proportional to
// ideals, honoring per-class caps. Every uncapped allocation lands within one
// of its ideal.
std::vector<int> largest_remainder(const std::vector<double>& ideals, int total,
                                   const std::vector<int>& caps) {
  std::size_t c = ideals.size();
  std::vector<int> alloc(c, 0);
  int assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    alloc[i] = std::min(static_cast<int>(std::floor(ideals[i])), caps[i]);
    if (alloc[i] < 0) alloc[i] = 0;
    assigned += alloc[i];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double fa = ideals[a] - std::floor(ideals[a]);
    double fb = ideals[b] - std::floor(ideals[b]);
    return fa > fb;
  });
  int remaining = total - assigned;
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (remaining == 0) break;
      if (alloc[i] < caps[i]) {
        ++alloc[i];
        --remaining;
        progressed = true;
      }
    }
    if (!progressed) fail("apportionment cannot reach requested total");
  }
  return alloc;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1],
              idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

}  // namespace

Splits split_dataset(const std::vector<DatasetRecord>& records, std::uint64_t seed,
                     StratifyKey key, double train_frac, double val_frac) {
  int n = static_cast<int>(records.size());
  if (n == 0) fail("split_dataset: empty dataset");
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac >= 1.0 + 1e-12)
    fail("split_dataset: fractions must satisfy 0 < train, 0 <= val, train+val <= 1");
  int t_total = static_cast<int>(std::floor(train_frac * n));
  int v_total = static_cast<int>(std::floor(val_frac * n));
  int r_total = n - t_total - v_total;

  std::vector<ClassGroup> groups = group_by_class(records, key);
  std::size_t c = groups.size();
  std::vector<double> t_ideal(c), v_ideal(c), r_ideal(c);
  std::vector<int> sizes(c);
  for (std::size_t i = 0; i < c; ++i) {
    sizes[i] = static_cast<int>(groups[i].indices.size());
    double frac = static_cast<double>(sizes[i]) / n;
    t_ideal[i] = t_total * frac;
    v_ideal[i] = v_total * frac;
    r_ideal[i] = r_total * frac;
  }

  std::vector<int> t_alloc = largest_remainder(t_ideal, t_total, sizes);
  std::vector<int> v_caps(c);
  for (std::size_t i = 0; i < c; ++i) v_caps[i] = sizes[i] - t_alloc[i];
  std::vector<int> v_alloc = largest_remainder(v_ideal, v_total, v_caps);
  std::vector<int> r_alloc(c);
  for (std::size_t i = 0; i < c; ++i) r_alloc[i] = sizes[i] - t_alloc[i] - v_alloc[i];

  // The two sequential roundings can leave a test-split class off its ideal
  // by up to two; shift single records between classes until every entry of
  // the class-by-split table is within one of proportional.
  const double tol = 1.0 + 1e-9;
  for (int iter = 0; iter < 8 * static_cast<int>(c) + 16; ++iter) {
    std::size_t worst = c;
    double worst_dev = tol;
    for (std::size_t i = 0; i < c; ++i) {
      double dev = std::abs(r_alloc[i] - r_ideal[i]);
      if (dev > worst_dev) {
        worst_dev = dev;
        worst = i;
      }
    }
    if (worst == c) break;
    bool surplus = r_alloc[worst] > r_ideal[worst];
    bool moved = false;
    // Move one record of class `worst` between test and train/val, paired
    // with the opposite move in a donor class so split totals hold.
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      bool use_train = attempt == 0;
      std::vector<int>& s_alloc = use_train ? t_alloc : v_alloc;
      const std::vector<double>& s_ideal = use_train ? t_ideal : v_ideal;
      if (surplus) {
        if (s_alloc[worst] + 1 - s_ideal[worst] > tol) continue;
        for (std::size_t d = 0; d < c && !moved; ++d) {
          if (d == worst) continue;
          if (s_alloc[d] == 0) continue;
          if (s_ideal[d] - (s_alloc[d] - 1) > tol) continue;
          if (r_alloc[d] + 1 - r_ideal[d] > tol) continue;
          s_alloc[worst]++;
          r_alloc[worst]--;
          s_alloc[d]--;
          r_alloc[d]++;
          moved = true;
        }
      } else {
        if (s_alloc[worst] == 0) continue;
        if (s_ideal[worst] - (s_alloc[worst] - 1) > tol) continue;
        for (std::size_t d = 0; d < c && !moved; ++d) {
          if (d == worst) continue;
          if (s_alloc[d] + 1 > sizes[d] - (use_train ? v_alloc[d] : t_alloc[d])) continue;
          if (s_alloc[d] + 1 - s_ideal[d] > tol) continue;
          if (r_ideal[d] - (r_alloc[d] - 1) > tol) continue;
          s_alloc[worst]--;
          r_alloc[worst]++;
          s_alloc[d]++;
          r_alloc[d]--;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }

  Rng rng = Rng(seed).stream(rng_streams::split);
  Splits out;
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<int> idx = groups[i].indices;
    shuffle_indices(idx, rng);
    int t = t_alloc[i], v = v_alloc[i];
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + t);
    out.val.insert(out.val.end(), idx.begin() + t, idx.begin() + t + v);
    out.test.insert(out.test.end(), idx.begin() + t + v, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<int> stratified_subsample(const std::vector<DatasetRecord>& records,
                                      int n_target, StratifyKey key,
                                      std::uint64_t seed) {
  int n = static_cast<int>(records.size());
  if (n_target < 0 || n_target > n)
    fail("stratified_subsample: target size out of range");
  std::vector<ClassGroup> groups = group_by_class(records, key);
  std::size_t c = groups.size();
  std::vector<double> ideals(c);
  std::vector<int> caps(c);
  for (std::size_t i = 0; i < c; ++i) {
    caps[i] = static_cast<int>(groups[i].indices.size());
    ideals[i] = static_cast<double>(n_target) * caps[i] / n;
  }
  std::vector<int> alloc = largest_remainder(ideals, n_target, caps);

  Rng rng = Rng(seed).stream(rng_streams::subsample);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_target));
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<int> idx = groups[i].indices;
    shuffle_indices(idx, rng);
    out.insert(out.end(), idx.begin(), idx.begin() + alloc[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ----- feature scaling -----

FeatureScaler FeatureScaler::fit(const std::vector<DatasetRecord>& records,
                                 const std::vector<int>& train_indices) {
  if (train_indices.empty()) fail("FeatureScaler::fit: empty training split");
  int dim = records[static_cast<std::size_t>(train_indices[0])].graph.feature_dim;
  FeatureScaler s;
  s.lo.assign(static_cast<std::size_t>(dim), std::numeric_limits<double>::infinity());
  s.hi.assign(static_cast<std::size_t>(dim), -std::numeric_limits<double>::infinity());
  for (int i : train_indices) {
    const Graph& g = records[static_cast<std::size_t>(i)].graph;
    if (g.feature_dim != dim)
      fail("FeatureScaler::fit: inconsistent feature dimensions in dataset");
    for (int v = 0; v < g.num_nodes; ++v)
      for (int f = 0; f < dim; ++f) {
        double x = g.feature(v, f);
        auto fi = static_cast<std::size_t>(f);
        s.lo[fi] = std::min(s.lo[fi], x);
        s.hi[fi] = std::max(s.hi[fi], x);
      }
  }
  for (std::size_t f = 0; f < s.lo.size(); ++f)
    if (!std::isfinite(s.lo[f]) || !std::isfinite(s.hi[f]))
      fail("FeatureScaler::fit: no finite feature values seen");
  return s;
}

double FeatureScaler::map_value(double x, std::size_t feature) const {
  double span = hi[feature] - lo[feature];
  if (span == 0.0) return 0.0;
  return -1.0 + 2.0 * (x - lo[feature]) / span;
}

void FeatureScaler::apply(Graph& g) const {
  if (static_cast<std::size_t>(g.feature_dim) != lo.size())
    fail("FeatureScaler::apply: feature dimension mismatch");
  for (int v = 0; v < g.num_nodes; ++v)
    for (int f = 0; f < g.feature_dim; ++f) {
      auto& x = g.features[static_cast<std::size_t>(v) * g.feature_dim + f];
      x = map_value(x, static_cast<std::size_t>(f));
    }
}

std::vector<DatasetRecord> FeatureScaler::apply_all(
    const std::vector<DatasetRecord>& records) const {
  std::vector<DatasetRecord> out = records;
  for (auto& r : out) apply(r.graph);
  return out;
}

// ----- task metadata -----

int infer_in_dim(const std::vector<DatasetRecord>& records) {
  if (records.empty()) fail("infer_in_dim: empty dataset");
  int dim = records[0].graph.feature_dim;
  for (const auto& r : records)
    if (r.graph.feature_dim != dim)
      fail("infer_in_dim: inconsistent feature dimensions in dataset");
  return dim;
}

int infer_out_dim(const std::vector<DatasetRecord>& records, TaskKind task) {
  if (records.empty()) fail("infer_out_dim: empty dataset");
  switch (task) {
    case TaskKind::node_class: {
      int max_label = -1;
      for (const auto& r : records) {
        const auto* nl = std::get_if<NodeLabels>(&r.graph.targets);
        if (!nl) fail("record " + r.id + " lacks node labels for node-class task");
        for (int y : nl->values) max_label = std::max(max_label, y);
      }
      if (max_label < 0) fail("infer_out_dim: no node labels present");
      return max_label + 1;
    }
    case TaskKind::graph_class: {
      int max_label = -1;
      for (const auto& r : records) {
        const auto* gl = std::get_if<GraphLabel>(&r.graph.targets);
        if (!gl) fail("record " + r.id + " lacks a graph label for graph-class task");
        max_label = std::max(max_label, gl->value);
      }
      return max_label + 1;
    }
    case TaskKind::edge_reg:
      return 1;
    case TaskKind::graph_reg: {
      const auto* gv = std::get_if<GraphVector>(&records[0].graph.targets);
      if (!gv) fail("record " + records[0].id + " lacks a graph vector target");
      auto dim = static_cast<int>(gv->values.size());
      for (const auto& r : records) {
        const auto* v = std::get_if<GraphVector>(&r.graph.targets);
        if (!v || static_cast<int>(v->values.size()) != dim)
          fail("record " + r.id + " has a mismatched graph vector target");
      }
      return dim;
    }
    case TaskKind::node_reg: {
      const auto* nv = std::get_if<NodeVectors>(&records[0].graph.targets);
      if (!nv) fail("record " + records[0].id + " lacks node vector targets");
      return nv->dim;
    }
  }
  fail("unknown task kind");
}

}  // namespace kagnn
