// Dataset tests: JSONL round-trips, error reporting with line numbers,
// seeded splits with per-class proportionality, subsampling, feature
// scaling, dimension inference, and the synthetic task generators.
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kagnn/data.hpp"
#include "kagnn/graph.hpp"
#include "kagnn/rng.hpp"

using namespace kagnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& tag) {
  static int counter = 0;
  return fs::temp_directory_path() /
         ("kagnn-data-test-" + tag + "-" + std::to_string(++counter) + ".jsonl");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& tag) : path(temp_file(tag)) {}
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

DatasetRecord labeled_record(const std::string& id, int label) {
  DatasetRecord r;
  r.id = id;
  r.graph.num_nodes = 2;
  r.graph.feature_dim = 1;
  r.graph.features = {0.0, 1.0};
  r.graph.edges = {{0, 1}, {1, 0}};
  r.graph.targets = GraphLabel{label};
  return r;
}

std::string error_of(const std::string& content) {
  TempFile f("err");
  spit(f.path, content);
  try {
    (void)load_dataset(f.path.string());
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

double variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("saved datasets reload with identical content") {
  SynthSpec spec;
  spec.task = TaskKind::edge_reg;
  spec.n_graphs = 6;
  std::vector<DatasetRecord> records = synth_generate(spec, 42);
  records[0].crystal_system = 5;
  records[0].space_group = 194;
  records[1].provenance = Provenance::chili_format;

  TempFile f("roundtrip");
  save_dataset(records, f.path.string());
  LoadResult loaded = load_dataset(f.path.string());
  CHECK(loaded.warnings.empty());
  REQUIRE(loaded.records.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = loaded.records[i];
    CHECK(a.id == b.id);
    CHECK(a.provenance == b.provenance);
    CHECK(a.crystal_system == b.crystal_system);
    CHECK(a.space_group == b.space_group);
    CHECK(a.graph.num_nodes == b.graph.num_nodes);
    CHECK(a.graph.feature_dim == b.graph.feature_dim);
    CHECK(a.graph.features == b.graph.features);  // bit-exact doubles
    CHECK(a.graph.edges == b.graph.edges);
    CHECK(a.graph.edge_attr == b.graph.edge_attr);
    CHECK(std::get<EdgeScalars>(a.graph.targets).values ==
          std::get<EdgeScalars>(b.graph.targets).values);
  }
}

TEST_CASE("save-load-save reproduces the file byte for byte") {
  for (TaskKind task : {TaskKind::node_class, TaskKind::graph_class,
                        TaskKind::graph_reg, TaskKind::node_reg}) {
    SynthSpec spec;
    spec.task = task;
    spec.n_graphs = 5;
    std::vector<DatasetRecord> records = synth_generate(spec, 9);

    TempFile first("bytes-a"), second("bytes-b");
    save_dataset(records, first.path.string());
    LoadResult loaded = load_dataset(first.path.string());
    save_dataset(loaded.records, second.path.string());
    CHECK(slurp(first.path) == slurp(second.path));
  }
}

TEST_CASE("loader failures name the offending line") {
  CHECK(error_of(R"({"nodes": []})"
                 "\nthis is not json\n")
            .find(":2") != std::string::npos);
  CHECK(error_of("[1, 2, 3]\n").find("must be a JSON object") !=
        std::string::npos);
  CHECK(error_of(R"({"id": "g", "nodes": [[1], [2, 3]]})"
                 "\n")
            .find("ragged") != std::string::npos);
  CHECK(error_of(R"({"id": "g", "nodes": [[1]], "edges": [[0]]})"
                 "\n")
            .find("malformed edge") != std::string::npos);
  CHECK(error_of(R"({"id": "g", "nodes": [[1]], "provenance": "guess"})"
                 "\n")
            .find("unknown provenance") != std::string::npos);
  CHECK(error_of(R"({"id": "g", "nodes": [[1]], "targets": {"x": 1}})"
                 "\n")
            .find("'kind'") != std::string::npos);
  CHECK(error_of(R"({"id": "g", "nodes": [[1]], "targets": {"kind": "mystery"}})"
                 "\n")
            .find("unknown target kind") != std::string::npos);
  // Structural validation runs on every record and names it.
  std::string structural =
      error_of(R"({"id": "half-edge", "nodes": [[1], [2]], "edges": [[0, 1]]})"
               "\n");
  CHECK(structural.find("half-edge") != std::string::npos);
  CHECK(structural.find("reverse") != std::string::npos);
  CHECK_THROWS_WITH_AS((void)load_dataset("/no/such/file.jsonl"),
                       doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("unknown fields warn but do not fail") {
  TempFile f("warn");
  spit(f.path,
       R"({"id": "g", "nodes": [[1], [2]], "edges": [[0, 1], [1, 0]], "color": "red", "meta": {"crystal_system": 2, "temperature": 300}})"
       "\n");
  LoadResult r = load_dataset(f.path.string());
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].crystal_system == 2);
  REQUIRE(r.warnings.size() == 2);
  bool saw_color = false, saw_temp = false;
  for (const auto& w : r.warnings) {
    if (w.find("'color'") != std::string::npos) saw_color = true;
    if (w.find("'temperature'") != std::string::npos) saw_temp = true;
  }
  CHECK(saw_color);
  CHECK(saw_temp);
}

TEST_CASE("blank lines are skipped and missing ids are synthesized") {
  TempFile f("blanks");
  spit(f.path, "\n{\"nodes\": [[1]]}\n\n{\"nodes\": [[2]]}\n");
  LoadResult r = load_dataset(f.path.string());
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].id == "record-2");
  CHECK(r.records[1].id == "record-4");
}

TEST_CASE("splits are disjoint, exhaustive, and sized by floor rule") {
  std::vector<DatasetRecord> records;
  for (int i = 0; i < 103; ++i)
    records.push_back(labeled_record("r" + std::to_string(i), 0));
  Splits s = split_dataset(records, 7);
  CHECK(s.train.size() == 82);  // floor(0.8 * 103)
  CHECK(s.val.size() == 10);    // floor(0.1 * 103)
  CHECK(s.test.size() == 11);   // remainder
  std::set<int> all;
  for (int i : s.train) all.insert(i);
  for (int i : s.val) all.insert(i);
  for (int i : s.test) all.insert(i);
  CHECK(all.size() == 103);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 102);

  Splits again = split_dataset(records, 7);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK(again.test == s.test);
  Splits other = split_dataset(records, 8);
  CHECK(other.train != s.train);
}

TEST_CASE("split rejects bad inputs") {
  std::vector<DatasetRecord> empty;
  CHECK_THROWS((void)split_dataset(empty, 1));
  std::vector<DatasetRecord> one = {labeled_record("a", 0)};
  CHECK_THROWS((void)split_dataset(one, 1, StratifyKey::none, 0.0, 0.1));
  CHECK_THROWS((void)split_dataset(one, 1, StratifyKey::none, 0.8, 0.3));
}

TEST_CASE("stratified splits keep every class within one of proportional") {
  Rng rng(555);
  for (int rep = 0; rep < 25; ++rep) {
    int n_classes = rng.uniform_int(2, 6);
    int n = rng.uniform_int(30, 200);
    std::vector<DatasetRecord> records;
    std::vector<int> class_count(static_cast<std::size_t>(n_classes), 0);
    for (int i = 0; i < n; ++i) {
      // Skewed class mix so ideals are rarely integral.
      int label = std::min(n_classes - 1,
                           static_cast<int>(rng.uniform() * rng.uniform() *
                                            n_classes));
      class_count[static_cast<std::size_t>(label)]++;
      records.push_back(labeled_record("r" + std::to_string(i), label));
    }
    Splits s = split_dataset(records, 1000 + static_cast<std::uint64_t>(rep),
                             StratifyKey::graph_label);
    auto check_split = [&](const std::vector<int>& idx) {
      std::vector<int> got(static_cast<std::size_t>(n_classes), 0);
      for (int i : idx)
        got[static_cast<std::size_t>(
            std::get<GraphLabel>(records[static_cast<std::size_t>(i)]
                                     .graph.targets)
                .value)]++;
      for (int cls = 0; cls < n_classes; ++cls) {
        double ideal = static_cast<double>(idx.size()) *
                       class_count[static_cast<std::size_t>(cls)] / n;
        CHECK(std::fabs(got[static_cast<std::size_t>(cls)] - ideal) <=
              1.0 + 1e-9);
      }
    };
    check_split(s.train);
    check_split(s.val);
    check_split(s.test);
  }
}

TEST_CASE("stratified subsample matches class proportions at scale") {
  // Mimics carving a working subset out of a large 7-class corpus.
  const int total = 100000, want = 2975;
  std::vector<int> class_sizes = {41000, 23000, 15000, 9000, 7000, 3500, 1500};
  std::vector<DatasetRecord> records;
  records.reserve(total);
  int next_id = 0;
  for (int cls = 0; cls < 7; ++cls)
    for (int k = 0; k < class_sizes[static_cast<std::size_t>(cls)]; ++k)
      records.push_back(labeled_record("r" + std::to_string(next_id++), cls));

  std::vector<int> pick =
      stratified_subsample(records, want, StratifyKey::graph_label, 99);
  CHECK(pick.size() == want);
  std::set<int> unique(pick.begin(), pick.end());
  CHECK(unique.size() == pick.size());
  CHECK(std::is_sorted(pick.begin(), pick.end()));

  std::vector<int> got(7, 0);
  for (int i : pick)
    got[static_cast<std::size_t>(
        std::get<GraphLabel>(records[static_cast<std::size_t>(i)].graph.targets)
            .value)]++;
  for (int cls = 0; cls < 7; ++cls) {
    double ideal = static_cast<double>(want) *
                   class_sizes[static_cast<std::size_t>(cls)] / total;
    CHECK(std::fabs(got[static_cast<std::size_t>(cls)] - ideal) <= 1.0 + 1e-9);
  }

  std::vector<int> same =
      stratified_subsample(records, want, StratifyKey::graph_label, 99);
  CHECK(same == pick);
  std::vector<int> differs =
      stratified_subsample(records, want, StratifyKey::graph_label, 100);
  CHECK(differs != pick);

  CHECK_THROWS((void)stratified_subsample(records, total + 1,
                                          StratifyKey::graph_label, 1));
}

TEST_CASE("stratify values and missing-key diagnostics") {
  DatasetRecord r = labeled_record("rec-x", 4);
  CHECK(stratify_value(r, StratifyKey::none) == 0);
  CHECK(stratify_value(r, StratifyKey::graph_label) == 4);
  CHECK_THROWS_WITH_AS((void)stratify_value(r, StratifyKey::crystal_system),
                       doctest::Contains("rec-x"), std::runtime_error);
  r.crystal_system = 3;
  r.space_group = 225;
  CHECK(stratify_value(r, StratifyKey::crystal_system) == 3);
  CHECK(stratify_value(r, StratifyKey::space_group) == 225);
  r.graph.targets = std::monostate{};
  CHECK_THROWS((void)stratify_value(r, StratifyKey::graph_label));
}

TEST_CASE("default stratify key depends on task and metadata") {
  std::vector<DatasetRecord> records = {labeled_record("a", 0),
                                        labeled_record("b", 1)};
  CHECK(default_stratify_key(records, TaskKind::graph_class) ==
        StratifyKey::graph_label);
  CHECK(default_stratify_key(records, TaskKind::node_class) == StratifyKey::none);
  records[0].crystal_system = 1;
  CHECK(default_stratify_key(records, TaskKind::node_class) == StratifyKey::none);
  records[1].crystal_system = 2;
  CHECK(default_stratify_key(records, TaskKind::node_class) ==
        StratifyKey::crystal_system);
  CHECK(default_stratify_key({}, TaskKind::node_reg) == StratifyKey::none);
}

TEST_CASE("feature scaler maps the training range onto [-1, 1]") {
  std::vector<DatasetRecord> records(3);
  for (int i = 0; i < 3; ++i) {
    auto& g = records[static_cast<std::size_t>(i)].graph;
    g.num_nodes = 2;
    g.feature_dim = 2;
  }
  records[0].graph.features = {0.0, 5.0, 10.0, 5.0};
  records[1].graph.features = {2.0, 5.0, 6.0, 5.0};
  records[2].graph.features = {-50.0, 7.0, 50.0, 7.0};  // not in train

  FeatureScaler s = FeatureScaler::fit(records, {0, 1});
  REQUIRE(s.lo.size() == 2);
  CHECK(s.lo[0] == 0.0);
  CHECK(s.hi[0] == 10.0);
  CHECK(s.map_value(0.0, 0) == -1.0);
  CHECK(s.map_value(10.0, 0) == 1.0);
  CHECK(s.map_value(5.0, 0) == doctest::Approx(0.0));
  // Constant feature collapses to zero; unseen values extrapolate linearly.
  CHECK(s.map_value(5.0, 1) == 0.0);
  CHECK(s.map_value(123.0, 1) == 0.0);
  CHECK(s.map_value(20.0, 0) == doctest::Approx(3.0));
  CHECK(s.map_value(-10.0, 0) == doctest::Approx(-3.0));

  std::vector<DatasetRecord> scaled = s.apply_all(records);
  CHECK(records[0].graph.features[0] == 0.0);  // originals untouched
  CHECK(scaled[0].graph.features[0] == -1.0);
  CHECK(scaled[0].graph.features[2] == 1.0);
  CHECK(scaled[2].graph.features[0] == doctest::Approx(-11.0));

  Graph wrong;
  wrong.num_nodes = 1;
  wrong.feature_dim = 3;
  wrong.features = {1, 2, 3};
  CHECK_THROWS((void)s.apply(wrong));
  CHECK_THROWS((void)FeatureScaler::fit(records, {}));
}

TEST_CASE("dimension inference") {
  SynthSpec spec;
  spec.task = TaskKind::node_class;
  spec.n_graphs = 8;
  std::vector<DatasetRecord> nc = synth_generate(spec, 3);
  CHECK(infer_in_dim(nc) == 4);
  CHECK(infer_out_dim(nc, TaskKind::node_class) == 4);  // labels 0..3

  spec.task = TaskKind::graph_class;
  std::vector<DatasetRecord> gc = synth_generate(spec, 3);
  CHECK(infer_in_dim(gc) == 8);
  CHECK(infer_out_dim(gc, TaskKind::graph_class) == 4);

  spec.task = TaskKind::edge_reg;
  std::vector<DatasetRecord> er = synth_generate(spec, 3);
  CHECK(infer_in_dim(er) == 4);
  CHECK(infer_out_dim(er, TaskKind::edge_reg) == 1);

  spec.task = TaskKind::graph_reg;
  std::vector<DatasetRecord> gr = synth_generate(spec, 3);
  CHECK(infer_out_dim(gr, TaskKind::graph_reg) == 16);

  spec.task = TaskKind::node_reg;
  std::vector<DatasetRecord> nr = synth_generate(spec, 3);
  CHECK(infer_out_dim(nr, TaskKind::node_reg) == 2);

  // Mixed feature widths and missing targets are errors.
  std::vector<DatasetRecord> mixed = {nc[0], gc[0]};
  CHECK_THROWS((void)infer_in_dim(mixed));
  CHECK_THROWS((void)infer_out_dim(er, TaskKind::node_class));
  CHECK_THROWS((void)infer_in_dim(std::vector<DatasetRecord>{}));
}

TEST_CASE("synthetic generation is deterministic and structurally valid") {
  for (TaskKind task : {TaskKind::node_class, TaskKind::graph_class,
                        TaskKind::edge_reg, TaskKind::graph_reg,
                        TaskKind::node_reg}) {
    CAPTURE(to_string(task));
    SynthSpec spec;
    spec.task = task;
    spec.n_graphs = 12;
    spec.nodes_lo = 6;
    spec.nodes_hi = 20;
    std::vector<DatasetRecord> a = synth_generate(spec, 31);
    std::vector<DatasetRecord> b = synth_generate(spec, 31);
    std::vector<DatasetRecord> c = synth_generate(spec, 32);
    REQUIRE(a.size() == 12);
    bool any_differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(validate_graph(a[i].graph).empty());
      CHECK(a[i].graph.num_nodes >= 2);
      // Motif construction may round node counts up slightly; the random
      // families stay strictly inside the requested range.
      if (task != TaskKind::graph_class)
        CHECK(a[i].graph.num_nodes <= spec.nodes_hi);
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].graph.features == b[i].graph.features);
      CHECK(a[i].graph.edges == b[i].graph.edges);
      if (a[i].graph.features != c[i].graph.features) any_differs = true;
    }
    CHECK(any_differs);
  }
  SynthSpec bad;
  bad.n_graphs = 0;
  CHECK_THROWS((void)synth_generate(bad, 1));
  bad.n_graphs = 3;
  bad.nodes_lo = 1;
  CHECK_THROWS((void)synth_generate(bad, 1));
  bad.nodes_lo = 10;
  bad.nodes_hi = 5;
  CHECK_THROWS((void)synth_generate(bad, 1));
}

TEST_CASE("degree-class generator labels nodes by capped degree") {
  SynthSpec spec;
  spec.task = TaskKind::node_class;
  spec.n_graphs = 10;
  for (const auto& rec : synth_generate(spec, 77)) {
    std::vector<int> deg = degrees(rec.graph);
    const auto& labels = std::get<NodeLabels>(rec.graph.targets).values;
    REQUIRE(labels.size() == static_cast<std::size_t>(rec.graph.num_nodes));
    for (int v = 0; v < rec.graph.num_nodes; ++v) {
      CHECK(labels[static_cast<std::size_t>(v)] ==
            std::min(deg[static_cast<std::size_t>(v)], 3));
      // First feature channel is the degree plus bounded noise.
      CHECK(std::fabs(rec.graph.feature(v, 0) -
                      deg[static_cast<std::size_t>(v)]) <= 0.25);
    }
  }
}

TEST_CASE("motif generator cycles through all four classes") {
  SynthSpec spec;
  spec.task = TaskKind::graph_class;
  spec.n_graphs = 9;
  std::vector<DatasetRecord> recs = synth_generate(spec, 5);
  std::set<int> seen;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    int label = std::get<GraphLabel>(recs[i].graph.targets).value;
    CHECK(label == static_cast<int>(i) % 4);
    seen.insert(label);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("distance-regression targets equal endpoint distances with spread") {
  SynthSpec spec;
  spec.task = TaskKind::edge_reg;
  spec.n_graphs = 20;
  std::vector<double> all_targets;
  for (const auto& rec : synth_generate(spec, 13)) {
    const auto& targets = std::get<EdgeScalars>(rec.graph.targets).values;
    REQUIRE(targets.size() == rec.graph.edges.size());
    CHECK(targets == rec.graph.edge_attr);
    for (std::size_t e = 0; e < targets.size(); ++e) {
      auto [u, v] = rec.graph.edges[e];
      double dx = rec.graph.feature(u, 0) - rec.graph.feature(v, 0);
      double dy = rec.graph.feature(u, 1) - rec.graph.feature(v, 1);
      CHECK(targets[e] == doctest::Approx(std::sqrt(dx * dx + dy * dy))
                              .epsilon(1e-12));
      all_targets.push_back(targets[e]);
    }
  }
  // The task is non-degenerate: targets vary well beyond the accuracy bar.
  CHECK(variance(all_targets) > 0.05);
}

TEST_CASE("histogram-regression targets blur the degree histogram") {
  SynthSpec spec;
  spec.task = TaskKind::graph_reg;
  spec.n_graphs = 6;
  for (const auto& rec : synth_generate(spec, 21)) {
    const auto& target = std::get<GraphVector>(rec.graph.targets).values;
    REQUIRE(target.size() == 16);
    std::vector<int> deg = degrees(rec.graph);
    std::vector<double> hist(16, 0.0);
    for (int d : deg)
      hist[static_cast<std::size_t>(std::min(d, 15))] +=
          1.0 / rec.graph.num_nodes;
    for (int j = 0; j < 16; ++j) {
      double want = 0.0;
      for (int d = 0; d < 16; ++d)
        want += hist[static_cast<std::size_t>(d)] *
                std::exp(-(d - j) * (d - j) / 4.0);
      CHECK(target[static_cast<std::size_t>(j)] ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("coordinate-regression targets are the leading feature columns") {
  SynthSpec spec;
  spec.task = TaskKind::node_reg;
  spec.n_graphs = 6;
  for (const auto& rec : synth_generate(spec, 27)) {
    const auto& nv = std::get<NodeVectors>(rec.graph.targets);
    REQUIRE(nv.dim == 2);
    REQUIRE(nv.values.size() == static_cast<std::size_t>(rec.graph.num_nodes) * 2);
    for (int v = 0; v < rec.graph.num_nodes; ++v) {
      CHECK(nv.values[static_cast<std::size_t>(v) * 2] == rec.graph.feature(v, 0));
      CHECK(nv.values[static_cast<std::size_t>(v) * 2 + 1] ==
            rec.graph.feature(v, 1));
    }
  }
}
