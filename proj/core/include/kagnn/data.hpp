#ifndef KAGNN_DATA_HPP
#define KAGNN_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kagnn/graph.hpp"
#include "kagnn/models.hpp"

namespace kagnn {

enum class Provenance { synthetic, chili_format };

struct DatasetRecord {
  std::string id;
  Graph graph;
  Provenance provenance = Provenance::synthetic;
  std::optional<int> crystal_system;
  std::optional<int> space_group;
};

struct LoadResult {
  std::vector<DatasetRecord> records;
  std::vector<std::string> warnings;  // unknown fields, one note per occurrence
};

// One JSON object per line. Malformed JSON raises an error naming the line;
// a structurally invalid graph raises one naming the record id. Unknown
// fields are ignored with a warning.
LoadResult load_dataset(const std::string& path);

// Canonical serialization: keys sorted, doubles emitted so they parse back
// bit-identical. save(load(f)) reproduces f byte for byte when f came from
// save_dataset.
void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path);

// ----- splits -----

struct Splits {
  std::vector<int> train, val, test;
};

enum class StratifyKey { none, graph_label, crystal_system, space_group };

// Disjoint exhaustive index split with sizes floor(train_frac*n),
// floor(val_frac*n), and the remainder. With a stratify key, every class
// lands within one record of its proportional share in every split.
// Deterministic for a given seed.
Splits split_dataset(const std::vector<DatasetRecord>& records, std::uint64_t seed,
                     StratifyKey key = StratifyKey::none, double train_frac = 0.8,
                     double val_frac = 0.1);

// n_target indices whose class mix matches the full set within one record
// per class; seeded selection within classes.
std::vector<int> stratified_subsample(const std::vector<DatasetRecord>& records,
                                      int n_target, StratifyKey key,
                                      std::uint64_t seed);

// The stratification value of one record; throws if the record lacks it.
int stratify_value(const DatasetRecord& r, StratifyKey key);

// graph-class stratifies on its label; chili-format records stratify on
// crystal system when every record carries one; otherwise unstratified.
StratifyKey default_stratify_key(const std::vector<DatasetRecord>& records,
                                 TaskKind task);

// ----- feature scaling -----

// Per-feature min-max map onto [-1, 1], fitted on the training split only.
// Constant features map to 0; out-of-range values extrapolate linearly.
struct FeatureScaler {
  std::vector<double> lo, hi;

  static FeatureScaler fit(const std::vector<DatasetRecord>& records,
                           const std::vector<int>& train_indices);
  double map_value(double x, std::size_t feature) const;
  void apply(Graph& g) const;
  std::vector<DatasetRecord> apply_all(const std::vector<DatasetRecord>& records) const;
};

// ----- synthetic tasks -----

struct SynthSpec {
  TaskKind task = TaskKind::node_class;
  int n_graphs = 100;
  int nodes_lo = 8;
  int nodes_hi = 30;
};

// Deterministic generator families, one per task kind:
//   node-class:  sparse random graphs, label(v) = min(deg(v), 3), features
//                carry a noisy degree channel plus distractor noise
//   graph-class: path / cycle / star / grid motifs, label = motif id
//   edge-reg:    random geometric graphs, edge target = endpoint distance
//   graph-reg:   sparse random graphs, 16-dim smooth degree-histogram image
//   node-reg:    random geometric graphs, node target = its coordinates
std::vector<DatasetRecord> synth_generate(const SynthSpec& spec, std::uint64_t seed);

// ----- task metadata -----

int infer_in_dim(const std::vector<DatasetRecord>& records);
int infer_out_dim(const std::vector<DatasetRecord>& records, TaskKind task);

}  // namespace kagnn

#endif
