// Microbenchmarks for the numeric hot paths: spline basis evaluation, the
// spline layer forward pass, neighbor aggregation, dense matmul forward and
// backward, and one full optimizer step on a small model.

#include <benchmark/benchmark.h>

#include <vector>

#include "kagnn/data.hpp"
#include "kagnn/graph.hpp"
#include "kagnn/kan.hpp"
#include "kagnn/models.hpp"
#include "kagnn/rng.hpp"
#include "kagnn/spline.hpp"
#include "kagnn/tensor.hpp"
#include "kagnn/train.hpp"

using namespace kagnn;

namespace {

Graph ring_graph(int n, int feature_dim, Rng& rng) {
  Graph g;
  g.num_nodes = n;
  g.feature_dim = feature_dim;
  g.features.resize(static_cast<std::size_t>(n) * feature_dim);
  for (double& v : g.features) v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    g.edges.emplace_back(i, j);
    g.edges.emplace_back(j, i);
  }
  return g;
}

void bm_bspline_basis(benchmark::State& state) {
  const kan::SplineGrid grid =
      kan::make_grid(static_cast<int>(state.range(0)), 3);
  Rng rng(1);
  std::vector<double> xs(1024);
  for (double& x : xs) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    for (double x : xs) benchmark::DoNotOptimize(kan::bspline_basis(x, grid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(xs.size()));
}
BENCHMARK(bm_bspline_basis)->Arg(3)->Arg(5)->Arg(10);

void bm_kan_layer_forward(benchmark::State& state) {
  Rng rng(2);
  const int dim = static_cast<int>(state.range(0));
  kan::KanLayer layer = kan::make_kan_layer(dim, dim, 5, 3, rng);
  ad::Tensor x = ad::Tensor::from(
      {128, static_cast<std::size_t>(dim)},
      [&] {
        std::vector<double> v(128 * static_cast<std::size_t>(dim));
        for (double& e : v) e = rng.uniform(-1.0, 1.0);
        return v;
      }());
  for (auto _ : state) {
    benchmark::DoNotOptimize(kan::kan_layer_forward(x, layer));
  }
}
BENCHMARK(bm_kan_layer_forward)->Arg(16)->Arg(64);

void bm_neighbor_sum(benchmark::State& state) {
  Rng rng(3);
  Graph g = ring_graph(static_cast<int>(state.range(0)), 16, rng);
  ad::Tensor h = ad::Tensor::from(
      {static_cast<std::size_t>(g.num_nodes), 16},
      [&] {
        std::vector<double> v(static_cast<std::size_t>(g.num_nodes) * 16);
        for (double& e : v) e = rng.uniform(-1.0, 1.0);
        return v;
      }());
  const std::vector<int> degs = degrees(g);
  for (auto _ : state) {
    benchmark::DoNotOptimize(neighbor_sum(g, h, true, [&](int u, int v) {
      return degree_coefficient(degs, u, v);
    }));
  }
}
BENCHMARK(bm_neighbor_sum)->Arg(64)->Arg(512);

void bm_matmul_forward(benchmark::State& state) {
  Rng rng(4);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> av(n * n), bv(n * n);
  for (double& e : av) e = rng.uniform(-1.0, 1.0);
  for (double& e : bv) e = rng.uniform(-1.0, 1.0);
  ad::Tensor a = ad::Tensor::from({n, n}, av);
  ad::Tensor b = ad::Tensor::from({n, n}, bv);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad::matmul(a, b));
  }
}
BENCHMARK(bm_matmul_forward)->Arg(32)->Arg(128);

void bm_matmul_backward(benchmark::State& state) {
  Rng rng(5);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<double> av(n * n), bv(n * n);
  for (double& e : av) e = rng.uniform(-1.0, 1.0);
  for (double& e : bv) e = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    ad::Tensor a = ad::Tensor::from({n, n}, av, true);
    ad::Tensor b = ad::Tensor::from({n, n}, bv, true);
    ad::Tensor loss = ad::sum(ad::matmul(a, b));
    ad::backward(loss);
    benchmark::DoNotOptimize(a.grad());
  }
}
BENCHMARK(bm_matmul_backward)->Arg(32)->Arg(128);

void bm_train_epoch(benchmark::State& state) {
  SynthSpec spec;
  spec.task = TaskKind::node_class;
  spec.n_graphs = 64;
  spec.nodes_lo = 8;
  spec.nodes_hi = 16;
  const std::vector<DatasetRecord> records = synth_generate(spec, 99);
  Splits splits = split_dataset(records, 99);

  ModelConfig mc;
  mc.layer_kind = LayerKind::kagcn;
  mc.hidden_dim = 16;
  mc.head = HeadKind::node_readout;
  mc.in_dim = infer_in_dim(records);
  mc.out_dim = infer_out_dim(records, spec.task);

  TrainConfig tc;
  tc.max_epochs = 1;
  tc.patience = 1;
  tc.seed = 7;

  for (auto _ : state) {
    Rng rng(7);
    Rng init = rng.stream(rng_streams::model_init);
    Model model = build_model(mc, init);
    benchmark::DoNotOptimize(train_model(model, records, splits.train, splits.val,
                                         {}, spec.task, tc));
  }
}
BENCHMARK(bm_train_epoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
