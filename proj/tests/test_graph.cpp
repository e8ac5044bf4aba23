// Graph container tests: structural validation, degree-based normalization,
// and equivalence of the edge-iterating aggregation with the dense
// normalized-adjacency reference on random graphs.
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kagnn/graph.hpp"
#include "kagnn/rng.hpp"
#include "kagnn/tensor.hpp"

using namespace kagnn;
using ad::Tensor;

namespace {

Graph path3() {
  Graph g;
  g.num_nodes = 3;
  g.feature_dim = 2;
  g.features = {1, 0, 0, 1, 1, 1};
  g.edges = {{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  return g;
}

Graph random_graph(int n, double p, int fdim, Rng& rng) {
  Graph g;
  g.num_nodes = n;
  g.feature_dim = fdim;
  g.features.resize(static_cast<std::size_t>(n) * fdim);
  for (double& v : g.features) v = rng.uniform(-1.0, 1.0);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) {
        g.edges.push_back({u, v});
        g.edges.push_back({v, u});
      }
  return g;
}

bool mentions(const std::vector<std::string>& msgs, const std::string& needle) {
  for (const auto& m : msgs)
    if (m.find(needle) != std::string::npos) return true;
  return false;
}

Tensor random_features(const Graph& g, std::size_t d, Rng& rng, bool grad) {
  std::vector<double> v(static_cast<std::size_t>(g.num_nodes) * d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({static_cast<std::size_t>(g.num_nodes), d}, std::move(v),
                      grad);
}

}  // namespace

TEST_CASE("a well-formed graph has no violations") {
  Graph g = path3();
  CHECK(validate_graph(g).empty());
  g.edge_attr = {0.1, 0.1, 0.2, 0.2};
  CHECK(validate_graph(g).empty());
  g.targets = NodeLabels{{0, 1, 0}};
  CHECK(validate_graph(g).empty());
}

TEST_CASE("validation reports each broken invariant") {
  SUBCASE("endpoint out of range") {
    Graph g = path3();
    g.edges.push_back({0, 7});
    CHECK(mentions(validate_graph(g), "out of range"));
  }
  SUBCASE("negative endpoint") {
    Graph g = path3();
    g.edges.push_back({-1, 0});
    CHECK(mentions(validate_graph(g), "out of range"));
  }
  SUBCASE("stored self-loop") {
    Graph g = path3();
    g.edges.push_back({2, 2});
    CHECK(mentions(validate_graph(g), "self-loop"));
  }
  SUBCASE("duplicate edge") {
    Graph g = path3();
    g.edges.push_back({0, 1});
    CHECK(mentions(validate_graph(g), "more than once"));
  }
  SUBCASE("missing reverse orientation") {
    Graph g = path3();
    g.edges.push_back({0, 2});
    CHECK(mentions(validate_graph(g), "reverse orientation"));
  }
  SUBCASE("feature buffer size") {
    Graph g = path3();
    g.features.pop_back();
    CHECK(mentions(validate_graph(g), "features has"));
  }
  SUBCASE("edge attribute count") {
    Graph g = path3();
    g.edge_attr = {1.0};
    CHECK(mentions(validate_graph(g), "edge_attr has"));
  }
  SUBCASE("node label count") {
    Graph g = path3();
    g.targets = NodeLabels{{0, 1}};
    CHECK(mentions(validate_graph(g), "node label count"));
  }
  SUBCASE("node vector shape") {
    Graph g = path3();
    g.targets = NodeVectors{2, {1.0, 2.0, 3.0}};
    CHECK(mentions(validate_graph(g), "node vector target"));
  }
  SUBCASE("edge scalar count") {
    Graph g = path3();
    g.targets = EdgeScalars{{1.0, 2.0}};
    CHECK(mentions(validate_graph(g), "edge scalar target"));
  }
  SUBCASE("empty graph vector") {
    Graph g = path3();
    g.targets = GraphVector{{}};
    CHECK(mentions(validate_graph(g), "graph vector target"));
  }
  SUBCASE("negative counts") {
    Graph g;
    g.num_nodes = -1;
    CHECK(mentions(validate_graph(g), "negative"));
  }
}

TEST_CASE("degrees count stored out-edges") {
  Graph g = path3();
  std::vector<int> deg = degrees(g);
  REQUIRE(deg.size() == 3);
  CHECK(deg[0] == 1);
  CHECK(deg[1] == 2);
  CHECK(deg[2] == 1);

  Graph empty;
  empty.num_nodes = 4;
  CHECK(degrees(empty) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("degree coefficient applies the self-loop-augmented formula") {
  Graph g = path3();
  std::vector<int> deg = degrees(g);
  CHECK(degree_coefficient(g, 0, 1) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * 3.0)).epsilon(1e-15));
  CHECK(degree_coefficient(g, 1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(degree_coefficient(g, 0, 2) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * 2.0)).epsilon(1e-15));
  // Both overloads agree, and the formula is symmetric in its arguments.
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) {
      CHECK(degree_coefficient(g, u, v) == degree_coefficient(deg, u, v));
      CHECK(degree_coefficient(g, u, v) == degree_coefficient(g, v, u));
    }
}

TEST_CASE("normalized adjacency has the expected sparsity and symmetry") {
  Graph g = path3();
  std::vector<double> a = normalized_adjacency(g);
  REQUIRE(a.size() == 9);
  // Diagonal entries are 1/(deg+1).
  CHECK(a[0 * 3 + 0] == doctest::Approx(1.0 / 2.0));
  CHECK(a[1 * 3 + 1] == doctest::Approx(1.0 / 3.0));
  CHECK(a[2 * 3 + 2] == doctest::Approx(1.0 / 2.0));
  // Edge entries carry the degree coefficient; non-edges are zero.
  CHECK(a[0 * 3 + 1] == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(a[1 * 3 + 0] == doctest::Approx(1.0 / std::sqrt(6.0)));
  CHECK(a[0 * 3 + 2] == 0.0);
  CHECK(a[2 * 3 + 0] == 0.0);
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v)
      CHECK(a[static_cast<std::size_t>(u) * 3 + v] ==
            doctest::Approx(a[static_cast<std::size_t>(v) * 3 + u])
                .epsilon(1e-15));
}

TEST_CASE("plain neighbor sum adds unweighted neighbor rows") {
  Graph g = path3();
  Tensor h = Tensor::from({3, 2}, {1, 2, 10, 20, 100, 200});
  Tensor out = neighbor_sum(g, h, /*include_self=*/false);
  CHECK(out.at(0, 0) == 10.0);
  CHECK(out.at(0, 1) == 20.0);
  CHECK(out.at(1, 0) == 101.0);
  CHECK(out.at(1, 1) == 202.0);
  CHECK(out.at(2, 0) == 10.0);

  Tensor with_self = neighbor_sum(g, h, /*include_self=*/true);
  CHECK(with_self.at(0, 0) == 11.0);
  CHECK(with_self.at(1, 1) == 222.0);
}

TEST_CASE("edge-iterating normalized aggregation equals the dense reference") {
  Rng rng(314);
  for (int rep = 0; rep < 20; ++rep) {
    int n = rng.uniform_int(2, 30);
    int d = rng.uniform_int(1, 16);
    Graph g = random_graph(n, rng.uniform(0.1, 0.6), 1, rng);
    REQUIRE(validate_graph(g).empty());
    Tensor h = random_features(g, static_cast<std::size_t>(d), rng, false);

    std::vector<int> deg = degrees(g);
    Tensor got = neighbor_sum(g, h, /*include_self=*/true,
                              [&](int u, int v) {
                                return degree_coefficient(deg, u, v);
                              });

    std::vector<double> a = normalized_adjacency(g);
    for (int v = 0; v < n; ++v)
      for (int c = 0; c < d; ++c) {
        double want = 0.0;
        for (int u = 0; u < n; ++u)
          want += a[static_cast<std::size_t>(v) * n + u] *
                  h.at(static_cast<std::size_t>(u), static_cast<std::size_t>(c));
        CHECK(std::fabs(got.at(static_cast<std::size_t>(v),
                               static_cast<std::size_t>(c)) -
                        want) <= 1e-10);
      }
  }
}

TEST_CASE("aggregation is bitwise reproducible") {
  Rng rng(99);
  Graph g = random_graph(17, 0.3, 1, rng);
  Tensor h = random_features(g, 5, rng, false);
  std::vector<int> deg = degrees(g);
  auto w = [&](int u, int v) { return degree_coefficient(deg, u, v); };
  Tensor a = neighbor_sum(g, h, true, w);
  Tensor b = neighbor_sum(g, h, true, w);
  CHECK(a.values() == b.values());
}

TEST_CASE("aggregation backpropagates to node features") {
  Rng rng(123);
  Graph g = random_graph(8, 0.4, 1, rng);
  std::vector<int> deg = degrees(g);
  Tensor h = random_features(g, 3, rng, true);
  auto f = [&](const Tensor& t) {
    return ad::sum(ad::silu(neighbor_sum(g, t, true, [&](int u, int v) {
      return degree_coefficient(deg, u, v);
    })));
  };
  CHECK(ad::grad_check(f, h) < 1e-7);
}

TEST_CASE("aggregation rejects mismatched feature matrices") {
  Graph g = path3();
  Tensor wrong_rows = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS(neighbor_sum(g, wrong_rows, false));
  Tensor one_d = Tensor::from({3}, {1, 2, 3});
  CHECK_THROWS(neighbor_sum(g, one_d, false));
}

TEST_CASE("isolated nodes aggregate to zero without self loops") {
  Graph g;
  g.num_nodes = 3;
  g.feature_dim = 1;
  g.features = {1, 2, 3};
  g.edges = {{0, 1}, {1, 0}};  // node 2 is isolated
  Tensor h = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor out = neighbor_sum(g, h, false);
  CHECK(out.at(2, 0) == 0.0);
  CHECK(out.at(2, 1) == 0.0);
  Tensor with_self = neighbor_sum(g, h, true);
  CHECK(with_self.at(2, 0) == 5.0);
  CHECK(with_self.at(2, 1) == 6.0);
}
