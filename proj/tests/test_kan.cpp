// Learnable-univariate-function layer tests: parameter counting, init
// determinism and ranges, the differentiable basis expansion, and the full
// layer forward/backward against hand-rolled oracles.
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "kagnn/kan.hpp"
#include "kagnn/rng.hpp"
#include "kagnn/spline.hpp"
#include "kagnn/tensor.hpp"

using namespace kagnn;
using ad::Tensor;
using kan::KanLayer;
using kan::SplineGrid;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, bool grad = true,
                     double lo = -1.5, double hi = 1.5) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Direct per-entry oracle for the layer:
//   out[r,o] = sum_i base[o,i]*silu(x[r,i])
//            + sum_i scaler[o,i] * sum_s w[o,i*S+s]*B_s(x[r,i])
double layer_entry_oracle(const KanLayer& layer, const Tensor& x, std::size_t r,
                          std::size_t o) {
  const std::size_t n_in = static_cast<std::size_t>(layer.n_in);
  const std::size_t s = static_cast<std::size_t>(layer.grid.basis_count());
  double acc = 0.0;
  for (std::size_t i = 0; i < n_in; ++i) {
    double xi = x.at(r, i);
    acc += layer.base_weight.at(o, i) * silu(xi);
    std::vector<double> b = kan::bspline_basis(xi, layer.grid);
    double sp = 0.0;
    for (std::size_t k = 0; k < s; ++k)
      sp += layer.spline_weight.at(o, i * s + k) * b[k];
    acc += layer.spline_scaler.at(o, i) * sp;
  }
  return acc;
}

}  // namespace

TEST_CASE("parameter count formula") {
  CHECK(kan::kan_param_count(1, 1, 3, 3) == 8);
  CHECK(kan::kan_param_count(2, 5, 3, 3) == 80);
  CHECK(kan::kan_param_count(39, 39, 4, 4) == 15210);
  CHECK(kan::kan_param_count(16, 32, 5, 3) == 16 * 32 * 10);

  // The formula must match what a constructed layer actually stores.
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    int n_in = rng.uniform_int(1, 7);
    int n_out = rng.uniform_int(1, 7);
    int gs = rng.uniform_int(1, 6);
    int k = rng.uniform_int(0, 5);
    KanLayer layer = kan::make_kan_layer(n_in, n_out, gs, k, rng);
    std::int64_t stored =
        static_cast<std::int64_t>(layer.base_weight.numel()) +
        static_cast<std::int64_t>(layer.spline_weight.numel()) +
        static_cast<std::int64_t>(layer.spline_scaler.numel());
    CHECK(stored == kan::kan_param_count(n_in, n_out, gs, k));
  }
}

TEST_CASE("layer construction validates dimensions") {
  Rng rng(1);
  CHECK_THROWS_AS((void)kan::make_kan_layer(0, 3, 3, 3, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kan::make_kan_layer(3, 0, 3, 3, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kan::make_kan_layer(3, 3, 0, 3, rng),
                  std::invalid_argument);
}

TEST_CASE("initialization is deterministic and follows the documented draws") {
  Rng a(42), b(42);
  KanLayer la = kan::make_kan_layer(4, 6, 5, 3, a);
  KanLayer lb = kan::make_kan_layer(4, 6, 5, 3, b);
  CHECK(la.base_weight.values() == lb.base_weight.values());
  CHECK(la.spline_weight.values() == lb.spline_weight.values());
  CHECK(la.spline_scaler.values() == lb.spline_scaler.values());

  // Draw order is pinned: row-major base weights first, then row-major
  // spline weights, all from the single caller-provided generator.
  Rng manual(42);
  double bound = 1.0 / std::sqrt(4.0);
  for (double v : la.base_weight.values())
    CHECK(v == manual.uniform(-bound, bound));
  double noise = 0.1 / 5.0;
  for (double v : la.spline_weight.values())
    CHECK(v == manual.uniform(-0.5, 0.5) * noise);

  for (double v : la.spline_scaler.values()) CHECK(v == 1.0);
  CHECK(la.base_weight.requires_grad());
  CHECK(la.spline_weight.requires_grad());
  CHECK(la.spline_scaler.requires_grad());

  // Value ranges: base within +-1/sqrt(n_in), spline within +-0.05/grid_size.
  for (double v : la.base_weight.values()) CHECK(std::fabs(v) <= bound);
  for (double v : la.spline_weight.values()) CHECK(std::fabs(v) <= 0.05 / 5.0);

  Rng c(43);
  KanLayer lc = kan::make_kan_layer(4, 6, 5, 3, c);
  CHECK(la.base_weight.values() != lc.base_weight.values());
}

TEST_CASE("basis expansion op lays blocks out per input column") {
  Rng rng(9);
  SplineGrid grid = kan::make_grid(4, 3);
  const std::size_t s = static_cast<std::size_t>(grid.basis_count());
  Tensor x = random_tensor({3, 5}, rng, false);
  Tensor out = kan::bspline_basis_op(x, grid);
  REQUIRE(out.rows() == 3);
  REQUIRE(out.cols() == 5 * s);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<double> b = kan::bspline_basis(x.at(r, i), grid);
      for (std::size_t k = 0; k < s; ++k)
        CHECK(out.at(r, i * s + k) == b[k]);
    }

  Tensor bad = random_tensor({4}, rng, false);
  CHECK_THROWS_AS((void)kan::bspline_basis_op(bad, grid), std::invalid_argument);
}

TEST_CASE("basis expansion op backpropagates through the spline") {
  Rng rng(21);
  SplineGrid grid = kan::make_grid(4, 3);
  Tensor x = random_tensor({3, 4}, rng, true, -0.9, 0.9);
  Tensor c = random_tensor({3, 4 * static_cast<std::size_t>(grid.basis_count())},
                           rng, false);
  auto f = [&](const Tensor& t) {
    return ad::sum(ad::mul(kan::bspline_basis_op(t, grid), c));
  };
  CHECK(ad::grad_check(f, x) < 1e-6);
}

TEST_CASE("layer forward matches the per-entry oracle") {
  Rng rng(33);
  for (int rep = 0; rep < 5; ++rep) {
    int n_in = rng.uniform_int(1, 6);
    int n_out = rng.uniform_int(1, 6);
    int gs = rng.uniform_int(2, 5);
    int k = rng.uniform_int(1, 4);
    KanLayer layer = kan::make_kan_layer(n_in, n_out, gs, k, rng);
    std::size_t rows = static_cast<std::size_t>(rng.uniform_int(1, 5));
    Tensor x = random_tensor({rows, static_cast<std::size_t>(n_in)}, rng, false);
    Tensor out = kan::kan_layer_forward(x, layer);
    REQUIRE(out.rows() == rows);
    REQUIRE(out.cols() == static_cast<std::size_t>(n_out));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < static_cast<std::size_t>(n_out); ++o)
        CHECK(out.at(r, o) ==
              doctest::Approx(layer_entry_oracle(layer, x, r, o)).epsilon(1e-12));
  }
}

TEST_CASE("layer forward handles inputs outside the domain") {
  // Values past the extended knots contribute only through the silu-gated
  // linear part; the spline blocks are zero there, never clamped.
  Rng rng(41);
  KanLayer layer = kan::make_kan_layer(3, 2, 3, 3, rng);
  Tensor x = Tensor::from({1, 3}, {-50.0, 0.25, 50.0});
  Tensor out = kan::kan_layer_forward(x, layer);
  for (std::size_t o = 0; o < 2; ++o)
    CHECK(out.at(0, o) == doctest::Approx(layer_entry_oracle(layer, x, 0, o))
                              .epsilon(1e-12));
}

TEST_CASE("layer gradients agree with finite differences") {
  Rng rng(55);
  KanLayer layer = kan::make_kan_layer(4, 3, 4, 3, rng);
  Tensor x = random_tensor({5, 4}, rng, true, -0.9, 0.9);

  auto through_layer = [&](const Tensor& t) {
    return ad::sum(ad::silu(kan::kan_layer_forward(t, layer)));
  };
  CHECK(ad::grad_check(through_layer, x) < 1e-6);

  // For each weight array, run the layer with the candidate tensor swapped
  // into that slot so both the tape and the difference probe flow through it.
  Tensor xin = x.detach();
  auto wrt_base = [&](const Tensor& t) {
    KanLayer l = layer;
    l.base_weight = t;
    return ad::sum(ad::silu(kan::kan_layer_forward(xin, l)));
  };
  CHECK(ad::grad_check(wrt_base, layer.base_weight) < 1e-6);
  auto wrt_spline = [&](const Tensor& t) {
    KanLayer l = layer;
    l.spline_weight = t;
    return ad::sum(ad::silu(kan::kan_layer_forward(xin, l)));
  };
  CHECK(ad::grad_check(wrt_spline, layer.spline_weight) < 1e-6);
  auto wrt_scaler = [&](const Tensor& t) {
    KanLayer l = layer;
    l.spline_scaler = t;
    return ad::sum(ad::silu(kan::kan_layer_forward(xin, l)));
  };
  CHECK(ad::grad_check(wrt_scaler, layer.spline_scaler) < 1e-6);
}

TEST_CASE("layer forward validates its input") {
  Rng rng(61);
  KanLayer layer = kan::make_kan_layer(4, 3, 3, 3, rng);
  Tensor wrong_width = random_tensor({2, 5}, rng, false);
  CHECK_THROWS_AS((void)kan::kan_layer_forward(wrong_width, layer),
                  std::invalid_argument);
  Tensor one_d = random_tensor({4}, rng, false);
  CHECK_THROWS_AS((void)kan::kan_layer_forward(one_d, layer),
                  std::invalid_argument);
}

TEST_CASE("network forward composes layers in order") {
  Rng rng(71);
  std::vector<KanLayer> net;
  net.push_back(kan::make_kan_layer(3, 5, 3, 3, rng));
  net.push_back(kan::make_kan_layer(5, 2, 4, 2, rng));
  Tensor x = random_tensor({4, 3}, rng, false);
  Tensor got = kan::kan_network_forward(x, net);
  Tensor manual = kan::kan_layer_forward(kan::kan_layer_forward(x, net[0]), net[1]);
  REQUIRE(got.numel() == manual.numel());
  for (std::size_t i = 0; i < got.numel(); ++i)
    CHECK(got.values()[i] == manual.values()[i]);

  std::vector<KanLayer> mismatched;
  mismatched.push_back(kan::make_kan_layer(3, 5, 3, 3, rng));
  mismatched.push_back(kan::make_kan_layer(4, 2, 3, 3, rng));
  CHECK_THROWS_AS((void)kan::kan_network_forward(x, mismatched),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)kan::kan_network_forward(x, {}), std::invalid_argument);
}
