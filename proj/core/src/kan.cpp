#include "kagnn/kan.hpp"

#include <cmath>
#include <stdexcept>

namespace kagnn::kan {

using ad::GradSlot;
using ad::Tensor;

KanLayer make_kan_layer(int n_in, int n_out, int grid_size, int order, Rng& rng) {
  if (n_in < 1 || n_out < 1)
    throw std::invalid_argument("kan layer dimensions must be positive");
  KanLayer layer;
  layer.n_in = n_in;
  layer.n_out = n_out;
  layer.grid = make_grid(grid_size, order);
  int s = layer.grid.basis_count();

  double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
  std::vector<double> base(static_cast<std::size_t>(n_out) * n_in);
  for (auto& v : base) v = rng.uniform(-bound, bound);
  layer.base_weight = Tensor::from({static_cast<std::size_t>(n_out),
                                    static_cast<std::size_t>(n_in)},
                                   std::move(base), true);

  double noise = 0.1 / grid_size;
  std::vector<double> sw(static_cast<std::size_t>(n_out) * n_in * s);
  for (auto& v : sw) v = rng.uniform(-0.5, 0.5) * noise;
  layer.spline_weight = Tensor::from({static_cast<std::size_t>(n_out),
                                      static_cast<std::size_t>(n_in) * s},
                                     std::move(sw), true);

  layer.spline_scaler = Tensor::full({static_cast<std::size_t>(n_out),
                                      static_cast<std::size_t>(n_in)},
                                     1.0, true);
  return layer;
}

Tensor bspline_basis_op(const Tensor& x, const SplineGrid& grid) {
  if (x.shape().size() != 2)
    throw std::invalid_argument("bspline_basis_op: x must be 2-D");
  std::size_t n = x.rows(), m = x.cols();
  std::size_t s = static_cast<std::size_t>(grid.basis_count());
  std::vector<double> out(n * m * s);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> b = bspline_basis(xv[r * m + i], grid);
      for (std::size_t k = 0; k < s; ++k) out[(r * m + i) * s + k] = b[k];
    }
  return Tensor::make_op(
      {n, m * s}, std::move(out), {x},
      [grid, m, s](std::span<const double> og, std::span<GradSlot> ps) {
        if (ps[0].grad.empty()) return;
        std::size_t n = ps[0].grad.size() / m;
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> db =
                bspline_basis_derivative(ps[0].value[r * m + i], grid);
            double acc = 0.0;
            for (std::size_t k = 0; k < s; ++k)
              acc += og[(r * m + i) * s + k] * db[k];
            ps[0].grad[r * m + i] += acc;
          }
      });
}

namespace {

// out[o, i*S+s] = w[o, i*S+s] * scaler[o, i]
Tensor scale_spline_blocks(const Tensor& w, const Tensor& scaler, std::size_t s) {
  std::size_t n_out = w.rows(), cols = w.cols();
  std::size_t n_in = cols / s;
  std::vector<double> out(w.numel());
  const auto& wv = w.values();
  const auto& scv = scaler.values();
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t i = 0; i < n_in; ++i) {
      double sc = scv[o * n_in + i];
      for (std::size_t k = 0; k < s; ++k)
        out[o * cols + i * s + k] = wv[o * cols + i * s + k] * sc;
    }
  return Tensor::make_op(
      w.shape(), std::move(out), {w, scaler},
      [n_out, n_in, s, cols](std::span<const double> og, std::span<GradSlot> ps) {
        for (std::size_t o = 0; o < n_out; ++o)
          for (std::size_t i = 0; i < n_in; ++i) {
            double sc = ps[1].value[o * n_in + i];
            double acc = 0.0;
            for (std::size_t k = 0; k < s; ++k) {
              double g = og[o * cols + i * s + k];
              if (!ps[0].grad.empty()) ps[0].grad[o * cols + i * s + k] += g * sc;
              acc += g * ps[0].value[o * cols + i * s + k];
            }
            if (!ps[1].grad.empty()) ps[1].grad[o * n_in + i] += acc;
          }
      });
}

}  // namespace

Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer) {
  if (x.shape().size() != 2)
    throw std::invalid_argument("kan_layer_forward: x must be 2-D");
  if (x.cols() != static_cast<std::size_t>(layer.n_in))
    throw std::invalid_argument("kan_layer_forward: input width mismatch");
  std::size_t s = static_cast<std::size_t>(layer.grid.basis_count());
  Tensor base_part = ad::matmul_nt(ad::silu(x), layer.base_weight);
  Tensor basis = bspline_basis_op(x, layer.grid);
  Tensor eff = scale_spline_blocks(layer.spline_weight, layer.spline_scaler, s);
  Tensor spline_part = ad::matmul_nt(basis, eff);
  return ad::add(base_part, spline_part);
}

Tensor kan_network_forward(const Tensor& x, const std::vector<KanLayer>& layers) {
  if (layers.empty())
    throw std::invalid_argument("kan_network_forward: no layers");
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].n_in != layers[i - 1].n_out)
      throw std::invalid_argument("kan_network_forward: layer widths do not chain");
  Tensor h = x;
  for (const auto& l : layers) h = kan_layer_forward(h, l);
  return h;
}

std::int64_t kan_param_count(int n_in, int n_out, int grid_size, int order) {
  return static_cast<std::int64_t>(n_in) * n_out * (grid_size + order + 2);
}

}  // namespace kagnn::kan
