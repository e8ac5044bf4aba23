#ifndef KAGNN_KAN_HPP
#define KAGNN_KAN_HPP

#include <cstdint>
#include <vector>

#include "kagnn/rng.hpp"
#include "kagnn/spline.hpp"
#include "kagnn/tensor.hpp"

namespace kagnn::kan {

// One layer of learnable univariate functions. Entry (o, i) of the layer is
// silu-gated linear plus a spline: out_o = sum_i base[o,i]*silu(x_i) +
// scaler[o,i] * sum_s w[o,i,s]*B_s(x_i). spline_weight stores the s axis
// flattened into columns, block i occupying columns [i*S, (i+1)*S) with
// S = grid.basis_count().
struct KanLayer {
  int n_in = 0;
  int n_out = 0;
  SplineGrid grid;
  ad::Tensor base_weight;    // [n_out, n_in]
  ad::Tensor spline_weight;  // [n_out, n_in * S]
  ad::Tensor spline_scaler;  // [n_out, n_in]
};

// base_weight ~ U(-1/sqrt(n_in), 1/sqrt(n_in)), spline_weight ~
// U(-0.05, 0.05)/grid_size, spline_scaler all ones. Draw order is row-major
// base then row-major spline, so one rng yields one init.
KanLayer make_kan_layer(int n_in, int n_out, int grid_size, int order, Rng& rng);

// Differentiable basis expansion: x [n, m] -> [n, m*S], row r block i holding
// bspline_basis(x[r,i]). Inputs outside the extended knot range produce zero
// blocks (no clamping).
ad::Tensor bspline_basis_op(const ad::Tensor& x, const SplineGrid& grid);

ad::Tensor kan_layer_forward(const ad::Tensor& x, const KanLayer& layer);

// Composition of layers; adjacent n_out/n_in must chain.
ad::Tensor kan_network_forward(const ad::Tensor& x, const std::vector<KanLayer>& layers);

// Trainable scalars in one layer: n_in*n_out*(grid_size + order + 2).
std::int64_t kan_param_count(int n_in, int n_out, int grid_size, int order);

}  // namespace kagnn::kan

#endif
