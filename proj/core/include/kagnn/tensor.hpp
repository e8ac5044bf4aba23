#ifndef KAGNN_TENSOR_HPP
#define KAGNN_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kagnn/rng.hpp"

namespace kagnn::ad {

// Reverse-mode autodiff over dense f64 tensors. Each op records a node in an
// implicit tape (the DAG of shared nodes); backward() walks that tape once in
// reverse topological order and accumulates vector-Jacobian products.
//
// Tensors are cheap handles onto shared nodes. An op's output keeps its
// parents alive, so a whole forward graph lives exactly as long as some
// tensor still points into it. Leaves created with requires_grad stay around
// across steps (model parameters); everything else is per-step scratch.

class Tensor;

// One parent's view during a vjp callback: the parent's forward value and a
// same-sized gradient accumulator. grad is empty when the parent does not
// track gradients; contributions must be added, never assigned.
struct GradSlot {
  std::span<const double> value;
  std::span<double> grad;
};

using VjpFn =
    std::function<void(std::span<const double> out_grad, std::span<GradSlot> parents)>;

namespace detail {
struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  VjpFn vjp;  // empty for leaves
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  // Leaf constructors.
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.at(1); }

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& values_mut() { return node_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& grad_mut();

  // Same values, no history, no gradient tracking.
  Tensor detach() const;

  // Identity check (same underlying node).
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Low-level hook for custom primitives; used by the graph and kan modules
  // to register ops whose vjp is cheaper written by hand.
  static Tensor make_op(std::vector<std::size_t> shape, std::vector<double> values,
                        std::vector<Tensor> parents, VjpFn vjp);

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Seeds d(loss)/d(loss) = 1 and runs one reverse sweep. loss must be a
// one-element tensor; gradients of every reachable grad-tracking tensor are
// replaced (not accumulated) by this call.
void backward(const Tensor& loss);

// ----- elementwise and linear algebra -----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// b broadcast over every row of a; a is [n, d], b is [d].
Tensor add_rowvec(const Tensor& a, const Tensor& b);
// Per-row constant multipliers (not differentiated); a is [n, d].
Tensor scale_rows(const Tensor& a, const std::vector<double>& m);

Tensor matmul(const Tensor& a, const Tensor& b);
// a [m, k] times b-transposed where b is [n, k]; result [m, n].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor silu(const Tensor& x);
Tensor sum(const Tensor& x);          // -> scalar
Tensor row_sum(const Tensor& x);      // [n, d] -> [n]
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Generalized indexed accumulation: out[dst[p]] += w[p] * x[src[p]] per row.
// Covers row gather, segment sum, and weighted neighbor aggregation.
Tensor index_weighted_sum(const Tensor& x, const std::vector<int>& src,
                          const std::vector<int>& dst,
                          const std::vector<double>& weights,
                          std::size_t out_rows);
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);
Tensor scatter_sum_rows(const Tensor& x, const std::vector<int>& dst,
                        std::size_t out_rows);
// Segment mean over rows; segment of every row given by seg, values in
// [0, n_segments).
Tensor segment_mean_rows(const Tensor& x, const std::vector<int>& seg,
                         std::size_t n_segments);

// ----- stochastic / normalization ops -----

// Inverted-scaling dropout: zeroed entries stay zero, survivors are divided
// by (1-p). Identity when training is false (consumes no randomness) or p=0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Per-column batch normalization state. gamma/beta are trainable; running
// statistics are plain buffers updated in training mode with momentum 0.1.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;

  static BatchNorm make(std::size_t dim);
};

// Training mode normalizes by batch mean and biased batch variance and
// updates running stats; eval mode uses the stored running stats. Columns
// whose variance underflows variance_floor map to zero instead of dividing
// by noise, which also makes default running stats an exact identity.
Tensor batchnorm(const Tensor& x, BatchNorm& bn, bool training);
inline constexpr double batchnorm_variance_floor = 1e-24;

// ----- losses -----

// Mean softmax cross-entropy over rows; labels are class ids per row.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);
// Mean squared error against a constant target of identical layout.
Tensor mse_loss(const Tensor& pred, const std::vector<double>& target);

// ----- verification -----

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must build a scalar loss from its argument; it runs once for the analytic
// gradient and 2*numel more times for the differences.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double h = 1e-5);

}  // namespace kagnn::ad

#endif
