#include "kagnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace kagnn::ad {

namespace {

using detail::Node;

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values,
                    bool requires_grad) {
  check(!shape.empty(), "tensor shape must have at least one dimension");
  check(shape_numel(shape) == values.size(),
        "tensor value count does not match shape");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), fill);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
  check(node_ && node_->value.size() == 1, "item() requires a one-element tensor");
  return node_->value[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!node_ || node_->grad.empty())
    throw std::runtime_error("tensor has no gradient; run backward first");
  return node_->grad;
}

std::vector<double>& Tensor::grad_mut() {
  if (!node_ || node_->grad.empty())
    throw std::runtime_error("tensor has no gradient; run backward first");
  return node_->grad;
}

Tensor Tensor::detach() const {
  check(node_ != nullptr, "detach on empty tensor");
  return from(node_->shape, node_->value, false);
}

Tensor Tensor::make_op(std::vector<std::size_t> shape, std::vector<double> values,
                       std::vector<Tensor> parents, VjpFn vjp) {
  check(shape_numel(shape) == values.size(), "op output shape mismatch");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  bool needs = false;
  for (const auto& p : parents) {
    check(p.defined(), "op parent is an empty tensor");
    if (p.node()->requires_grad) needs = true;
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->vjp = std::move(vjp);
  }
  // When no parent tracks gradients the node is value-only: dropping the
  // parent list prunes the dead part of the tape.
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

void backward(const Tensor& loss) {
  check(loss.defined(), "backward on empty tensor");
  check(loss.numel() == 1, "backward requires a scalar loss");
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Post-order DFS over grad-tracking nodes; appending after all parents
  // complete yields a topological order of the reachable tape.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  visited.insert(root);
  stack.push_back({root});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p});
    } else {
      topo.push_back(f.n);
      stack.pop_back();
    }
  }

  for (Node* n : topo) n->grad.assign(n->value.size(), 0.0);
  root->grad[0] = 1.0;

  std::vector<GradSlot> slots;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (!n->vjp) continue;
    slots.clear();
    slots.reserve(n->parents.size());
    for (auto& p : n->parents) {
      GradSlot s;
      s.value = std::span<const double>(p->value);
      if (p->requires_grad) s.grad = std::span<double>(p->grad);
      slots.push_back(s);
    }
    n->vjp(std::span<const double>(n->grad), std::span<GradSlot>(slots));
  }
}

// ----- elementwise -----

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* opname) {
  check(a.shape() == b.shape(), std::string(opname) + ": shape mismatch");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](std::span<const double> og, std::span<GradSlot> ps) {
                           for (std::size_t i = 0; i < og.size(); ++i) {
                             if (!ps[0].grad.empty()) ps[0].grad[i] += og[i];
                             if (!ps[1].grad.empty()) ps[1].grad[i] += og[i];
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](std::span<const double> og, std::span<GradSlot> ps) {
                           for (std::size_t i = 0; i < og.size(); ++i) {
                             if (!ps[0].grad.empty()) ps[0].grad[i] += og[i];
                             if (!ps[1].grad.empty()) ps[1].grad[i] -= og[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [](std::span<const double> og, std::span<GradSlot> ps) {
                           for (std::size_t i = 0; i < og.size(); ++i) {
                             if (!ps[0].grad.empty()) ps[0].grad[i] += og[i] * ps[1].value[i];
                             if (!ps[1].grad.empty()) ps[1].grad[i] += og[i] * ps[0].value[i];
                           }
                         });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return Tensor::make_op(a.shape(), std::move(out), {a},
                         [c](std::span<const double> og, std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           for (std::size_t i = 0; i < og.size(); ++i)
                             ps[0].grad[i] += og[i] * c;
                         });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 2, "add_rowvec: a must be 2-D");
  std::size_t n = a.rows(), d = a.cols();
  check(b.numel() == d, "add_rowvec: b length must equal a's column count");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = av[r * d + c] + bv[c];
  return Tensor::make_op(a.shape(), std::move(out), {a, b},
                         [n, d](std::span<const double> og, std::span<GradSlot> ps) {
                           if (!ps[0].grad.empty())
                             for (std::size_t i = 0; i < og.size(); ++i)
                               ps[0].grad[i] += og[i];
                           if (!ps[1].grad.empty())
                             for (std::size_t r = 0; r < n; ++r)
                               for (std::size_t c = 0; c < d; ++c)
                                 ps[1].grad[c] += og[r * d + c];
                         });
}

Tensor scale_rows(const Tensor& a, const std::vector<double>& m) {
  check(a.shape().size() == 2, "scale_rows: a must be 2-D");
  std::size_t n = a.rows(), d = a.cols();
  check(m.size() == n, "scale_rows: multiplier count must equal row count");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = av[r * d + c] * m[r];
  return Tensor::make_op(a.shape(), std::move(out), {a},
                         [m, d](std::span<const double> og, std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           std::size_t n = m.size();
                           for (std::size_t r = 0; r < n; ++r)
                             for (std::size_t c = 0; c < d; ++c)
                               ps[0].grad[r * d + c] += og[r * d + c] * m[r];
                         });
}

// ----- matmul -----

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2, "matmul: operands must be 2-D");
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  check(b.rows() == k, "matmul: inner dimensions disagree");
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aik * bv[kk * n + j];
    }
  return Tensor::make_op(
      {m, n}, std::move(out), {a, b},
      [m, k, n](std::span<const double> og, std::span<GradSlot> ps) {
        if (!ps[0].grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double g = og[i * n + j];
              if (g == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk)
                ps[0].grad[i * k + kk] += g * ps[1].value[kk * n + j];
            }
        if (!ps[1].grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              double av = ps[0].value[i * k + kk];
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j)
                ps[1].grad[kk * n + j] += av * og[i * n + j];
            }
      });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2,
        "matmul_nt: operands must be 2-D");
  std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  check(b.cols() == k, "matmul_nt: inner dimensions disagree");
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += av[i * k + kk] * bv[j * k + kk];
      out[i * n + j] = acc;
    }
  return Tensor::make_op(
      {m, n}, std::move(out), {a, b},
      [m, k, n](std::span<const double> og, std::span<GradSlot> ps) {
        if (!ps[0].grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double g = og[i * n + j];
              if (g == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk)
                ps[0].grad[i * k + kk] += g * ps[1].value[j * k + kk];
            }
        if (!ps[1].grad.empty())
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              double g = og[i * n + j];
              if (g == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk)
                ps[1].grad[j * k + kk] += g * ps[0].value[i * k + kk];
            }
      });
}

// ----- nonlinearities and reductions -----

Tensor silu(const Tensor& x) {
  std::vector<double> out(x.numel());
  std::vector<double> deriv(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = sigmoid(xv[i]);
    out[i] = xv[i] * s;
    deriv[i] = s * (1.0 + xv[i] * (1.0 - s));
  }
  return Tensor::make_op(x.shape(), std::move(out), {x},
                         [deriv = std::move(deriv)](std::span<const double> og,
                                                    std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           for (std::size_t i = 0; i < og.size(); ++i)
                             ps[0].grad[i] += og[i] * deriv[i];
                         });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return Tensor::make_op({1}, {acc}, {x},
                         [](std::span<const double> og, std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           for (std::size_t i = 0; i < ps[0].grad.size(); ++i)
                             ps[0].grad[i] += og[0];
                         });
}

Tensor row_sum(const Tensor& x) {
  check(x.shape().size() == 2, "row_sum: x must be 2-D");
  std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(n, 0.0);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r] += xv[r * d + c];
  return Tensor::make_op({n}, std::move(out), {x},
                         [d](std::span<const double> og, std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           std::size_t n = og.size();
                           for (std::size_t r = 0; r < n; ++r)
                             for (std::size_t c = 0; c < d; ++c)
                               ps[0].grad[r * d + c] += og[r];
                         });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2,
        "concat_cols: operands must be 2-D");
  check(a.rows() == b.rows(), "concat_cols: row counts disagree");
  std::size_t n = a.rows(), da = a.cols(), db = b.cols();
  std::vector<double> out(n * (da + db));
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < da; ++c) out[r * (da + db) + c] = av[r * da + c];
    for (std::size_t c = 0; c < db; ++c) out[r * (da + db) + da + c] = bv[r * db + c];
  }
  return Tensor::make_op(
      {n, da + db}, std::move(out), {a, b},
      [n, da, db](std::span<const double> og, std::span<GradSlot> ps) {
        for (std::size_t r = 0; r < n; ++r) {
          if (!ps[0].grad.empty())
            for (std::size_t c = 0; c < da; ++c)
              ps[0].grad[r * da + c] += og[r * (da + db) + c];
          if (!ps[1].grad.empty())
            for (std::size_t c = 0; c < db; ++c)
              ps[1].grad[r * db + c] += og[r * (da + db) + da + c];
        }
      });
}

// ----- indexed accumulation -----

Tensor index_weighted_sum(const Tensor& x, const std::vector<int>& src,
                          const std::vector<int>& dst,
                          const std::vector<double>& weights,
                          std::size_t out_rows) {
  check(x.shape().size() == 2, "index_weighted_sum: x must be 2-D");
  check(src.size() == dst.size(), "index_weighted_sum: src/dst size mismatch");
  check(weights.empty() || weights.size() == src.size(),
        "index_weighted_sum: weight count mismatch");
  std::size_t n = x.rows(), d = x.cols();
  for (std::size_t p = 0; p < src.size(); ++p) {
    check(src[p] >= 0 && static_cast<std::size_t>(src[p]) < n,
          "index_weighted_sum: src index out of range");
    check(dst[p] >= 0 && static_cast<std::size_t>(dst[p]) < out_rows,
          "index_weighted_sum: dst index out of range");
  }
  std::vector<double> out(out_rows * d, 0.0);
  const auto& xv = x.values();
  for (std::size_t p = 0; p < src.size(); ++p) {
    double w = weights.empty() ? 1.0 : weights[p];
    const double* row = &xv[static_cast<std::size_t>(src[p]) * d];
    double* orow = &out[static_cast<std::size_t>(dst[p]) * d];
    for (std::size_t c = 0; c < d; ++c) orow[c] += w * row[c];
  }
  return Tensor::make_op(
      {out_rows, d}, std::move(out), {x},
      [src, dst, weights, d](std::span<const double> og, std::span<GradSlot> ps) {
        if (ps[0].grad.empty()) return;
        for (std::size_t p = 0; p < src.size(); ++p) {
          double w = weights.empty() ? 1.0 : weights[p];
          const double* orow = &og[static_cast<std::size_t>(dst[p]) * d];
          double* grow = &ps[0].grad[static_cast<std::size_t>(src[p]) * d];
          for (std::size_t c = 0; c < d; ++c) grow[c] += w * orow[c];
        }
      });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  std::vector<int> dst(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) dst[i] = static_cast<int>(i);
  return index_weighted_sum(x, idx, dst, {}, idx.size());
}

Tensor scatter_sum_rows(const Tensor& x, const std::vector<int>& dst,
                        std::size_t out_rows) {
  check(dst.size() == x.rows(), "scatter_sum_rows: one target per row required");
  std::vector<int> src(dst.size());
  for (std::size_t i = 0; i < dst.size(); ++i) src[i] = static_cast<int>(i);
  return index_weighted_sum(x, src, dst, {}, out_rows);
}

Tensor segment_mean_rows(const Tensor& x, const std::vector<int>& seg,
                         std::size_t n_segments) {
  check(seg.size() == x.rows(), "segment_mean_rows: one segment per row required");
  std::vector<double> count(n_segments, 0.0);
  for (int s : seg) {
    check(s >= 0 && static_cast<std::size_t>(s) < n_segments,
          "segment_mean_rows: segment out of range");
    count[static_cast<std::size_t>(s)] += 1.0;
  }
  std::vector<int> src(seg.size());
  std::vector<double> w(seg.size());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    src[i] = static_cast<int>(i);
    w[i] = 1.0 / count[static_cast<std::size_t>(seg[i])];
  }
  return index_weighted_sum(x, src, seg, w, n_segments);
}

// ----- dropout -----

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  check(p >= 0.0 && p < 1.0, "dropout: p must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  std::vector<double> mask(x.numel());
  double keep_scale = 1.0 / (1.0 - p);
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return Tensor::make_op(x.shape(), std::move(out), {x},
                         [mask = std::move(mask)](std::span<const double> og,
                                                  std::span<GradSlot> ps) {
                           if (ps[0].grad.empty()) return;
                           for (std::size_t i = 0; i < og.size(); ++i)
                             ps[0].grad[i] += og[i] * mask[i];
                         });
}

// ----- batch normalization -----

BatchNorm BatchNorm::make(std::size_t dim) {
  BatchNorm bn;
  bn.gamma = Tensor::full({dim}, 1.0, true);
  bn.beta = Tensor::zeros({dim}, true);
  bn.running_mean.assign(dim, 0.0);
  bn.running_var.assign(dim, 1.0);
  return bn;
}

Tensor batchnorm(const Tensor& x, BatchNorm& bn, bool training) {
  check(x.shape().size() == 2, "batchnorm: x must be 2-D");
  std::size_t n = x.rows(), d = x.cols();
  check(bn.gamma.numel() == d && bn.beta.numel() == d &&
            bn.running_mean.size() == d && bn.running_var.size() == d,
        "batchnorm: state dimension mismatch");
  check(n > 0, "batchnorm: empty batch");
  const auto& xv = x.values();
  const auto& gv = bn.gamma.values();
  const auto& bv = bn.beta.values();

  std::vector<double> mean(d, 0.0), var(d, 0.0);
  if (training) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) mean[c] += xv[r * d + c];
    for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        double t = xv[r * d + c] - mean[c];
        var[c] += t * t;
      }
    for (std::size_t c = 0; c < d; ++c) var[c] /= static_cast<double>(n);
    for (std::size_t c = 0; c < d; ++c) {
      bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean[c];
      bn.running_var[c] = (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * var[c];
    }
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }

  // inv_sigma 0 marks a (near-)constant column; those normalize to zero.
  std::vector<double> inv_sigma(d);
  for (std::size_t c = 0; c < d; ++c)
    inv_sigma[c] = var[c] < batchnorm_variance_floor ? 0.0 : 1.0 / std::sqrt(var[c]);

  std::vector<double> xhat(n * d);
  std::vector<double> out(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      double h = (xv[r * d + c] - mean[c]) * inv_sigma[c];
      xhat[r * d + c] = h;
      out[r * d + c] = gv[c] * h + bv[c];
    }

  if (training) {
    return Tensor::make_op(
        x.shape(), std::move(out), {x, bn.gamma, bn.beta},
        [n, d, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
            std::span<const double> og, std::span<GradSlot> ps) {
          // dbeta and dgamma are plain column sums.
          if (!ps[2].grad.empty())
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t c = 0; c < d; ++c) ps[2].grad[c] += og[r * d + c];
          if (!ps[1].grad.empty())
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t c = 0; c < d; ++c)
                ps[1].grad[c] += og[r * d + c] * xhat[r * d + c];
          if (ps[0].grad.empty()) return;
          // dx folds the dependence of batch mean and variance on x:
          // dx = inv_sigma * (dxh - mean_r(dxh) - xhat * mean_r(dxh*xhat)).
          std::vector<double> mean_dxh(d, 0.0), mean_dxh_xhat(d, 0.0);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              double dxh = og[r * d + c] * ps[1].value[c];
              mean_dxh[c] += dxh;
              mean_dxh_xhat[c] += dxh * xhat[r * d + c];
            }
          for (std::size_t c = 0; c < d; ++c) {
            mean_dxh[c] /= static_cast<double>(n);
            mean_dxh_xhat[c] /= static_cast<double>(n);
          }
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
              double dxh = og[r * d + c] * ps[1].value[c];
              ps[0].grad[r * d + c] +=
                  inv_sigma[c] *
                  (dxh - mean_dxh[c] - xhat[r * d + c] * mean_dxh_xhat[c]);
            }
        });
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x, bn.gamma, bn.beta},
      [n, d, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
          std::span<const double> og, std::span<GradSlot> ps) {
        if (!ps[2].grad.empty())
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) ps[2].grad[c] += og[r * d + c];
        if (!ps[1].grad.empty())
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c)
              ps[1].grad[c] += og[r * d + c] * xhat[r * d + c];
        if (ps[0].grad.empty()) return;
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c)
            ps[0].grad[r * d + c] += og[r * d + c] * ps[1].value[c] * inv_sigma[c];
      });
}

// ----- losses -----

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  check(logits.shape().size() == 2, "softmax_cross_entropy: logits must be 2-D");
  std::size_t n = logits.rows(), cdim = logits.cols();
  check(labels.size() == n, "softmax_cross_entropy: one label per row required");
  for (int y : labels)
    check(y >= 0 && static_cast<std::size_t>(y) < cdim,
          "softmax_cross_entropy: label out of range");
  const auto& zv = logits.values();
  std::vector<double> probs(n * cdim);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &zv[r * cdim];
    double m = z[0];
    for (std::size_t c = 1; c < cdim; ++c) m = std::max(m, z[c]);
    double se = 0.0;
    for (std::size_t c = 0; c < cdim; ++c) se += std::exp(z[c] - m);
    double lse = m + std::log(se);
    for (std::size_t c = 0; c < cdim; ++c) probs[r * cdim + c] = std::exp(z[c] - lse);
    loss += lse - z[static_cast<std::size_t>(labels[r])];
  }
  loss /= static_cast<double>(n);
  return Tensor::make_op(
      {1}, {loss}, {logits},
      [n, cdim, labels, probs = std::move(probs)](std::span<const double> og,
                                                  std::span<GradSlot> ps) {
        if (ps[0].grad.empty()) return;
        double g = og[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < cdim; ++c) {
            double ind = (static_cast<std::size_t>(labels[r]) == c) ? 1.0 : 0.0;
            ps[0].grad[r * cdim + c] += g * (probs[r * cdim + c] - ind);
          }
      });
}

Tensor mse_loss(const Tensor& pred, const std::vector<double>& target) {
  check(pred.numel() == target.size(), "mse_loss: prediction/target size mismatch");
  check(pred.numel() > 0, "mse_loss: empty prediction");
  const auto& pv = pred.values();
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    double e = pv[i] - target[i];
    loss += e * e;
  }
  loss /= static_cast<double>(pv.size());
  return Tensor::make_op(
      {1}, {loss}, {pred},
      [target](std::span<const double> og, std::span<GradSlot> ps) {
        if (ps[0].grad.empty()) return;
        double g = og[0] * 2.0 / static_cast<double>(target.size());
        for (std::size_t i = 0; i < target.size(); ++i)
          ps[0].grad[i] += g * (ps[0].value[i] - target[i]);
      });
}

// ----- gradient verification -----

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double h) {
  Tensor x0 = Tensor::from(x.shape(), x.values(), true);
  Tensor loss = f(x0);
  check(loss.numel() == 1, "grad_check: f must return a scalar");
  backward(loss);
  std::vector<double> analytic(x.numel(), 0.0);
  if (x0.has_grad()) analytic = x0.grad();

  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    std::vector<double> vp = x.values();
    vp[i] += h;
    double lp = f(Tensor::from(x.shape(), std::move(vp))).item();
    std::vector<double> vm = x.values();
    vm[i] -= h;
    double lm = f(Tensor::from(x.shape(), std::move(vm))).item();
    double fd = (lp - lm) / (2.0 * h);
    double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace kagnn::ad
