#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "kagnn/train.hpp"

namespace kagnn {

double weighted_f1(std::span<const int> y_true, std::span<const int> y_pred,
                   int n_classes) {
  if (y_true.empty()) throw std::invalid_argument("weighted_f1: empty input");
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("weighted_f1: length mismatch");
  if (n_classes < 1) throw std::invalid_argument("weighted_f1: n_classes < 1");
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= n_classes || y_pred[i] < 0 ||
        y_pred[i] >= n_classes)
      throw std::invalid_argument("weighted_f1: class id out of range");
  }

  std::vector<double> tp(n_classes, 0.0), fp(n_classes, 0.0), fn(n_classes, 0.0);
  std::vector<double> support(n_classes, 0.0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    support[y_true[i]] += 1.0;
    if (y_true[i] == y_pred[i]) {
      tp[y_true[i]] += 1.0;
    } else {
      fn[y_true[i]] += 1.0;
      fp[y_pred[i]] += 1.0;
    }
  }

  double weighted = 0.0;
  const double total = static_cast<double>(y_true.size());
  for (int c = 0; c < n_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    const double f1 = denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
    weighted += f1 * (support[c] / total);
  }
  return weighted;
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("mse: empty input");
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("mse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_pred[i] - y_true[i];
    acc += d * d;
  }
  return acc / static_cast<double>(y_true.size());
}

double mae(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.empty()) throw std::invalid_argument("mae: empty input");
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("mae: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    acc += std::fabs(y_pred[i] - y_true[i]);
  }
  return acc / static_cast<double>(y_true.size());
}

std::string to_string(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "mse";
}

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::weighted_f1: return "weighted_f1";
    case MetricKind::mse: return "mse";
    case MetricKind::mae: return "mae";
  }
  return "?";
}

std::optional<LossKind> loss_kind_from_string(const std::string& s) {
  if (s == "cross_entropy") return LossKind::cross_entropy;
  if (s == "mse") return LossKind::mse;
  return std::nullopt;
}

std::optional<MetricKind> metric_kind_from_string(const std::string& s) {
  if (s == "weighted_f1") return MetricKind::weighted_f1;
  if (s == "mse") return MetricKind::mse;
  if (s == "mae") return MetricKind::mae;
  return std::nullopt;
}

LossKind loss_for_task(TaskKind t) {
  switch (t) {
    case TaskKind::node_class:
    case TaskKind::graph_class: return LossKind::cross_entropy;
    default: return LossKind::mse;
  }
}

MetricKind metric_for_task(TaskKind t) {
  switch (t) {
    case TaskKind::node_class:
    case TaskKind::graph_class: return MetricKind::weighted_f1;
    default: return MetricKind::mse;
  }
}

bool metric_improves_upward(MetricKind m) {
  return m == MetricKind::weighted_f1;
}

std::string to_string(RunStatus s) {
  return s == RunStatus::ok ? "ok" : "unstable";
}

}  // namespace kagnn
