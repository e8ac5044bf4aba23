#ifndef KAGNN_CHECKPOINT_HPP
#define KAGNN_CHECKPOINT_HPP

#include <optional>
#include <string>
#include <vector>

#include "kagnn/data.hpp"
#include "kagnn/models.hpp"

namespace kagnn {

inline constexpr int checkpoint_format_version = 1;

// Everything needed to rebuild a trained model: the architecture, every
// trainable array in canonical order, batchnorm running statistics, the task
// it was trained for, and the feature-scaling constants fitted on its
// training split.
struct Checkpoint {
  ModelConfig config;
  TaskKind task = TaskKind::node_class;
  std::vector<std::vector<double>> param_values;  // for_each_param order
  std::vector<std::vector<double>> bn_running;    // mean, var per batchnorm layer
  std::optional<FeatureScaler> scaler;
  bool restored_best = false;  // whether the values come from the best epoch
};

Checkpoint make_checkpoint(const Model& m, TaskKind task,
                           const std::optional<FeatureScaler>& scaler,
                           bool restored_best);

// Rebuilds the model and loads the stored values into it; throws when the
// arrays do not match the architecture.
Model checkpoint_to_model(const Checkpoint& c);

// Versioned JSON container; finite doubles survive a write/read round trip
// bit for bit. Non-finite parameter values are refused at save time.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kagnn

#endif
