#ifndef KAGNN_HPSEARCH_HPP
#define KAGNN_HPSEARCH_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kagnn/data.hpp"
#include "kagnn/models.hpp"
#include "kagnn/train.hpp"

namespace kagnn {

// Sampling bounds, all inclusive. Learning rate is drawn log-uniformly; the
// integer ranges uniformly.
struct SearchSpace {
  double lr_lo = 1e-4;
  double lr_hi = 1e-2;
  int layers_lo = 1;
  int layers_hi = 3;
  int hidden_lo = 16;
  int hidden_hi = 64;
  double dropout_lo = 0.0;
  double dropout_hi = 0.5;
  int grid_lo = 3;
  int grid_hi = 5;
  int spline_lo = 3;
  int spline_hi = 5;
};

std::vector<std::string> validate_search_space(const SearchSpace& s);

struct SampledConfig {
  ModelConfig model;
  TrainConfig train;
};

// One draw. Order: learning rate, layers, hidden width, dropout, then grid
// and spline order — the last two only for spline-based kinds, whose absence
// leaves the defaults in place and consumes no randomness.
SampledConfig sample_config(const SearchSpace& space, LayerKind kind, TaskKind task,
                            int in_dim, int out_dim, const TrainConfig& base,
                            Rng& rng);

enum class TrialStatus { ok, unstable };

struct Trial {
  int index = 0;
  SampledConfig cfg;
  double val_metric = 0.0;
  int stop_epoch = 0;
  TrialStatus status = TrialStatus::ok;
};

struct SearchResult {
  std::vector<Trial> trials;  // ordered by trial index
  int best_index = -1;        // position in trials
  SampledConfig best;
};

// Raised when every trial aborted; carries the full table for reporting.
class SearchFailure : public std::runtime_error {
 public:
  explicit SearchFailure(std::vector<Trial> trials);
  const std::vector<Trial>& trials() const { return trials_; }

 private:
  std::vector<Trial> trials_;
};

// Trains one sampled configuration and reports its result; injectable so the
// search harness can be exercised against an oracle. The default trainer
// builds a fresh model per trial and never touches the test split.
using TrainerFn = std::function<RunResult(const SampledConfig& cfg, IngestionLog* log)>;

inline constexpr int default_search_trials = 40;

// Seeded random search: n_trials independent draws, each trained with a
// patience-truncated budget; best = best validation metric in the task
// metric's own direction (ties keep the earliest trial).
SearchResult run_search(const SearchSpace& space, LayerKind kind, TaskKind task,
                        const std::vector<DatasetRecord>& records,
                        const Splits& splits, const TrainConfig& base,
                        int n_trials, std::uint64_t seed,
                        const TrainerFn& trainer = nullptr,
                        IngestionLog* audit = nullptr);

// Fixed-width text table, one row per trial; "-" marks spline columns of
// non-spline kinds.
std::string format_trial_table(const std::vector<Trial>& trials);

}  // namespace kagnn

#endif
