#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgmrec/model.hpp"
#include "lgmrec/optim.hpp"

namespace lgmrec {

/// Draws (user, positive, negative) triples against the training interactions.
class TripleSampler {
 public:
  TripleSampler(std::span<const Interaction> train, std::size_t num_users, std::size_t num_items);

  /// Negative uniform over the user's non-interacted items (rejection sampling).
  std::size_t negative_for(std::size_t user, Rng& rng) const;
  /// Positives uniform over training interactions (with replacement).
  std::vector<objective::Triple> sample(std::size_t batch, Rng& rng) const;
  /// One shuffled pass over all usable training interactions, cut into batches.
  std::vector<std::vector<objective::Triple>> epoch(std::size_t batch, Rng& rng) const;

  bool interacted(std::size_t user, std::size_t item) const;
  std::size_t usable_interactions() const noexcept { return positives_.size(); }

 private:
  std::size_t num_items_;
  std::vector<std::vector<std::size_t>> items_;  // sorted per user
  std::vector<Interaction> positives_;           // users with at least one negative available
};

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double total = 0.0;
  double bpr = 0.0;
  double hcl = 0.0;
  std::optional<double> valid_recall;
  double seconds = 0.0;

  /// Everything but the wall time.
  bool same_values(const EpochStats& o) const;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when nothing was validated
  double best_valid = 0.0;
  bool truncated = false;

  bool same_values(const TrainHistory& o) const;
  /// One JSON object per epoch.
  std::string to_jsonl() const;
};

/// Counts consecutive epochs that fail to strictly exceed the best score.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool update(double score);
  bool improved() const noexcept { return improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = 0.0;
  bool improved_ = false;
};

/// Single-threaded owner of parameters, optimizer state and the per-purpose streams.
class Trainer {
 public:
  Trainer(const Model& model, ParamSet params);

  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }

  /// One pass of ceil(nnz/batch) Adam steps. Non-finite losses throw kNumeric.
  EpochStats train_epoch();

  /// Sees every step's tape after the loss is built, before the update.
  using StepHook = std::function<void(const ad::Tape&, const LossGraph&,
                                      std::span<const objective::Triple>)>;
  EpochStats train_epoch(const StepHook& hook);

  /// Runs the given batches instead of sampling them.
  EpochStats train_batches(std::span<const std::vector<objective::Triple>> batches,
                           const StepHook& hook = {});

  std::size_t epochs_run() const noexcept { return epochs_; }

 private:
  const Model& model_;
  ParamSet params_;
  AdamState adam_;
  TripleSampler sampler_;
  Rng sampling_rng_;
  Rng dropout_rng_;
  Rng gumbel_rng_;
  std::size_t epochs_ = 0;
};

/// Validation score of a parameter snapshot (the caller decides how to evaluate).
using Validator = std::function<double(const ParamSet&)>;

struct FitResult {
  ParamSet best_params;
  TrainHistory history;
};

struct FitOptions {
  /// Called after each epoch with its record; for progress output.
  std::function<void(const EpochStats&)> on_epoch;
};

/// Trains with early stopping on the validator; the default validator is
/// validation Recall@20 in eval mode.
FitResult fit(const Model& model, ParamSet init, const Validator& validator = {},
              const FitOptions& opts = {});

Validator validation_recall(const Model& model, std::size_t n = 20);

/// Fraction of dimensions with strictly opposite, nonzero signs.
double opposite_sign_ratio(std::span<const double> a, std::span<const double> b);

struct ConflictReport {
  std::vector<std::size_t> users;
  /// ratios[epoch][k] for users[k]; none when the user was never a batch anchor.
  std::vector<std::vector<std::optional<double>>> ratios;
  std::vector<EpochStats> epochs;

  std::string to_tsv() const;
};

/// Per-epoch accumulated BPR gradients on each sampled user's shared ID row, split
/// into the collaborative and the multimodal pathway. Requires shared user IDs.
ConflictReport gradient_conflict_diagnostic(const Model& model, ParamSet init,
                                            std::span<const std::size_t> users,
                                            std::size_t epochs);

/// Draws `count` distinct users from the diagnostic stream.
std::vector<std::size_t> sample_users(std::size_t num_users, std::size_t count,
                                      std::uint64_t seed);

}  // namespace lgmrec
