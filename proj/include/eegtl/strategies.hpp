#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eegtl/checkpoint.hpp"
#include "eegtl/data.hpp"
#include "eegtl/metrics.hpp"
#include "eegtl/split.hpp"

namespace eegtl {

/// Architecture fields a config may override; the rest follow the data.
struct ArchitectureOverrides {
  std::optional<std::size_t> temporal_filters;
  std::optional<std::size_t> depth_multiplier;
  std::optional<std::size_t> separable_filters;
  std::optional<std::size_t> temporal_kernel_len;
  std::optional<std::size_t> separable_kernel_len;
  std::optional<std::size_t> pool1;
  std::optional<std::size_t> pool2;
  std::optional<double> dropout_rate;
};

ArchitectureSpec resolve_architecture(const EpochSet& reference, const ArchitectureOverrides& overrides);

struct TrainingPlan {
  Strategy strategy = Strategy::standard;
  FreezeDepth freeze_depth = FreezeDepth::none;
  std::size_t epochs = 200;
  /// Phase-2 epochs of split-style runs; defaults to `epochs`.
  std::optional<std::size_t> retrain_epochs;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  /// Phase-2 learning rate; defaults to `lr`.
  std::optional<double> retrain_lr;
  std::size_t patience = 20;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> pretrained;
  bool standardize = true;
  KappaMode kappa_mode = KappaMode::paper;
  ArchitectureOverrides architecture;
  std::string dataset_id = "unnamed";

  void validate() const;
  std::size_t phase2_epochs() const { return retrain_epochs.value_or(epochs); }
  double phase2_lr() const { return retrain_lr.value_or(lr); }
};

/// Origin of one pooled trial.
struct TrialRef {
  SessionKey key;
  std::size_t trial = 0;
  friend bool operator==(const TrialRef&, const TrialRef&) = default;
};

/// Trials from several sets concatenated, remembering where each came from.
struct TrialPool {
  EpochSet data;
  std::vector<TrialRef> source;

  std::size_t size() const { return source.size(); }
};

TrialPool make_pool(const Datasets& datasets, std::span<const SessionKey> keys, const ChannelStats* stats = nullptr);

/// Moves the last `fraction` (rounded down) of each class's trials, in pool order, into a validation pool.
std::pair<TrialPool, TrialPool> split_validation(const TrialPool& pool, double fraction);

/// Instrumentation points. Phases are "train" (phase 1) and "retrain" (phase 2).
struct TrainHooks {
  std::function<void(const std::string& phase, std::span<const TrialRef> batch)> on_batch;
  std::function<void(const std::string& phase, std::span<const TrialRef> trials)> on_evaluate;
  std::function<void(const std::string& phase, const ParamStore& params)> on_phase_start;
  std::function<void(const std::string& phase, const ParamStore& params)> on_phase_end;
};

struct LoopOptions {
  std::size_t epochs = 0;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  std::string phase = "train";
};

/// Mini-batch Adam on shuffled epochs. With a non-empty validation pool the
/// best-validation parameters are restored and training stops after
/// `patience` epochs without improvement.
History train_loop(const EEGNet& net, ParamStore& params, const TrialPool& train, const TrialPool& val,
                   const LoopOptions& options, const TrainHooks& hooks = {});

/// Mean cross-entropy in eval mode.
double evaluate_loss(const EEGNet& net, ParamStore& params, const TrialPool& pool);
/// Eval-mode softmax outputs [N, K].
Tensor predict(const EEGNet& net, ParamStore& params, const EpochSet& set);

struct TrainResult {
  ModelCheckpoint checkpoint;
  History history;
  EvaluationReport report;
  SplitAssignment split;
  SessionKey test_key;
};

TrainResult run_standard(const Datasets& datasets, int subject, const TrainingPlan& plan,
                         const TrainHooks& hooks = {});
/// One model for all subjects; one result per subject sharing the checkpoint.
std::map<int, TrainResult> run_distributed(const Datasets& datasets, const TrainingPlan& plan,
                                           const TrainHooks& hooks = {});
TrainResult run_split(const Datasets& datasets, int holdout, const TrainingPlan& plan, const TrainHooks& hooks = {});
TrainResult run_frozen(const Datasets& datasets, int holdout, const TrainingPlan& plan, const TrainHooks& hooks = {});
TrainResult run_transfer_standard(const ModelCheckpoint& source, const Datasets& datasets, int subject,
                                  const TrainingPlan& plan, const TrainHooks& hooks = {});
TrainResult run_transfer_split(const ModelCheckpoint& source, const Datasets& datasets, int holdout,
                               const TrainingPlan& plan, const TrainHooks& hooks = {});

/// Runs `plan.strategy` for every subject (or once for distributed).
/// Transfer strategies need `source`.
std::map<int, TrainResult> run_all_subjects(const Datasets& datasets, const TrainingPlan& plan,
                                            const ModelCheckpoint* source = nullptr, const TrainHooks& hooks = {});

/// Throws ValidationError unless every set shares channels, samples, rate and classes.
void check_compatible(const Datasets& datasets);

}  // namespace eegtl
