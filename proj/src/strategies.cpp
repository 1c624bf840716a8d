#include "eegtl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

namespace eegtl {
namespace {

constexpr std::size_t kEvalChunk = 64;

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

std::vector<const EpochSet*> sets_for(const Datasets& datasets, std::span<const SessionKey> keys) {
  std::vector<const EpochSet*> sets;
  for (const auto& key : keys) sets.push_back(&datasets.at(key));
  return sets;
}

std::optional<ChannelStats> training_stats(const Datasets& datasets, std::span<const SessionKey> keys,
                                           const TrainingPlan& plan) {
  if (!plan.standardize) return std::nullopt;
  const auto sets = sets_for(datasets, keys);
  return channel_stats(sets);
}

Provenance make_provenance(const TrainingPlan& plan, const EpochSet& reference, const std::optional<ChannelStats>& stats,
                           std::size_t epochs) {
  Provenance p;
  p.dataset_id = plan.dataset_id;
  p.strategy = std::string(to_string(plan.strategy));
  p.seed = plan.seed;
  p.epochs = epochs;
  p.channel_names = reference.channel_names;
  if (stats) {
    p.channel_mean = stats->mean;
    p.channel_std = stats->stddev;
  }
  return p;
}

/// Trains on `keys` (minus a validation share) and reports phase boundaries.
History run_phase(const EEGNet& net, ParamStore& params, const Datasets& datasets, std::span<const SessionKey> keys,
                  const std::optional<ChannelStats>& stats, const LoopOptions& options, const TrainingPlan& plan,
                  const TrainHooks& hooks) {
  const TrialPool pool = make_pool(datasets, keys, stats ? &*stats : nullptr);
  const auto [train, val] = split_validation(pool, plan.validation_fraction);
  if (hooks.on_phase_start) hooks.on_phase_start(options.phase, params);
  History history = train_loop(net, params, train, val, options, hooks);
  if (hooks.on_phase_end) hooks.on_phase_end(options.phase, params);
  spdlog::debug("{} phase: {} epochs on {} trials ({} validation)", options.phase, history.size(), train.size(),
                val.size());
  return history;
}

EvaluationReport evaluate_key(const EEGNet& net, ParamStore& params, const Datasets& datasets, SessionKey key,
                              const std::optional<ChannelStats>& stats, const TrainingPlan& plan,
                              const TrainHooks& hooks) {
  const SessionKey keys[] = {key};
  const TrialPool pool = make_pool(datasets, keys, stats ? &*stats : nullptr);
  if (hooks.on_evaluate) hooks.on_evaluate("test", pool.source);
  return evaluate(predict(net, params, pool.data), pool.data.labels, pool.data.class_names, plan.kappa_mode);
}

LoopOptions phase_options(const TrainingPlan& plan, bool second, int subject) {
  LoopOptions o;
  o.epochs = second ? plan.phase2_epochs() : plan.epochs;
  o.lr = second ? plan.phase2_lr() : plan.lr;
  o.batch_size = plan.batch_size;
  o.patience = plan.patience;
  o.phase = second ? "retrain" : "train";
  o.seed = derive_seed(plan.seed, o.phase, static_cast<std::uint64_t>(subject));
  return o;
}

void append(History& into, const History& more) { into.insert(into.end(), more.begin(), more.end()); }

void check_transfer_source(const ModelCheckpoint& source, const Datasets& datasets) {
  source.validate();
  const EpochSet& target = datasets.begin()->second;
  if (source.provenance.channel_names != target.channel_names) {
    throw ValidationError("transfer: source channels [" + join(source.provenance.channel_names) +
                          "] differ from target channels [" + join(target.channel_names) + "]");
  }
  if (source.spec.n_samples != target.n_samples || source.spec.sample_rate_hz != target.sample_rate_hz) {
    throw ValidationError("transfer: source expects " + std::to_string(source.spec.n_samples) + " samples at " +
                          format_number(source.spec.sample_rate_hz) + " Hz, target has " +
                          std::to_string(target.n_samples) + " at " + format_number(target.sample_rate_hz) + " Hz");
  }
}

/// Head surgery for the target class count, keeping the source lineage.
ModelCheckpoint transferred(const ModelCheckpoint& source, const Datasets& datasets, const TrainingPlan& plan,
                            int subject) {
  check_transfer_source(source, datasets);
  Rng rng(derive_seed(plan.seed, "head", static_cast<std::uint64_t>(subject)));
  ModelCheckpoint ckpt = replace_head(source, datasets.begin()->second.n_classes(), rng);
  ckpt.params.unfreeze_all();
  ckpt.params.reset_optimizer();
  ckpt.provenance.source_checkpoint = plan.pretrained ? plan.pretrained->string() : source.provenance.dataset_id;
  ckpt.provenance.source_crc32 = checkpoint_crc32(source);
  return ckpt;
}

TrainResult finish(const EEGNet& net, ParamStore params, Provenance provenance, History history,
                   EvaluationReport report, SplitAssignment split) {
  provenance.epochs = history.size();
  params.unfreeze_all();
  params.reset_optimizer();
  TrainResult r{make_checkpoint(net, std::move(params), std::move(provenance)), std::move(history), std::move(report),
                std::move(split), {}};
  r.test_key = r.split.test.front();
  return r;
}

/// Phase 1 on the other subjects, phase 2 on the holdout's first session.
TrainResult split_style(const Datasets& datasets, int holdout, const TrainingPlan& plan, FreezeDepth depth,
                        const ModelCheckpoint* start, const TrainHooks& hooks) {
  check_compatible(datasets);
  SplitAssignment split = make_split(datasets, plan.strategy, holdout);
  const EpochSet& reference = datasets.at(split.retrain.front());
  const auto stats = training_stats(datasets, split.train, plan);

  std::optional<EEGNet> net;
  ParamStore params;
  Provenance provenance;
  if (start) {
    net.emplace(start->spec);
    params = start->params;
    provenance = start->provenance;
    const auto fresh = make_provenance(plan, reference, stats, 0);
    provenance.dataset_id = fresh.dataset_id;
    provenance.strategy = fresh.strategy;
    provenance.seed = fresh.seed;
    provenance.channel_mean = fresh.channel_mean;
    provenance.channel_std = fresh.channel_std;
  } else {
    Rng init(derive_seed(plan.seed, "init", static_cast<std::uint64_t>(holdout)));
    BuiltModel built = build_model(resolve_architecture(reference, plan.architecture), init);
    net.emplace(built.net);
    params = std::move(built.params);
    provenance = make_provenance(plan, reference, stats, 0);
  }

  History history = run_phase(*net, params, datasets, split.train, stats, phase_options(plan, false, holdout), plan, hooks);
  params.reset_optimizer();
  apply_freeze(params, depth, net->block_index());
  append(history, run_phase(*net, params, datasets, split.retrain, stats, phase_options(plan, true, holdout), plan, hooks));
  EvaluationReport report = evaluate_key(*net, params, datasets, split.test.front(), stats, plan, hooks);
  return finish(*net, std::move(params), std::move(provenance), std::move(history), std::move(report),
                std::move(split));
}

}  // namespace

ArchitectureSpec resolve_architecture(const EpochSet& reference, const ArchitectureOverrides& o) {
  ArchitectureSpec spec = default_architecture(reference.n_channels(), reference.n_samples, reference.n_classes(),
                                               reference.sample_rate_hz);
  if (o.temporal_filters) spec.temporal_filters = *o.temporal_filters;
  if (o.depth_multiplier) spec.depth_multiplier = *o.depth_multiplier;
  spec.separable_filters = o.separable_filters.value_or(spec.temporal_filters * spec.depth_multiplier);
  if (o.temporal_kernel_len) spec.temporal_kernel_len = *o.temporal_kernel_len;
  if (o.separable_kernel_len) spec.separable_kernel_len = *o.separable_kernel_len;
  if (o.pool1) spec.pool1 = *o.pool1;
  if (o.pool2) spec.pool2 = *o.pool2;
  if (o.dropout_rate) spec.dropout_rate = *o.dropout_rate;
  spec.validate();
  return spec;
}

void TrainingPlan::validate() const {
  const bool transfer = strategy == Strategy::transfer_standard || strategy == Strategy::transfer_split;
  if (transfer && !pretrained) {
    throw ValidationError("plan: strategy " + std::string(to_string(strategy)) + " requires a pretrained checkpoint");
  }
  if (strategy == Strategy::frozen && freeze_depth == FreezeDepth::none) {
    throw ValidationError("plan: strategy frozen requires freeze_depth block1 or block1+2");
  }
  if (batch_size == 0) throw ValidationError("plan: batch_size must be positive");
  if (!(lr > 0.0) || !(phase2_lr() > 0.0)) throw ValidationError("plan: learning rates must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("plan: validation_fraction must lie in [0, 1)");
  }
  if (patience == 0) throw ValidationError("plan: patience must be positive");
}

void check_compatible(const Datasets& datasets) {
  if (datasets.empty()) throw ValidationError("datasets: inventory is empty");
  const EpochSet& ref = datasets.begin()->second;
  for (const auto& [key, set] : datasets) {
    if (set.channel_names != ref.channel_names || set.n_samples != ref.n_samples ||
        set.sample_rate_hz != ref.sample_rate_hz || set.class_names != ref.class_names) {
      throw ValidationError("datasets: " + to_string(key) + " differs in channels, samples, rate or classes from " +
                            to_string(datasets.begin()->first));
    }
  }
}

TrialPool make_pool(const Datasets& datasets, std::span<const SessionKey> keys, const ChannelStats* stats) {
  if (keys.empty()) throw ValidationError("make_pool: no sessions selected");
  TrialPool pool;
  for (const auto& key : keys) {
    auto it = datasets.find(key);
    if (it == datasets.end()) throw ValidationError("make_pool: missing " + to_string(key));
    const EpochSet& set = it->second;
    if (pool.source.empty()) {
      pool.data = set;
      pool.data.data.clear();
      pool.data.labels.clear();
    } else if (set.channel_names != pool.data.channel_names || set.n_samples != pool.data.n_samples) {
      throw ValidationError("make_pool: " + to_string(key) + " does not match the shape of the pooled sets");
    }
    if (stats) {
      auto z = standardize(set, stats).first;
      pool.data.data.insert(pool.data.data.end(), z.data.begin(), z.data.end());
    } else {
      pool.data.data.insert(pool.data.data.end(), set.data.begin(), set.data.end());
    }
    pool.data.labels.insert(pool.data.labels.end(), set.labels.begin(), set.labels.end());
    for (std::size_t t = 0; t < set.n_trials(); ++t) pool.source.push_back({key, t});
  }
  return pool;
}

std::pair<TrialPool, TrialPool> split_validation(const TrialPool& pool, double fraction) {
  const std::size_t classes = pool.data.n_classes();
  std::vector<std::size_t> per_class(classes, 0);
  for (int l : pool.data.labels) ++per_class[static_cast<std::size_t>(l)];
  std::vector<std::size_t> held(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    held[k] = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(per_class[k])));
  }
  TrialPool train, val;
  train.data = val.data = pool.data;
  train.data.data.clear(), train.data.labels.clear();
  val.data.data.clear(), val.data.labels.clear();
  std::vector<std::size_t> seen(classes, 0);
  for (std::size_t t = 0; t < pool.size(); ++t) {
    const auto k = static_cast<std::size_t>(pool.data.labels[t]);
    TrialPool& dst = seen[k]++ >= per_class[k] - held[k] ? val : train;
    auto trial = pool.data.trial(t);
    dst.data.data.insert(dst.data.data.end(), trial.begin(), trial.end());
    dst.data.labels.push_back(pool.data.labels[t]);
    dst.source.push_back(pool.source[t]);
  }
  return {std::move(train), std::move(val)};
}

Tensor predict(const EEGNet& net, ParamStore& params, const EpochSet& set) {
  const std::size_t classes = net.spec().n_classes;
  Tensor out({set.n_trials(), classes});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.n_trials(); start += kEvalChunk) {
    idx.resize(std::min(kEvalChunk, set.n_trials() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor probs = net.predict_proba(params, make_batch(set, idx));
    std::copy(probs.data().begin(), probs.data().end(), out.values().begin() + start * classes);
  }
  return out;
}

double evaluate_loss(const EEGNet& net, ParamStore& params, const TrialPool& pool) {
  double total = 0.0;
  std::vector<std::size_t> idx;
  Rng unused(0);
  for (std::size_t start = 0; start < pool.size(); start += kEvalChunk) {
    idx.resize(std::min(kEvalChunk, pool.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Graph<float> g;
    const std::span<const int> labels(pool.data.labels.data() + start, idx.size());
    Var loss = softmax_cross_entropy(g, net.forward(g, params, make_batch(pool.data, idx), Mode::eval, unused), labels);
    total += static_cast<double>(g.value(loss)[0]) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(pool.size());
}

History train_loop(const EEGNet& net, ParamStore& params, const TrialPool& train, const TrialPool& val,
                   const LoopOptions& options, const TrainHooks& hooks) {
  if (train.size() == 0) throw ValidationError("train_loop: empty training set for phase " + options.phase);
  if (options.batch_size == 0) throw ValidationError("train_loop: batch_size must be positive");
  History history;
  if (options.epochs == 0) return history;

  Rng rng(options.seed);
  const AdamConfig adam{options.lr};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrialRef> refs;
  std::vector<int> labels;

  std::map<std::string, std::vector<float>> best;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(options.batch_size, order.size() - start));
      refs.clear();
      labels.clear();
      for (std::size_t i : idx) {
        refs.push_back(train.source[i]);
        labels.push_back(train.data.labels[i]);
      }
      if (hooks.on_batch) hooks.on_batch(options.phase, refs);
      Graph<float> g;
      Var loss = softmax_cross_entropy(g, net.forward(g, params, make_batch(train.data, idx), Mode::train, rng), labels);
      g.backward(loss);
      adam_step(params, adam);
      total += static_cast<double>(g.value(loss)[0]) * static_cast<double>(idx.size());
    }
    EpochRecord record{epoch, total / static_cast<double>(train.size()), std::numeric_limits<double>::quiet_NaN(),
                       options.lr, options.phase};
    if (val.size() > 0) {
      if (hooks.on_evaluate) hooks.on_evaluate(options.phase, val.source);
      record.val_loss = evaluate_loss(net, params, val);
    }
    history.push_back(record);
    spdlog::trace("{} epoch {}: train {:.4f} val {:.4f}", options.phase, epoch, record.train_loss, record.val_loss);
    if (val.size() == 0) continue;
    if (record.val_loss < best_loss) {
      best_loss = record.val_loss;
      stale = 0;
      for (const auto& [name, entry] : params.entries()) best[name] = entry.tensor.values();
    } else if (++stale >= options.patience) {
      break;
    }
  }
  for (auto& [name, values] : best) params.at(name).values() = values;
  return history;
}

TrainResult run_standard(const Datasets& datasets, int subject, const TrainingPlan& plan, const TrainHooks& hooks) {
  check_compatible(datasets);
  SplitAssignment split = make_split(datasets, Strategy::standard, subject);
  const EpochSet& reference = datasets.at(split.train.front());
  const auto stats = training_stats(datasets, split.train, plan);
  Rng init(derive_seed(plan.seed, "init", static_cast<std::uint64_t>(subject)));
  BuiltModel built = build_model(resolve_architecture(reference, plan.architecture), init);
  History history =
      run_phase(built.net, built.params, datasets, split.train, stats, phase_options(plan, false, subject), plan, hooks);
  EvaluationReport report = evaluate_key(built.net, built.params, datasets, split.test.front(), stats, plan, hooks);
  return finish(built.net, std::move(built.params), make_provenance(plan, reference, stats, 0), std::move(history),
                std::move(report), std::move(split));
}

std::map<int, TrainResult> run_distributed(const Datasets& datasets, const TrainingPlan& plan,
                                           const TrainHooks& hooks) {
  check_compatible(datasets);
  SplitAssignment split = make_split(datasets, Strategy::distributed, 0);
  const EpochSet& reference = datasets.at(split.train.front());
  const auto stats = training_stats(datasets, split.train, plan);
  Rng init(derive_seed(plan.seed, "init", 0));
  BuiltModel built = build_model(resolve_architecture(reference, plan.architecture), init);
  History history =
      run_phase(built.net, built.params, datasets, split.train, stats, phase_options(plan, false, 0), plan, hooks);
  TrainResult shared = finish(built.net, built.params, make_provenance(plan, reference, stats, 0), history, {}, split);
  std::map<int, TrainResult> results;
  for (const auto& key : split.test) {
    TrainResult r = shared;
    r.report = evaluate_key(built.net, built.params, datasets, key, stats, plan, hooks);
    r.test_key = key;
    results.emplace(key.subject, std::move(r));
  }
  return results;
}

TrainResult run_split(const Datasets& datasets, int holdout, const TrainingPlan& plan, const TrainHooks& hooks) {
  TrainingPlan p = plan;
  p.strategy = Strategy::split;
  return split_style(datasets, holdout, p, FreezeDepth::none, nullptr, hooks);
}

TrainResult run_frozen(const Datasets& datasets, int holdout, const TrainingPlan& plan, const TrainHooks& hooks) {
  TrainingPlan p = plan;
  p.strategy = Strategy::frozen;
  p.validate();
  return split_style(datasets, holdout, p, p.freeze_depth, nullptr, hooks);
}

TrainResult run_transfer_standard(const ModelCheckpoint& source, const Datasets& datasets, int subject,
                                  const TrainingPlan& plan, const TrainHooks& hooks) {
  check_compatible(datasets);
  TrainingPlan p = plan;
  p.strategy = Strategy::transfer_standard;
  SplitAssignment split = make_split(datasets, p.strategy, subject);
  const auto stats = training_stats(datasets, split.train, p);
  ModelCheckpoint start = transferred(source, datasets, p, subject);
  const EEGNet net = start.network();
  ParamStore params = start.params;
  Provenance provenance = start.provenance;
  const auto fresh = make_provenance(p, datasets.at(split.train.front()), stats, 0);
  provenance.dataset_id = fresh.dataset_id;
  provenance.strategy = fresh.strategy;
  provenance.seed = fresh.seed;
  provenance.channel_mean = fresh.channel_mean;
  provenance.channel_std = fresh.channel_std;

  apply_freeze(params, p.freeze_depth, net.block_index());
  History history = run_phase(net, params, datasets, split.train, stats, phase_options(p, true, subject), p, hooks);
  EvaluationReport report = evaluate_key(net, params, datasets, split.test.front(), stats, p, hooks);
  return finish(net, std::move(params), std::move(provenance), std::move(history), std::move(report),
                std::move(split));
}

TrainResult run_transfer_split(const ModelCheckpoint& source, const Datasets& datasets, int holdout,
                               const TrainingPlan& plan, const TrainHooks& hooks) {
  check_compatible(datasets);
  TrainingPlan p = plan;
  p.strategy = Strategy::transfer_split;
  const ModelCheckpoint start = transferred(source, datasets, p, holdout);
  return split_style(datasets, holdout, p, p.freeze_depth, &start, hooks);
}

std::map<int, TrainResult> run_all_subjects(const Datasets& datasets, const TrainingPlan& plan,
                                            const ModelCheckpoint* source, const TrainHooks& hooks) {
  plan.validate();
  if (plan.strategy == Strategy::distributed) return run_distributed(datasets, plan, hooks);
  const bool transfer = plan.strategy == Strategy::transfer_standard || plan.strategy == Strategy::transfer_split;
  if (transfer && !source) throw ValidationError("plan: transfer strategies need a source checkpoint");
  std::map<int, TrainResult> results;
  for (int u : subjects(datasets)) {
    spdlog::info("{}: subject {}", to_string(plan.strategy), u);
    switch (plan.strategy) {
      case Strategy::standard: results.emplace(u, run_standard(datasets, u, plan, hooks)); break;
      case Strategy::split: results.emplace(u, run_split(datasets, u, plan, hooks)); break;
      case Strategy::frozen: results.emplace(u, run_frozen(datasets, u, plan, hooks)); break;
      case Strategy::transfer_standard: results.emplace(u, run_transfer_standard(*source, datasets, u, plan, hooks)); break;
      case Strategy::transfer_split: results.emplace(u, run_transfer_split(*source, datasets, u, plan, hooks)); break;
      case Strategy::distributed: break;
    }
  }
  return results;
}

}  // namespace eegtl
