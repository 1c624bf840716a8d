#include <gtest/gtest.h>

#include <set>

#include "eegtl/strategies.hpp"
#include "eegtl/synth.hpp"

namespace eegtl {
namespace {

Datasets tiny_data(std::size_t subjects, std::size_t classes = 4, std::uint64_t seed = 1, std::size_t trials = 16) {
  SynthConfig cfg;
  cfg.n_subjects = subjects;
  cfg.n_trials = trials;
  cfg.n_classes = classes;
  cfg.n_samples = 64;
  cfg.seed = seed;
  return synth_generate(cfg);
}

TrainingPlan tiny_plan(std::size_t epochs = 3) {
  TrainingPlan plan;
  plan.epochs = epochs;
  plan.batch_size = 8;
  plan.seed = 7;
  plan.architecture.temporal_filters = 4;
  plan.architecture.temporal_kernel_len = 16;
  plan.architecture.separable_kernel_len = 8;
  plan.architecture.pool2 = 4;
  return plan;
}

/// Records every key that reached a gradient step or an evaluation, per phase.
struct Recorder {
  std::map<std::string, std::set<SessionKey>> batches;
  std::map<std::string, std::set<SessionKey>> evaluated;
  std::map<std::string, ParamStore> start, end;
  std::size_t batch_trials = 0;

  TrainHooks hooks() {
    TrainHooks h;
    h.on_batch = [this](const std::string& phase, std::span<const TrialRef> refs) {
      for (const auto& r : refs) batches[phase].insert(r.key);
      batch_trials += refs.size();
    };
    h.on_evaluate = [this](const std::string& phase, std::span<const TrialRef> refs) {
      for (const auto& r : refs) evaluated[phase].insert(r.key);
    };
    h.on_phase_start = [this](const std::string& phase, const ParamStore& p) { start.insert_or_assign(phase, p); };
    h.on_phase_end = [this](const std::string& phase, const ParamStore& p) { end.insert_or_assign(phase, p); };
    return h;
  }

  std::set<SessionKey> trained() const {
    std::set<SessionKey> all;
    for (const auto& [phase, keys] : batches) all.insert(keys.begin(), keys.end());
    return all;
  }
};

bool blocks_identical(const ParamStore& a, const ParamStore& b, const BlockIndex& index) {
  for (const auto& [name, block] : index) {
    if (block != Block::head && !bit_identical(a.at(name), b.at(name))) return false;
  }
  return true;
}

TEST(Plan, Invariants) {
  TrainingPlan plan;
  plan.strategy = Strategy::frozen;
  EXPECT_THROW(plan.validate(), ValidationError);
  plan.freeze_depth = FreezeDepth::block1;
  EXPECT_NO_THROW(plan.validate());
  plan.strategy = Strategy::transfer_split;
  EXPECT_THROW(plan.validate(), ValidationError);
  plan.pretrained = "somewhere";
  EXPECT_NO_THROW(plan.validate());
}

TEST(ValidationSplit, LastShareOfEachClass) {
  Datasets d = tiny_data(1, 4, 2, 20);
  const SessionKey keys[] = {{1, 1}};
  const TrialPool pool = make_pool(d, keys);
  auto [train, val] = split_validation(pool, 0.2);
  EXPECT_EQ(val.size(), 4u);
  EXPECT_EQ(train.size(), 16u);
  for (int k = 0; k < 4; ++k) {
    // The held-out trial is the last of its class in pool order.
    std::size_t last = 0;
    for (std::size_t t = 0; t < pool.size(); ++t) {
      if (pool.data.labels[t] == k) last = t;
    }
    EXPECT_NE(std::find(val.source.begin(), val.source.end(), pool.source[last]), val.source.end());
  }
}

TEST(TrainLoop, ZeroEpochsLeavesParametersUnchanged) {
  Datasets d = tiny_data(1);
  TrainingPlan plan = tiny_plan(0);
  Rng rng(1);
  BuiltModel m = build_model(resolve_architecture(d.at({1, 1}), plan.architecture), rng);
  const ParamStore before = m.params;
  const SessionKey keys[] = {{1, 1}};
  const TrialPool pool = make_pool(d, keys);
  History h = train_loop(m.net, m.params, pool, {}, LoopOptions{0});
  EXPECT_TRUE(h.empty());
  EXPECT_TRUE(m.params.values_identical(before));
}

TEST(TrainLoop, EmptyTrainingSetIsRejected) {
  Rng rng(1);
  Datasets d = tiny_data(1);
  BuiltModel m = build_model(resolve_architecture(d.at({1, 1}), tiny_plan().architecture), rng);
  EXPECT_THROW(train_loop(m.net, m.params, TrialPool{}, TrialPool{}, LoopOptions{3}), ValidationError);
}

TEST(TrainLoop, FrozenTensorsStayBitIdentical) {
  Datasets d = tiny_data(1);
  Rng rng(2);
  BuiltModel m = build_model(resolve_architecture(d.at({1, 1}), tiny_plan().architecture), rng);
  apply_freeze(m.params, FreezeDepth::block1, m.net.block_index());
  const ParamStore before = m.params;
  const SessionKey keys[] = {{1, 1}};
  train_loop(m.net, m.params, make_pool(d, keys), {}, LoopOptions{4, 4, 1e-2});
  for (const auto& name : before.frozen()) EXPECT_TRUE(bit_identical(before.at(name), m.params.at(name))) << name;
  EXPECT_FALSE(bit_identical(before.at("head.dense.weight"), m.params.at("head.dense.weight")));
}

TEST(TrainLoop, EarlyStoppingRestoresBestValidationParameters) {
  Datasets d = tiny_data(1, 4, 3, 40);
  Rng rng(3);
  BuiltModel m = build_model(resolve_architecture(d.at({1, 1}), tiny_plan().architecture), rng);
  const SessionKey keys[] = {{1, 1}};
  auto [train, val] = split_validation(make_pool(d, keys), 0.2);
  LoopOptions opts{60, 8, 3e-2, 3, 11};
  History h = train_loop(m.net, m.params, train, val, opts);
  ASSERT_FALSE(h.empty());
  EXPECT_LE(h.size(), 60u);
  double best = 1e300;
  for (const auto& e : h) best = std::min(best, e.val_loss);
  EXPECT_NEAR(evaluate_loss(m.net, m.params, val), best, 1e-6);
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(h[i].epoch, i + 1);
}

TEST(TrainLoop, SeparableDataReachesNinetyPercentTrainingAccuracy) {
  SynthConfig cfg;
  cfg.n_subjects = 1;
  cfg.seed = 4;
  Datasets d = synth_generate(cfg);
  Rng rng(5);
  BuiltModel m = build_model(resolve_architecture(d.at({1, 1}), {}), rng);
  const SessionKey keys[] = {{1, 1}};
  const EpochSet* sets[] = {&d.at({1, 1})};
  const ChannelStats stats = channel_stats(sets);
  const TrialPool pool = make_pool(d, keys, &stats);
  double acc = 0.0;
  for (std::size_t epoch = 0; epoch < 200 && acc < 0.9; epoch += 10) {
    train_loop(m.net, m.params, pool, {}, LoopOptions{10, 16, 1e-3, 20, epoch});
    acc = accuracy(argmax_rows(predict(m.net, m.params, pool.data)), pool.data.labels);
  }
  EXPECT_GE(acc, 0.9);
}

TEST(Standard, KeysLeakageAndDeterminism) {
  Datasets d = tiny_data(3);
  Recorder rec;
  TrainResult r = run_standard(d, 2, tiny_plan(), rec.hooks());
  EXPECT_EQ(r.split.train, (std::vector<SessionKey>{{2, 1}}));
  EXPECT_EQ(r.split.test, (std::vector<SessionKey>{{2, 2}}));
  EXPECT_EQ(rec.trained(), (std::set<SessionKey>{{2, 1}}));
  EXPECT_EQ(rec.evaluated.at("test"), (std::set<SessionKey>{{2, 2}}));
  EXPECT_EQ(r.history.size(), 3u);
  EXPECT_EQ(r.report.n_test, 16u);
  TrainResult again = run_standard(d, 2, tiny_plan());
  EXPECT_EQ(report_to_json(again.report), report_to_json(r.report));
  EXPECT_TRUE(again.checkpoint.params.values_identical(r.checkpoint.params));
  EXPECT_EQ(r.checkpoint.provenance.strategy, "standard");
  EXPECT_EQ(r.checkpoint.provenance.channel_mean.size(), 6u);
}

TEST(Standard, MissingSessionIsRejected) {
  Datasets d = tiny_data(2);
  d.erase({1, 2});
  EXPECT_THROW(run_standard(d, 1, tiny_plan()), ValidationError);
}

TEST(Distributed, OneCheckpointManyReports) {
  Datasets d = tiny_data(3);
  Recorder rec;
  auto results = run_distributed(d, tiny_plan(), rec.hooks());
  ASSERT_EQ(results.size(), 3u);
  EXPECT_EQ(rec.trained(), (std::set<SessionKey>{{1, 1}, {2, 1}, {3, 1}}));
  std::set<SessionKey> tests;
  for (const auto& [u, r] : results) {
    EXPECT_TRUE(r.checkpoint.params.values_identical(results.at(1).checkpoint.params));
    EXPECT_EQ(r.test_key, (SessionKey{u, 2}));
    EXPECT_TRUE(tests.insert(r.test_key).second);
  }
  // 3 epochs over 48 pooled trials minus floor(0.2 * 12) held out per class.
  EXPECT_EQ(rec.batch_trials, 3u * (3 * 16 - 4 * 2));
}

TEST(Split, PhaseTwoStartsFromPhaseOneAndHoldoutStaysOut) {
  Datasets d = tiny_data(3);
  Recorder rec;
  TrainResult r = run_split(d, 3, tiny_plan(), rec.hooks());
  EXPECT_TRUE(rec.end.at("train").values_identical(rec.start.at("retrain")));
  for (const auto& key : rec.batches.at("train")) EXPECT_NE(key.subject, 3);
  EXPECT_EQ(rec.batches.at("retrain"), (std::set<SessionKey>{{3, 1}}));
  EXPECT_FALSE(rec.trained().contains({3, 2}));
  EXPECT_EQ(r.history.size(), 6u);
  EXPECT_EQ(r.history.back().phase, "retrain");
}

TEST(Split, ZeroRetrainEpochsEvaluatesPhaseOneModel) {
  Datasets d = tiny_data(3);
  TrainingPlan plan = tiny_plan();
  plan.retrain_epochs = 0;
  Recorder rec;
  TrainResult r = run_split(d, 1, plan, rec.hooks());
  EXPECT_TRUE(rec.end.at("train").values_identical(r.checkpoint.params));
  // Same evaluation done by hand with the phase-1 parameters and statistics.
  ParamStore params = rec.end.at("train");
  ChannelStats stats{r.checkpoint.provenance.channel_mean, r.checkpoint.provenance.channel_std};
  const EpochSet test = standardize(d.at({1, 2}), &stats).first;
  auto manual = evaluate(predict(r.checkpoint.network(), params, test), test.labels, test.class_names);
  EXPECT_EQ(report_to_json(manual), report_to_json(r.report));
}

TEST(Frozen, OnlyHeadUpdatedAtFullDepth) {
  Datasets d = tiny_data(3);
  TrainingPlan plan = tiny_plan();
  plan.freeze_depth = FreezeDepth::block1_2;
  Recorder rec;
  TrainResult r = run_frozen(d, 2, plan, rec.hooks());
  const ParamStore& before = rec.start.at("retrain");
  const ParamStore& after = rec.end.at("retrain");
  const BlockIndex index = r.checkpoint.block_index;
  EXPECT_TRUE(blocks_identical(before, after, index));
  EXPECT_FALSE(bit_identical(before.at("head.dense.weight"), after.at("head.dense.weight")));
  EXPECT_LT(before.count_trainable(), before.count_parameters());
  plan.freeze_depth = FreezeDepth::none;
  EXPECT_THROW(run_frozen(d, 2, plan), ValidationError);
}

ModelCheckpoint source_checkpoint(std::size_t classes) {
  Datasets src = tiny_data(2, classes, 31);
  return run_distributed(src, tiny_plan(2)).begin()->second.checkpoint;
}

TEST(TransferStandard, BothDirectionsKeepBlocks) {
  for (auto [from, to] : {std::pair<std::size_t, std::size_t>{4, 2}, {2, 4}}) {
    ModelCheckpoint source = source_checkpoint(from);
    Datasets target = tiny_data(2, to, 41);
    TrainingPlan plan = tiny_plan();
    plan.pretrained = "source";
    Recorder rec;
    TrainResult r = run_transfer_standard(source, target, 1, plan, rec.hooks());
    EXPECT_TRUE(blocks_identical(source.params, rec.start.at("retrain"), source.block_index));
    EXPECT_EQ(r.checkpoint.spec.n_classes, to);
    EXPECT_EQ(rec.start.at("retrain").at("head.dense.weight").dim(1), to);
    ASSERT_EQ(r.checkpoint.provenance.surgery.size(), 1u);
    EXPECT_EQ(r.checkpoint.provenance.source_crc32, checkpoint_crc32(source));
    EXPECT_EQ(r.checkpoint.provenance.source_checkpoint, "source");
    EXPECT_FALSE(rec.trained().contains({1, 2}));
  }
}

TEST(TransferStandard, ChannelMismatchListsBoth) {
  ModelCheckpoint source = source_checkpoint(4);
  Datasets target = tiny_data(2, 2, 41);
  for (auto& [key, set] : target) set.channel_names[5] = "EOG9";
  try {
    run_transfer_standard(source, target, 1, tiny_plan());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("C3,Cz,C4,EOG1,EOG2,EOG3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("EOG9"), std::string::npos) << msg;
  }
}

TEST(TransferSplit, StartsFromSourceBlocksAndIsDeterministic) {
  ModelCheckpoint source = source_checkpoint(4);
  Datasets target = tiny_data(3, 2, 51);
  TrainingPlan plan = tiny_plan();
  plan.freeze_depth = FreezeDepth::block1;
  Recorder rec;
  TrainResult r = run_transfer_split(source, target, 2, plan, rec.hooks());
  EXPECT_TRUE(blocks_identical(source.params, rec.start.at("train"), source.block_index));
  for (const auto& key : rec.batches.at("train")) EXPECT_NE(key.subject, 2);
  EXPECT_FALSE(rec.trained().contains({2, 2}));
  for (const auto& name : rec.start.at("retrain").frozen()) {
    EXPECT_TRUE(bit_identical(rec.start.at("retrain").at(name), rec.end.at("retrain").at(name)));
  }
  TrainResult again = run_transfer_split(source, target, 2, plan);
  EXPECT_EQ(report_to_json(again.report), report_to_json(r.report));
}

TEST(RunAllSubjects, DispatchesEveryStrategy) {
  Datasets d = tiny_data(2);
  TrainingPlan plan = tiny_plan(1);
  for (Strategy s : {Strategy::standard, Strategy::distributed, Strategy::split}) {
    plan.strategy = s;
    EXPECT_EQ(run_all_subjects(d, plan).size(), 2u);
  }
  plan.strategy = Strategy::transfer_standard;
  EXPECT_THROW(run_all_subjects(d, plan), ValidationError);
}

}  // namespace
}  // namespace eegtl
