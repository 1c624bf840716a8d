#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "eegtl/binary_io.hpp"
#include "eegtl/hypersearch.hpp"
#include "eegtl/synth.hpp"

namespace eegtl {
namespace {

TrainingPlan cv_plan() {
  TrainingPlan plan;
  plan.epochs = 2;
  plan.batch_size = 8;
  plan.seed = 3;
  plan.architecture.temporal_filters = 2;
  plan.architecture.depth_multiplier = 1;
  plan.architecture.temporal_kernel_len = 8;
  plan.architecture.separable_kernel_len = 4;
  plan.architecture.pool2 = 4;
  return plan;
}

Datasets small_data(std::size_t subjects, std::size_t channels = 6, std::size_t trials = 16) {
  SynthConfig cfg;
  cfg.n_subjects = subjects;
  cfg.n_channels = channels;
  cfg.n_trials = trials;
  cfg.n_samples = 64;
  cfg.seed = 9;
  return synth_generate(cfg);
}

TEST(Median, EvenAndOddCountsAndPermutation) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({0.5, 0.25, 0.75, 1.0}), median({1.0, 0.75, 0.5, 0.25}));
  EXPECT_THROW(median({}), ValidationError);
}

TEST(ChannelSubsets, MontageReductions) {
  const auto montage = default_channel_names(25);
  EXPECT_EQ(channel_subset(montage, ChannelSet::all).size(), 25u);
  EXPECT_EQ(channel_subset(montage, ChannelSet::no_eog).size(), 22u);
  EXPECT_EQ(channel_subset(montage, ChannelSet::five), (std::vector<std::string>{"Fz", "C3", "Cz", "C4", "Pz"}));
  EXPECT_THROW(parse_channel_set("seven"), ValidationError);
}

TEST(CvEvaluate, ShapeRangeAndSessionTwoUntouched) {
  Datasets d = small_data(8);
  std::set<SessionKey> touched;
  TrainHooks hooks;
  hooks.on_batch = [&](const std::string&, std::span<const TrialRef> refs) {
    for (const auto& r : refs) touched.insert(r.key);
  };
  hooks.on_evaluate = hooks.on_batch;
  auto acc = cv_evaluate(d, {0.1, false, ChannelSet::all}, 2, cv_plan(), {}, hooks);
  ASSERT_EQ(acc.size(), 8u);
  for (const auto& [u, a] : acc) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  for (const auto& key : touched) EXPECT_EQ(key.session, 1);
  EXPECT_EQ(touched.size(), 8u);
  EXPECT_EQ(cv_evaluate(d, {0.1, false, ChannelSet::all}, 2, cv_plan()), acc);
}

TEST(CvEvaluate, TooFewTrialsPerClassIsRejected) {
  Datasets d = small_data(2, 6, 8);
  EXPECT_THROW(cv_evaluate(d, {}, 3, cv_plan()), ValidationError);
  EXPECT_THROW(cv_evaluate(d, {}, 1, cv_plan()), ValidationError);
}

TEST(SequentialSearch, StageOrderCountsAndDeterminism) {
  Datasets d = small_data(2, 25);
  SearchResult r = sequential_search(d, SearchSpace{}, 2, cv_plan());
  ASSERT_EQ(r.stages.size(), 3u);
  EXPECT_EQ(r.stages[0].name, "dropout");
  EXPECT_EQ(r.stages[1].name, "filter");
  EXPECT_EQ(r.stages[2].name, "channels");
  EXPECT_EQ(r.stages[0].candidates.size() + r.stages[1].candidates.size() + r.stages[2].candidates.size(), 15u);
  // Later stages hold earlier choices fixed.
  const Candidate d1 = r.stages[0].candidates[r.stages[0].chosen].candidate;
  for (const auto& c : r.stages[1].candidates) EXPECT_EQ(c.candidate.dropout, d1.dropout);
  const Candidate d2 = r.stages[1].candidates[r.stages[1].chosen].candidate;
  for (const auto& c : r.stages[2].candidates) {
    EXPECT_EQ(c.candidate.dropout, d2.dropout);
    EXPECT_EQ(c.candidate.filter, d2.filter);
  }
  EXPECT_EQ(search_to_json(sequential_search(d, SearchSpace{}, 2, cv_plan())), search_to_json(r));

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "eegtl_search_test";
  fs::remove_all(dir);
  write_search(r, dir);
  auto doc = io::read_json(dir / "search_result.json");
  EXPECT_EQ(doc["candidates_evaluated"], 15);
  EXPECT_EQ(doc["stage_order"], nlohmann::json({"dropout", "filter", "channels"}));
  EXPECT_TRUE(fs::exists(dir / "search_table.csv"));
  fs::remove_all(dir);
}

TEST(SequentialSearch, DropoutTieGoesToSmallerValue) {
  Datasets d = small_data(2, 25);
  TrainingPlan plan = cv_plan();
  plan.epochs = 0;
  SearchSpace space;
  space.dropout_grid = {0.5, 0.2};
  SearchResult r = sequential_search(d, space, 2, plan);
  // Untrained models evaluate identically whatever the dropout rate.
  EXPECT_EQ(r.stages[0].candidates[0].median, r.stages[0].candidates[1].median);
  EXPECT_EQ(r.chosen.dropout, 0.2);
}

TEST(SequentialSearch, EogClassSignalSelectsAllChannels) {
  SynthConfig cfg;
  cfg.n_subjects = 3;
  cfg.n_channels = 25;
  cfg.n_trials = 24;
  cfg.n_samples = 128;
  cfg.n_classes = 3;
  cfg.seed = 17;
  cfg.class_channels = {{22}, {23}, {24}};  // EOG1..3 only
  Datasets d = synth_generate(cfg);
  TrainingPlan plan;
  plan.epochs = 40;
  plan.batch_size = 8;
  plan.lr = 1e-2;
  plan.seed = 5;
  plan.architecture.temporal_filters = 4;
  plan.architecture.temporal_kernel_len = 32;
  SearchSpace space;
  space.dropout_grid = {0.1};
  SearchResult r = sequential_search(d, space, 2, plan);
  EXPECT_EQ(r.chosen.channels, ChannelSet::all);
  const auto& stage = r.stages[2].candidates;
  EXPECT_GT(stage[0].median, stage[1].median + 0.2);
}

}  // namespace
}  // namespace eegtl
