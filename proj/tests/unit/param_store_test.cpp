#include <gtest/gtest.h>

#include "eegtl/param_store.hpp"
#include "test_support.hpp"

namespace eegtl {
namespace {

ParamStore sample_store(Rng& rng) {
  ParamStore store;
  store.add("a.weight", testing::random_tensor({3, 2}, rng));
  store.add("a.running_mean", Tensor({2}), EntryKind::buffer);
  store.add("b.weight", testing::random_tensor({4}, rng));
  return store;
}

void fill_grads(ParamStore& store, Rng& rng) {
  store.zero_grad();
  for (const auto& name : store.names()) {
    if (store.kind(name) != EntryKind::parameter) continue;
    for (float& g : store.at(name).grad()) g = static_cast<float>(rng.uniform(-1, 1));
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Rng rng(1);
  ParamStore store = sample_store(rng);
  ParamStore before = store;
  store.zero_grad();
  for (int i = 0; i < 5; ++i) adam_step(store, {});
  EXPECT_TRUE(store.values_identical(before));
  EXPECT_EQ(store.step_count(), 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.add("theta", Tensor({1}, 0.0f));
  store.zero_grad();
  store.at("theta").grad()[0] = 1.0f;
  adam_step(store, AdamConfig{});
  EXPECT_NEAR(store.at("theta")[0], -0.001, 1e-9);
}

TEST(Adam, FrozenEntriesAreBitIdentical) {
  Rng rng(2);
  ParamStore store = sample_store(rng);
  store.freeze("a.weight");
  const Tensor before = store.at("a.weight");
  const Tensor other = store.at("b.weight");
  for (int i = 0; i < 10; ++i) {
    fill_grads(store, rng);
    adam_step(store, {});
  }
  EXPECT_TRUE(bit_identical(store.at("a.weight"), before));
  EXPECT_FALSE(bit_identical(store.at("b.weight"), other));
  EXPECT_EQ(store.optimizer_state().count("a.weight"), 0u);
  EXPECT_EQ(store.optimizer_state().count("a.running_mean"), 0u);
  EXPECT_EQ(store.step_count(), 10u);
}

TEST(Adam, MissingGradientOnTrainableEntryIsRejected) {
  Rng rng(3);
  ParamStore store = sample_store(rng);
  EXPECT_THROW(adam_step(store, {}), ValidationError);
  store.freeze("a.weight");
  store.freeze("b.weight");
  EXPECT_NO_THROW(adam_step(store, {}));
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(4);
    ParamStore store = sample_store(rng);
    for (int i = 0; i < 20; ++i) {
      fill_grads(store, rng);
      adam_step(store, {});
    }
    return store;
  };
  EXPECT_TRUE(run().values_identical(run()));
}

TEST(ParamStore, FreezeValidationAndCounts) {
  Rng rng(5);
  ParamStore store = sample_store(rng);
  EXPECT_EQ(store.count_trainable(), 10u);
  EXPECT_THROW(store.freeze("missing"), ValidationError);
  EXPECT_THROW(store.set_frozen({"a.weight", "nope"}), ValidationError);
  store.set_frozen({"a.weight", "a.running_mean"});
  EXPECT_EQ(store.count_trainable(), 4u);
  EXPECT_EQ(store.count_parameters(), 10u);
  EXPECT_THROW(store.add("b.weight", Tensor({1})), ValidationError);
}

TEST(ParamStore, FreezingDropsOptimizerState) {
  Rng rng(6);
  ParamStore store = sample_store(rng);
  fill_grads(store, rng);
  adam_step(store, {});
  EXPECT_EQ(store.optimizer_state().count("b.weight"), 1u);
  store.freeze("b.weight");
  EXPECT_EQ(store.optimizer_state().count("b.weight"), 0u);
}

}  // namespace
}  // namespace eegtl
