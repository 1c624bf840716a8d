#include "eegtl/split.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "eegtl/error.hpp"

namespace eegtl {
namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 6> kStrategyNames{{
    {Strategy::standard, "standard"},
    {Strategy::distributed, "distributed"},
    {Strategy::split, "split"},
    {Strategy::frozen, "frozen"},
    {Strategy::transfer_standard, "transfer_standard"},
    {Strategy::transfer_split, "transfer_split"},
}};

void require_key(const Datasets& datasets, SessionKey key) {
  if (!datasets.contains(key)) throw ValidationError("split: missing " + to_string(key));
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  for (const auto& [s, name] : kStrategyNames) {
    if (s == strategy) return name;
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  for (const auto& [s, name] : kStrategyNames) {
    if (name == text) return s;
  }
  throw ValidationError("unknown strategy '" + std::string(text) +
                        "' (expected standard, distributed, split, frozen, transfer_standard or transfer_split)");
}

std::vector<int> subjects(const Datasets& datasets) {
  std::set<int> ids;
  for (const auto& [key, set] : datasets) ids.insert(key.subject);
  return {ids.begin(), ids.end()};
}

void check_no_leakage(const SplitAssignment& split) {
  for (const auto& key : split.test) {
    const bool in_train = std::find(split.train.begin(), split.train.end(), key) != split.train.end();
    const bool in_retrain = std::find(split.retrain.begin(), split.retrain.end(), key) != split.retrain.end();
    if (in_train || in_retrain) {
      throw ValidationError("split: test key " + to_string(key) + " also appears in " +
                            (in_train ? "train" : "retrain"));
    }
  }
}

SplitAssignment make_split(const Datasets& datasets, Strategy strategy, int subject) {
  SplitAssignment split;
  const auto ids = subjects(datasets);
  switch (strategy) {
    case Strategy::standard:
    case Strategy::transfer_standard:
      require_key(datasets, {subject, 1});
      require_key(datasets, {subject, 2});
      split.train = {{subject, 1}};
      split.test = {{subject, 2}};
      break;
    case Strategy::distributed:
      if (ids.size() < 2) throw ValidationError("split: distributed learning needs at least 2 subjects");
      for (int u : ids) {
        require_key(datasets, {u, 1});
        require_key(datasets, {u, 2});
        split.train.push_back({u, 1});
        split.test.push_back({u, 2});
      }
      break;
    case Strategy::split:
    case Strategy::frozen:
    case Strategy::transfer_split:
      if (std::find(ids.begin(), ids.end(), subject) == ids.end()) {
        throw ValidationError("split: holdout subject " + std::to_string(subject) + " is absent");
      }
      if (ids.size() < 2) throw ValidationError("split: split-style learning needs at least 2 subjects");
      require_key(datasets, {subject, 1});
      require_key(datasets, {subject, 2});
      for (const auto& [key, set] : datasets) {
        if (key.subject != subject) split.train.push_back(key);
      }
      split.retrain = {{subject, 1}};
      split.test = {{subject, 2}};
      break;
  }
  check_no_leakage(split);
  return split;
}

}  // namespace eegtl
