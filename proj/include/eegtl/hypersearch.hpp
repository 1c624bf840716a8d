#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eegtl/filter.hpp"
#include "eegtl/strategies.hpp"

namespace eegtl {

/// all: every channel; no_eog: names not starting with "EOG"; five: Fz, C3, Cz, C4, Pz.
enum class ChannelSet { all, no_eog, five };
std::string_view to_string(ChannelSet set);
ChannelSet parse_channel_set(std::string_view text);
std::vector<std::string> channel_subset(const std::vector<std::string>& available, ChannelSet set);

struct Candidate {
  double dropout = 0.0;
  bool filter = false;
  ChannelSet channels = ChannelSet::all;
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct SearchSpace {
  std::vector<double> dropout_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<bool> filter_options{false, true};
  std::vector<ChannelSet> channel_sets{ChannelSet::all, ChannelSet::no_eog, ChannelSet::five};
  FilterSpec filter;

  void validate() const;
};

struct CandidateResult {
  Candidate candidate;
  std::map<int, double> subject_accuracy;
  double median = 0.0;
};

struct StageResult {
  std::string name;  // dropout, filter, channels
  std::vector<CandidateResult> candidates;
  std::size_t chosen = 0;
};

struct SearchResult {
  Candidate chosen;
  std::vector<StageResult> stages;
  std::size_t folds = 0;
};

/// Per-subject mean accuracy of stratified k-fold CV on session 1, each fold
/// trained from scratch. Session-2 data is never read.
std::map<int, double> cv_evaluate(const Datasets& datasets, const Candidate& candidate, std::size_t folds,
                                  const TrainingPlan& plan, const FilterSpec& filter = {},
                                  const TrainHooks& hooks = {});

/// Median with the two middle values averaged for even counts.
double median(std::vector<double> values);

/// Dropout, then filter, then channel set, each stage fixing the earlier choices.
/// Ties go to smaller dropout, filter off and the larger channel set.
SearchResult sequential_search(const Datasets& datasets, const SearchSpace& space, std::size_t folds,
                               const TrainingPlan& plan, const TrainHooks& hooks = {});

nlohmann::json search_to_json(const SearchResult& result);
/// Writes search_table.csv and search_result.json.
void write_search(const SearchResult& result, const std::filesystem::path& dir);

}  // namespace eegtl
