#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eegtl/tensor.hpp"

namespace eegtl {

/// A block of equally shaped trials recorded from one subject in one session.
struct EpochSet {
  std::vector<float> data;  // trials x channels x samples, row-major
  std::vector<int> labels;
  int subject_id = 0;
  int session_id = 0;
  double sample_rate_hz = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::string> channel_names;
  std::vector<std::string> class_names;

  std::size_t n_trials() const { return labels.size(); }
  std::size_t n_channels() const { return channel_names.size(); }
  std::size_t n_classes() const { return class_names.size(); }
  std::size_t trial_size() const { return n_channels() * n_samples; }

  std::span<const float> trial(std::size_t i) const { return {data.data() + i * trial_size(), trial_size()}; }
  std::span<float> trial(std::size_t i) { return {data.data() + i * trial_size(), trial_size()}; }

  /// Throws ValidationError naming the violated field.
  void validate() const;

  friend bool operator==(const EpochSet&, const EpochSet&) = default;
};

struct SessionKey {
  int subject = 0;
  int session = 0;
  friend auto operator<=>(const SessionKey&, const SessionKey&) = default;
};

std::string to_string(const SessionKey& key);

using Datasets = std::map<SessionKey, EpochSet>;

EpochSet load_epochset(const std::filesystem::path& dir);
void save_epochset(const EpochSet& set, const std::filesystem::path& dir);

/// Loads every epoch directory found directly under `root`.
Datasets load_datasets(const std::filesystem::path& root);
/// Writes one directory per set, named subject<S>_session<K>.
void save_datasets(const Datasets& sets, const std::filesystem::path& root);
std::string epoch_dir_name(const SessionKey& key);

/// Slices and reorders channels; all other metadata is kept.
EpochSet select_channels(const EpochSet& set, const std::vector<std::string>& names);

/// Copies the given trials into a model batch [N, 1, channels, samples].
Tensor make_batch(const EpochSet& set, std::span<const std::size_t> trials);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean and standard deviation over all trials and samples of every set.
ChannelStats channel_stats(std::span<const EpochSet* const> sets);

/// Per-channel z-scoring. Without stats they are computed from `set`; a
/// variance below 1e-8 is floored there with a warning.
std::pair<EpochSet, ChannelStats> standardize(const EpochSet& set, const ChannelStats* stats = nullptr);

}  // namespace eegtl
