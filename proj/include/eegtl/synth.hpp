#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eegtl/data.hpp"

namespace eegtl {

struct SynthConfig {
  std::size_t n_subjects = 8;
  std::size_t n_trials = 64;  // per session
  std::size_t n_channels = 6;
  std::size_t n_samples = 128;
  std::size_t n_classes = 4;
  double sample_rate_hz = 128.0;
  double difficulty = 0.0;  // 0..1, scale of the subject mixing
  std::uint64_t seed = 0;
  /// Channels modulated by each class. Empty means channel j belongs to class j % n_classes.
  std::vector<std::vector<std::size_t>> class_channels;
  /// Empty means default_channel_names(n_channels).
  std::vector<std::string> channel_names;

  void validate() const;
};

/// Two sessions per subject, subjects numbered from 1.
Datasets synth_generate(const SynthConfig& config);

/// 25 -> the 2a montage (22 EEG + EOG1..3), 6 -> C3 Cz C4 EOG1..3, otherwise ch<i>.
std::vector<std::string> default_channel_names(std::size_t n_channels);
std::vector<std::string> default_class_names(std::size_t n_classes);

}  // namespace eegtl
