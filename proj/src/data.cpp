#include "eegtl/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eegtl/binary_io.hpp"

namespace eegtl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kFormatVersion = 1;
constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "epochs.bin";
constexpr double kVarianceFloor = 1e-8;

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

void EpochSet::validate() const {
  if (!(sample_rate_hz > 0.0)) throw ValidationError("epoch set: sample_rate_hz must be positive");
  if (n_samples == 0) throw ValidationError("epoch set: n_samples must be positive");
  if (channel_names.empty()) throw ValidationError("epoch set: channel_names is empty");
  if (class_names.empty()) throw ValidationError("epoch set: class_names is empty");
  std::set<std::string> unique(channel_names.begin(), channel_names.end());
  if (unique.size() != channel_names.size()) throw ValidationError("epoch set: channel_names are not unique");
  if (data.size() != n_trials() * trial_size()) {
    throw ValidationError("epoch set: data holds " + std::to_string(data.size()) + " values, expected " +
                          std::to_string(n_trials()) + " trials x " + std::to_string(n_channels()) +
                          " channels x " + std::to_string(n_samples) + " samples");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes()) {
      throw ValidationError("epoch set: label " + std::to_string(labels[i]) + " at trial " + std::to_string(i) +
                            " outside [0, " + std::to_string(n_classes() - 1) + "]");
    }
  }
}

std::string to_string(const SessionKey& key) {
  return "(subject " + std::to_string(key.subject) + ", session " + std::to_string(key.session) + ")";
}

std::string epoch_dir_name(const SessionKey& key) {
  return "subject" + std::to_string(key.subject) + "_session" + std::to_string(key.session);
}

void save_epochset(const EpochSet& set, const fs::path& dir) {
  set.validate();
  fs::create_directories(dir);
  const auto blob = io::encode_f32_le(set.data);
  json manifest{{"format", "eegtl-epochs"},
                {"format_version", kFormatVersion},
                {"subject_id", set.subject_id},
                {"session_id", set.session_id},
                {"n_trials", set.n_trials()},
                {"n_channels", set.n_channels()},
                {"n_samples", set.n_samples},
                {"sample_rate_hz", set.sample_rate_hz},
                {"channel_names", set.channel_names},
                {"class_names", set.class_names},
                {"labels", set.labels},
                {"blob", {{"file", kBlob}, {"byte_length", blob.size()}, {"crc32", io::crc32(blob)}}}};
  io::write_binary(dir / kBlob, blob);
  io::write_json(dir / kManifest, manifest);
}

EpochSet load_epochset(const fs::path& dir) {
  const std::string ctx = "epoch file " + dir.string();
  const json manifest = io::read_json(dir / kManifest);
  const int version = io::require<int>(manifest, "format_version", ctx.c_str());
  if (version != kFormatVersion) {
    throw VersionError(ctx + ": format_version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kFormatVersion) + ")");
  }
  EpochSet set;
  set.subject_id = io::require<int>(manifest, "subject_id", ctx.c_str());
  set.session_id = io::require<int>(manifest, "session_id", ctx.c_str());
  set.sample_rate_hz = io::require<double>(manifest, "sample_rate_hz", ctx.c_str());
  set.n_samples = io::require<std::size_t>(manifest, "n_samples", ctx.c_str());
  set.channel_names = io::require<std::vector<std::string>>(manifest, "channel_names", ctx.c_str());
  set.class_names = io::require<std::vector<std::string>>(manifest, "class_names", ctx.c_str());
  set.labels = io::require<std::vector<int>>(manifest, "labels", ctx.c_str());
  const auto n_trials = io::require<std::size_t>(manifest, "n_trials", ctx.c_str());
  const auto n_channels = io::require<std::size_t>(manifest, "n_channels", ctx.c_str());
  if (n_channels != set.channel_names.size()) {
    throw FormatError(ctx + ": n_channels is " + std::to_string(n_channels) + " but channel_names lists " +
                      std::to_string(set.channel_names.size()));
  }
  if (n_trials != set.labels.size()) {
    throw FormatError(ctx + ": n_trials is " + std::to_string(n_trials) + " but labels holds " +
                      std::to_string(set.labels.size()));
  }
  const json blob_info = io::require<json>(manifest, "blob", ctx.c_str());
  const auto blob = io::read_binary(dir / io::require<std::string>(blob_info, "file", ctx.c_str()));
  const std::size_t trial_bytes = n_channels * set.n_samples * sizeof(float);
  const std::size_t expected = n_trials * trial_bytes;
  if (blob.size() != expected || blob.size() != io::require<std::size_t>(blob_info, "byte_length", ctx.c_str())) {
    std::ostringstream msg;
    msg << ctx << ": n_trials declares " << n_trials << " trials (" << expected << " bytes) but the blob holds "
        << blob.size() << " bytes";
    if (trial_bytes > 0 && blob.size() % trial_bytes == 0) msg << " (" << blob.size() / trial_bytes << " trials)";
    throw FormatError(msg.str());
  }
  const auto crc = io::require<std::uint32_t>(blob_info, "crc32", ctx.c_str());
  if (io::crc32(blob) != crc) throw ChecksumError(ctx + ": epochs.bin fails its crc32 check");
  set.data.resize(expected / sizeof(float));
  io::decode_f32_le(blob, set.data);
  try {
    set.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return set;
}

Datasets load_datasets(const fs::path& root) {
  if (!fs::is_directory(root)) throw ValidationError("dataset directory " + root.string() + " does not exist");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / kManifest)) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  Datasets sets;
  for (const auto& dir : dirs) {
    EpochSet set = load_epochset(dir);
    SessionKey key{set.subject_id, set.session_id};
    if (!sets.emplace(key, std::move(set)).second) {
      throw ValidationError("dataset directory " + root.string() + ": duplicate " + to_string(key));
    }
  }
  if (sets.empty()) throw ValidationError("dataset directory " + root.string() + " holds no epoch files");
  return sets;
}

void save_datasets(const Datasets& sets, const fs::path& root) {
  for (const auto& [key, set] : sets) save_epochset(set, root / epoch_dir_name(key));
}

EpochSet select_channels(const EpochSet& set, const std::vector<std::string>& names) {
  if (names.empty()) throw ValidationError("select_channels: no channels requested");
  std::vector<std::size_t> index;
  for (const auto& name : names) {
    auto it = std::find(set.channel_names.begin(), set.channel_names.end(), name);
    if (it == set.channel_names.end()) {
      throw ValidationError("select_channels: unknown channel '" + name + "' (available: " +
                            join(set.channel_names) + ")");
    }
    index.push_back(static_cast<std::size_t>(it - set.channel_names.begin()));
  }
  EpochSet out = set;
  out.channel_names = names;
  out.data.assign(set.n_trials() * names.size() * set.n_samples, 0.0f);
  for (std::size_t t = 0; t < set.n_trials(); ++t) {
    auto src = set.trial(t);
    auto dst = out.trial(t);
    for (std::size_t c = 0; c < index.size(); ++c) {
      std::copy_n(src.begin() + index[c] * set.n_samples, set.n_samples, dst.begin() + c * set.n_samples);
    }
  }
  out.validate();
  return out;
}

Tensor make_batch(const EpochSet& set, std::span<const std::size_t> trials) {
  Tensor batch({trials.size(), 1, set.n_channels(), set.n_samples});
  auto& values = batch.values();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto src = set.trial(trials[i]);
    std::copy(src.begin(), src.end(), values.begin() + i * set.trial_size());
  }
  return batch;
}

ChannelStats channel_stats(std::span<const EpochSet* const> sets) {
  if (sets.empty()) throw ValidationError("channel_stats: no data");
  const std::size_t channels = sets.front()->n_channels();
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  double count = 0;
  for (const EpochSet* set : sets) {
    if (set->n_channels() != channels) throw ShapeError("channel_stats: sets disagree on channel count");
    for (std::size_t t = 0; t < set->n_trials(); ++t) {
      auto trial = set->trial(t);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t s = 0; s < set->n_samples; ++s) {
          const double v = trial[c * set->n_samples + s];
          sum[c] += v;
          sq[c] += v * v;
        }
      }
    }
    count += static_cast<double>(set->n_trials() * set->n_samples);
  }
  if (count == 0) throw ValidationError("channel_stats: no samples");
  ChannelStats stats;
  for (std::size_t c = 0; c < channels; ++c) {
    const double mean = sum[c] / count;
    double var = std::max(0.0, sq[c] / count - mean * mean);
    if (var < kVarianceFloor) {
      spdlog::warn("channel {} has variance {:.3g}; flooring at {:g}", c, var, kVarianceFloor);
      var = kVarianceFloor;
    }
    stats.mean.push_back(mean);
    stats.stddev.push_back(std::sqrt(var));
  }
  return stats;
}

std::pair<EpochSet, ChannelStats> standardize(const EpochSet& set, const ChannelStats* stats) {
  const EpochSet* only[] = {&set};
  ChannelStats used = stats ? *stats : channel_stats(only);
  if (used.mean.size() != set.n_channels() || used.stddev.size() != set.n_channels()) {
    throw ShapeError("standardize: stats cover " + std::to_string(used.mean.size()) + " channels, set has " +
                     std::to_string(set.n_channels()));
  }
  EpochSet out = set;
  for (std::size_t t = 0; t < out.n_trials(); ++t) {
    auto trial = out.trial(t);
    for (std::size_t c = 0; c < out.n_channels(); ++c) {
      for (std::size_t s = 0; s < out.n_samples; ++s) {
        float& v = trial[c * out.n_samples + s];
        v = static_cast<float>((v - used.mean[c]) / used.stddev[c]);
      }
    }
  }
  return {std::move(out), std::move(used)};
}

}  // namespace eegtl
