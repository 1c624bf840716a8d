#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegtl/model.hpp"

namespace eegtl {

inline constexpr int kCheckpointFormatVersion = 1;

/// Where a set of weights came from.
struct Provenance {
  std::string dataset_id;
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  /// Input channel order the weights expect.
  std::vector<std::string> channel_names;
  /// Per-channel z-scoring applied to inputs; empty when none.
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  /// Head replacements applied, oldest first (e.g. "replace_head 4->2").
  std::vector<std::string> surgery;
  /// Checkpoint this one was derived from, with the CRC-32 of its blob.
  std::string source_checkpoint;
  std::uint32_t source_crc32 = 0;
};

struct ModelCheckpoint {
  ArchitectureSpec spec;
  ParamStore params;
  BlockIndex block_index;
  Provenance provenance;
  int format_version = kCheckpointFormatVersion;

  EEGNet network() const { return EEGNet(spec); }
  /// Every entry has a block id and every shape matches the architecture.
  void validate() const;
};

ModelCheckpoint make_checkpoint(const EEGNet& net, ParamStore params, Provenance provenance);

/// New head for `new_n_classes` (always re-initialised, even for an unchanged
/// class count); block1/block2 entries are copied bit-exactly and the
/// surgery is appended to the provenance.
ModelCheckpoint replace_head(const ModelCheckpoint& ckpt, std::size_t new_n_classes, Rng& rng);

/// Writes `dir/manifest.json` and `dir/params.bin`, creating `dir`.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir);
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// CRC-32 of the serialized parameter blob; identifies a set of weights.
std::uint32_t checkpoint_crc32(const ModelCheckpoint& ckpt);

nlohmann::json architecture_to_json(const ArchitectureSpec& spec);
ArchitectureSpec architecture_from_json(const nlohmann::json& doc);

}  // namespace eegtl
