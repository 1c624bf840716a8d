#include "eegtl/checkpoint.hpp"

#include "eegtl/binary_io.hpp"

namespace eegtl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "params.bin";

std::vector<std::uint8_t> serialize_params(const ParamStore& params) {
  std::vector<std::uint8_t> blob;
  for (const auto& [name, entry] : params.entries()) {
    auto bytes = io::encode_f32_le(entry.tensor.data());
    blob.insert(blob.end(), bytes.begin(), bytes.end());
  }
  return blob;
}

json provenance_to_json(const Provenance& p) {
  return json{{"dataset_id", p.dataset_id},       {"strategy", p.strategy},
              {"seed", p.seed},                   {"epochs", p.epochs},
              {"channel_names", p.channel_names}, {"channel_mean", p.channel_mean},
              {"channel_std", p.channel_std},     {"surgery", p.surgery},
              {"source_checkpoint", p.source_checkpoint}, {"source_crc32", p.source_crc32}};
}

Provenance provenance_from_json(const json& doc) {
  constexpr const char* ctx = "checkpoint provenance";
  Provenance p;
  p.dataset_id = io::require<std::string>(doc, "dataset_id", ctx);
  p.strategy = io::require<std::string>(doc, "strategy", ctx);
  p.seed = io::require<std::uint64_t>(doc, "seed", ctx);
  p.epochs = io::require<std::size_t>(doc, "epochs", ctx);
  p.channel_names = io::require<std::vector<std::string>>(doc, "channel_names", ctx);
  p.channel_mean = io::require<std::vector<double>>(doc, "channel_mean", ctx);
  p.channel_std = io::require<std::vector<double>>(doc, "channel_std", ctx);
  p.surgery = io::require<std::vector<std::string>>(doc, "surgery", ctx);
  p.source_checkpoint = io::require<std::string>(doc, "source_checkpoint", ctx);
  p.source_crc32 = io::require<std::uint32_t>(doc, "source_crc32", ctx);
  return p;
}

}  // namespace

json architecture_to_json(const ArchitectureSpec& s) {
  return json{{"n_channels", s.n_channels},
              {"n_samples", s.n_samples},
              {"n_classes", s.n_classes},
              {"temporal_filters", s.temporal_filters},
              {"depth_multiplier", s.depth_multiplier},
              {"separable_filters", s.separable_filters},
              {"temporal_kernel_len", s.temporal_kernel_len},
              {"separable_kernel_len", s.separable_kernel_len},
              {"pool1", s.pool1},
              {"pool2", s.pool2},
              {"dropout_rate", s.dropout_rate},
              {"sample_rate_hz", s.sample_rate_hz}};
}

ArchitectureSpec architecture_from_json(const json& doc) {
  constexpr const char* ctx = "architecture";
  ArchitectureSpec s;
  s.n_channels = io::require<std::size_t>(doc, "n_channels", ctx);
  s.n_samples = io::require<std::size_t>(doc, "n_samples", ctx);
  s.n_classes = io::require<std::size_t>(doc, "n_classes", ctx);
  s.temporal_filters = io::require<std::size_t>(doc, "temporal_filters", ctx);
  s.depth_multiplier = io::require<std::size_t>(doc, "depth_multiplier", ctx);
  s.separable_filters = io::require<std::size_t>(doc, "separable_filters", ctx);
  s.temporal_kernel_len = io::require<std::size_t>(doc, "temporal_kernel_len", ctx);
  s.separable_kernel_len = io::require<std::size_t>(doc, "separable_kernel_len", ctx);
  s.pool1 = io::require<std::size_t>(doc, "pool1", ctx);
  s.pool2 = io::require<std::size_t>(doc, "pool2", ctx);
  s.dropout_rate = io::require<double>(doc, "dropout_rate", ctx);
  s.sample_rate_hz = io::require<double>(doc, "sample_rate_hz", ctx);
  return s;
}

void ModelCheckpoint::validate() const {
  spec.validate();
  BuiltModel reference = [&] {
    Rng rng(0);
    return build_model(spec, rng);
  }();
  for (const auto& [name, entry] : reference.params.entries()) {
    if (!params.contains(name)) throw ValidationError("checkpoint is missing parameter '" + name + "'");
    if (params.at(name).shape() != entry.tensor.shape()) {
      throw ValidationError("checkpoint parameter '" + name + "' has shape " +
                            shape_to_string(params.at(name).shape()) + ", architecture expects " +
                            shape_to_string(entry.tensor.shape()));
    }
  }
  for (const auto& name : params.names()) {
    if (!reference.params.contains(name)) throw ValidationError("checkpoint has unexpected entry '" + name + "'");
    if (!block_index.count(name)) throw ValidationError("checkpoint entry '" + name + "' has no block id");
  }
}

ModelCheckpoint make_checkpoint(const EEGNet& net, ParamStore params, Provenance provenance) {
  ModelCheckpoint ckpt;
  ckpt.spec = net.spec();
  ckpt.params = std::move(params);
  ckpt.params.unfreeze_all();
  ckpt.params.reset_optimizer();
  ckpt.block_index = net.block_index();
  ckpt.provenance = std::move(provenance);
  ckpt.validate();
  return ckpt;
}

ModelCheckpoint replace_head(const ModelCheckpoint& ckpt, std::size_t new_n_classes, Rng& rng) {
  if (new_n_classes < 2) {
    throw ValidationError("replace_head: new class count must be at least 2, got " + std::to_string(new_n_classes));
  }
  ModelCheckpoint out = ckpt;
  const std::size_t old_classes = ckpt.spec.n_classes;
  out.spec.n_classes = new_n_classes;
  out.params.unfreeze_all();
  out.params.reset_optimizer();
  init_head(out.params, out.spec, rng);
  out.provenance.surgery.push_back("replace_head " + std::to_string(old_classes) + "->" +
                                   std::to_string(new_n_classes));
  out.validate();
  return out;
}

std::uint32_t checkpoint_crc32(const ModelCheckpoint& ckpt) { return io::crc32(serialize_params(ckpt.params)); }

void save_checkpoint(const ModelCheckpoint& ckpt, const fs::path& dir) {
  ckpt.validate();
  fs::create_directories(dir);
  const auto blob = serialize_params(ckpt.params);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, entry] : ckpt.params.entries()) {
    const std::size_t length = entry.tensor.size() * 4;
    tensors.push_back(json{{"name", name},
                           {"shape", entry.tensor.shape()},
                           {"byte_offset", offset},
                           {"byte_length", length},
                           {"block", std::string(to_string(ckpt.block_index.at(name)))},
                           {"kind", entry.kind == EntryKind::parameter ? "parameter" : "buffer"}});
    offset += length;
  }
  json manifest{{"format", "eegtl-checkpoint"},
                {"format_version", ckpt.format_version},
                {"spec", architecture_to_json(ckpt.spec)},
                {"provenance", provenance_to_json(ckpt.provenance)},
                {"tensors", tensors},
                {"blob", json{{"file", kBlob}, {"byte_length", blob.size()}, {"crc32", io::crc32(blob)}}}};
  io::write_binary(dir / kBlob, blob);
  io::write_json(dir / kManifest, manifest);
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  constexpr const char* ctx = "checkpoint manifest";
  const json manifest = io::read_json(dir / kManifest);
  const int version = io::require<int>(manifest, "format_version", ctx);
  if (version != kCheckpointFormatVersion) {
    throw VersionError("checkpoint " + dir.string() + " has format_version " + std::to_string(version) +
                       ", this build reads version " + std::to_string(kCheckpointFormatVersion));
  }
  const json blob_info = io::require<json>(manifest, "blob", ctx);
  const auto blob = io::read_binary(dir / kBlob);
  const auto declared_length = io::require<std::size_t>(blob_info, "byte_length", ctx);
  if (blob.size() != declared_length) {
    throw FormatError("checkpoint blob holds " + std::to_string(blob.size()) + " bytes, manifest declares " +
                      std::to_string(declared_length));
  }
  const auto declared_crc = io::require<std::uint32_t>(blob_info, "crc32", ctx);
  if (io::crc32(blob) != declared_crc) {
    throw ChecksumError("checkpoint blob " + (dir / kBlob).string() + " fails its CRC-32 check");
  }

  ModelCheckpoint ckpt;
  ckpt.format_version = version;
  ckpt.spec = architecture_from_json(io::require<json>(manifest, "spec", ctx));
  ckpt.provenance = provenance_from_json(io::require<json>(manifest, "provenance", ctx));
  std::size_t expected_offset = 0;
  for (const json& t : io::require<json>(manifest, "tensors", ctx)) {
    const auto name = io::require<std::string>(t, "name", "checkpoint tensor");
    const auto shape = io::require<Shape>(t, "shape", "checkpoint tensor");
    const auto offset = io::require<std::size_t>(t, "byte_offset", "checkpoint tensor");
    const auto length = io::require<std::size_t>(t, "byte_length", "checkpoint tensor");
    if (offset != expected_offset || length != shape_size(shape) * 4 || offset + length > blob.size()) {
      throw FormatError("checkpoint tensor '" + name + "' table entry (offset " + std::to_string(offset) +
                        ", length " + std::to_string(length) + ") disagrees with its shape or the blob");
    }
    Tensor tensor(shape);
    io::decode_f32_le(std::span(blob).subspan(offset, length), tensor.data());
    const auto kind = io::require<std::string>(t, "kind", "checkpoint tensor");
    if (kind != "parameter" && kind != "buffer") throw FormatError("checkpoint tensor '" + name + "' has kind " + kind);
    ckpt.params.add(name, std::move(tensor), kind == "parameter" ? EntryKind::parameter : EntryKind::buffer);
    ckpt.block_index[name] = parse_block(io::require<std::string>(t, "block", "checkpoint tensor"));
    expected_offset += length;
  }
  if (expected_offset != blob.size()) {
    throw FormatError("checkpoint tensor table covers " + std::to_string(expected_offset) + " of " +
                      std::to_string(blob.size()) + " blob bytes");
  }
  ckpt.validate();
  return ckpt;
}

}  // namespace eegtl
