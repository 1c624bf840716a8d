#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "eegtl/error.hpp"

namespace eegtl::io {

/// IEEE 802.3 CRC-32 (the zlib polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Float32 values as little-endian bytes, independent of host byte order.
std::vector<std::uint8_t> encode_f32_le(std::span<const float> values);
void decode_f32_le(std::span<const std::uint8_t> bytes, std::span<float> out);

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path);
void write_binary(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed UTF-8 with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Typed field access that reports the missing or mistyped key.
template <class T>
T require(const nlohmann::json& doc, const char* key, const char* context) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw FormatError(std::string(context) + ": missing field '" + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string(context) + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

}  // namespace eegtl::io
