#include "eegtl/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eegtl/error.hpp"

namespace eegtl::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large blobs in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t pos = 0; pos < bytes.size(); pos += kChunk) {
    const std::size_t len = std::min(kChunk, bytes.size() - pos);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_f32_le(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

void decode_f32_le(std::span<const std::uint8_t> bytes, std::span<float> out) {
  if (bytes.size() != out.size() * 4) {
    throw FormatError("float32 blob holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(out.size() * 4));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(bits);
  }
}

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_binary(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("short write to " + path.string());
}

}  // namespace eegtl::io
