#pragma once

// Shared encoder/decoder for the DLK1 and DLM1 containers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "paramlock/locker.hpp"

namespace paramlock::detail {

inline constexpr char kLockedMagic[] = "DLK1";
inline constexpr char kPlainMagic[] = "DLM1";

struct BlobEntry {
  const std::string* name;
  const std::vector<std::uint32_t>* dims;
  std::span<const std::uint8_t> bytes;
};

std::vector<std::uint8_t> encode_header(const char* magic, std::uint16_t version,
                                        const std::string& arch_text,
                                        std::span<const BlobEntry> entries);

Digest compute_digest(std::span<const std::uint8_t> header, std::span<const BlobEntry> entries);

std::vector<std::uint8_t> encode_container(const char* magic, const Architecture& arch,
                                           std::span<const BlobEntry> entries);

struct DecodedEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<const std::uint8_t> bytes;
};

struct DecodedContainer {
  std::uint16_t version = 0;
  std::string arch_text;
  std::vector<DecodedEntry> entries;
  Digest digest{};
};

/// Validates structure, sizes and digest. Throws FormatError.
DecodedContainer decode_container(std::span<const std::uint8_t> bytes, const char* magic);

}  // namespace paramlock::detail
