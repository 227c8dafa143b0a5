#pragma once

// On-disk containers. Both share one layout, all integers little-endian:
//
//   magic           4 bytes   "DLK1" (locked) or "DLM1" (plaintext)
//   format_version  u16       1
//   arch_length     u32, then arch_length bytes of architecture text (UTF-8)
//   tensor_count    u32
//   per tensor:     name_length u32, name bytes, rank u32, rank x u32 dims,
//                   blob_offset u64 (from the start of the blob region),
//                   blob_length u64
//   blobs           concatenated, canonical order
//   digest          32 bytes, SHA-256 of every preceding byte
//
// Locked blobs hold S-Box output bytes; plaintext blobs hold little-endian
// binary32 values.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "paramlock/locker.hpp"
#include "paramlock/model.hpp"

namespace paramlock {

std::vector<std::uint8_t> encode_locked(const LockedModel& lm);
/// Throws FormatError; never returns a partially decoded model.
LockedModel decode_locked(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_model(const Model& m);
Model decode_model(std::span<const std::uint8_t> bytes);

void write_locked(const LockedModel& lm, std::ostream& sink);
LockedModel read_locked(std::istream& source);
void write_model(const Model& m, std::ostream& sink);
Model read_model(std::istream& source);

void save_locked(const LockedModel& lm, const std::filesystem::path& path);
LockedModel load_locked(const std::filesystem::path& path);
void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace paramlock
