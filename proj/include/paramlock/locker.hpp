#pragma once

// Whole-model locking. Every float parameter is taken as its 4-byte
// little-endian IEEE-754 image and each byte is locked with the keystream
// byte at the same position of the concatenated canonical parameter vector:
// scalar i uses keystream bytes [4i, 4i + 4).

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "paramlock/architecture.hpp"
#include "paramlock/cipher.hpp"
#include "paramlock/model.hpp"

namespace paramlock {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::uint16_t kFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { kTruncated, kBadMagic, kVersionUnsupported, kDigestMismatch, kMalformed };
  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(FormatError::Kind kind);

struct LockedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;  // 4 per element

  friend bool operator==(const LockedTensor&, const LockedTensor&) = default;
};

/// Architecture (plaintext) plus locked parameter blobs and a SHA-256 digest
/// over the serialized header and blobs. Immutable.
class LockedModel {
 public:
  /// Takes the digest as given; unlock_model rejects it if it does not match.
  LockedModel(Architecture arch, std::vector<LockedTensor> tensors, Digest digest,
              std::uint16_t format_version = kFormatVersion);

  /// Computes the digest from the contents.
  static LockedModel assemble(Architecture arch, std::vector<LockedTensor> tensors);

  const Architecture& arch() const { return arch_; }
  const std::vector<LockedTensor>& tensors() const { return tensors_; }
  std::size_t param_count() const { return arch_.parameter_count(); }
  std::uint16_t format_version() const { return format_version_; }
  const Digest& integrity_digest() const { return digest_; }

  /// Recomputes the digest and compares it with the stored one.
  bool verify_integrity() const;

  friend bool operator==(const LockedModel&, const LockedModel&) = default;

 private:
  Architecture arch_;
  std::vector<LockedTensor> tensors_;
  Digest digest_{};
  std::uint16_t format_version_ = kFormatVersion;
};

/// Parameters decrypted for one query. Move-only; the buffers are wiped on
/// destruction. Carries its own copy of the architecture, so it may outlive
/// the LockedModel it came from.
class UnlockedView {
 public:
  UnlockedView(UnlockedView&&) noexcept = default;
  UnlockedView& operator=(UnlockedView&&) noexcept = default;
  UnlockedView(const UnlockedView&) = delete;
  UnlockedView& operator=(const UnlockedView&) = delete;
  ~UnlockedView();

  const Architecture& arch() const { return arch_; }
  std::size_t tensor_count() const { return tensors_.size(); }
  std::span<const float> tensor(std::size_t i) const { return tensors_[i]; }
  std::vector<std::span<const float>> parameter_spans() const;

  /// Bitwise comparison against a plaintext model.
  bool bit_equal(const Model& model) const;

 private:
  friend UnlockedView unlock_model(const LockedModel& lm, const MasterKey& key);
  UnlockedView(Architecture arch, std::vector<std::vector<float>> tensors)
      : arch_(std::move(arch)), tensors_(std::move(tensors)) {}

  Architecture arch_;
  std::vector<std::vector<float>> tensors_;
};

LockedModel lock_model(const Model& m, const MasterKey& key);

/// Succeeds for any key; a wrong key yields garbage (possibly non-finite)
/// floats. Throws FormatError(kDigestMismatch) if the digest does not verify,
/// before any decryption happens.
UnlockedView unlock_model(const LockedModel& lm, const MasterKey& key);

// Little-endian binary32 conversions, independent of host byte order.
void floats_to_le_bytes(std::span<const float> values, std::span<std::uint8_t> out);
void le_bytes_to_floats(std::span<const std::uint8_t> bytes, std::span<float> out);

}  // namespace paramlock
