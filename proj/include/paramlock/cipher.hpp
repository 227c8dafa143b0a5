#pragma once

// Byte-level locking primitives: the AES S-Box, the chained AES-128 key
// schedule used as a keystream, and the substitute-after-xor transform that
// locks and unlocks parameter bytes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace paramlock {

inline constexpr std::size_t kMasterKeySize = 16;
/// Bytes produced by one AES-128 key expansion (11 round keys).
inline constexpr std::size_t kScheduleBlockSize = 176;

/// 128-bit master key. Value type; compared octet by octet.
class MasterKey {
 public:
  using Bytes = std::array<std::uint8_t, kMasterKeySize>;

  MasterKey() = default;
  explicit MasterKey(const Bytes& bytes) : bytes_(bytes) {}

  /// Throws std::invalid_argument unless `bytes` holds exactly 16 octets.
  static MasterKey from_bytes(std::span<const std::uint8_t> bytes);
  /// Accepts exactly 32 hex digits (either case).
  static MasterKey from_hex(std::string_view hex);

  const Bytes& bytes() const { return bytes_; }
  std::string to_hex() const;

  friend bool operator==(const MasterKey&, const MasterKey&) = default;

 private:
  Bytes bytes_{};
};

/// Deterministic key bytes {k_0 .. k_{n-1}} derived from a MasterKey.
class Keystream {
 public:
  Keystream() = default;
  explicit Keystream(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::span<const std::uint8_t> bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }
  std::span<const std::uint8_t> subspan(std::size_t offset, std::size_t count) const {
    return std::span<const std::uint8_t>(bytes_).subspan(offset, count);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

struct SboxTable {
  std::array<std::uint8_t, 256> forward;
  std::array<std::uint8_t, 256> inverse;
};

/// The AES S-Box and its inverse.
const SboxTable& aes_sbox();

inline std::uint8_t sbox_forward(std::uint8_t b) { return aes_sbox().forward[b]; }
inline std::uint8_t sbox_inverse(std::uint8_t b) { return aes_sbox().inverse[b]; }

/// Standard AES-128 key expansion: 176 bytes, round key 0 first.
std::array<std::uint8_t, kScheduleBlockSize> aes128_expand_key(const MasterKey::Bytes& key);

/// Fills `out` with the keystream for `key`. The first 176 bytes are the
/// AES-128 expansion of the key; every later 176-byte block is the expansion
/// of the last 16 bytes of the block before it.
void fill_keystream(const MasterKey& key, std::span<std::uint8_t> out);

Keystream expand_keystream(const MasterKey& key, std::size_t n_bytes);

class KeystreamTooShort : public std::length_error {
 public:
  KeystreamTooShort(std::size_t needed, std::size_t available);
};

/// out[i] = Sbox[plain[i] ^ ks[i]]. `out` may alias `plain`.
void lock_bytes_into(std::span<const std::uint8_t> plain, std::span<const std::uint8_t> ks,
                     std::span<std::uint8_t> out);
/// out[i] = InvSbox[locked[i]] ^ ks[i]. `out` may alias `locked`.
void unlock_bytes_into(std::span<const std::uint8_t> locked, std::span<const std::uint8_t> ks,
                       std::span<std::uint8_t> out);

std::vector<std::uint8_t> lock_bytes(std::span<const std::uint8_t> plain, const Keystream& ks);
std::vector<std::uint8_t> unlock_bytes(std::span<const std::uint8_t> locked, const Keystream& ks);

}  // namespace paramlock
