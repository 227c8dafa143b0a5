#include "paramlock/cipher.hpp"

#include <algorithm>
#include <cctype>

namespace paramlock {
namespace {

// FIPS-197 Figure 7.
constexpr std::array<std::uint8_t, 256> kAesSbox = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
};

constexpr SboxTable make_table() {
  SboxTable t{kAesSbox, {}};
  for (std::size_t i = 0; i < 256; ++i) t.inverse[t.forward[i]] = static_cast<std::uint8_t>(i);
  return t;
}

constexpr SboxTable kTable = make_table();

constexpr std::array<std::uint8_t, 10> kRcon = {0x01, 0x02, 0x04, 0x08, 0x10,
                                                0x20, 0x40, 0x80, 0x1b, 0x36};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

MasterKey MasterKey::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kMasterKeySize) {
    throw std::invalid_argument("master key must be 16 bytes, got " +
                                std::to_string(bytes.size()));
  }
  Bytes b{};
  std::copy(bytes.begin(), bytes.end(), b.begin());
  return MasterKey(b);
}

MasterKey MasterKey::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kMasterKeySize) {
    throw std::invalid_argument("master key must be 32 hex characters, got " +
                                std::to_string(hex.size()));
  }
  Bytes b{};
  for (std::size_t i = 0; i < kMasterKeySize; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("master key contains a non-hex character");
    b[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return MasterKey(b);
}

std::string MasterKey::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(2 * kMasterKeySize);
  for (auto b : bytes_) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

const SboxTable& aes_sbox() { return kTable; }

std::array<std::uint8_t, kScheduleBlockSize> aes128_expand_key(const MasterKey::Bytes& key) {
  std::array<std::uint8_t, kScheduleBlockSize> w{};
  std::copy(key.begin(), key.end(), w.begin());
  for (std::size_t i = 4; i < 44; ++i) {
    std::array<std::uint8_t, 4> t = {w[4 * i - 4], w[4 * i - 3], w[4 * i - 2], w[4 * i - 1]};
    if (i % 4 == 0) {
      // RotWord, SubWord, Rcon
      t = {static_cast<std::uint8_t>(kTable.forward[t[1]] ^ kRcon[i / 4 - 1]),
           kTable.forward[t[2]], kTable.forward[t[3]], kTable.forward[t[0]]};
    }
    for (std::size_t j = 0; j < 4; ++j) w[4 * i + j] = w[4 * (i - 4) + j] ^ t[j];
  }
  return w;
}

void fill_keystream(const MasterKey& key, std::span<std::uint8_t> out) {
  MasterKey::Bytes seed = key.bytes();
  std::size_t pos = 0;
  while (pos < out.size()) {
    const auto block = aes128_expand_key(seed);
    const std::size_t n = std::min(block.size(), out.size() - pos);
    std::copy_n(block.begin(), n, out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += n;
    std::copy(block.end() - kMasterKeySize, block.end(), seed.begin());
  }
}

Keystream expand_keystream(const MasterKey& key, std::size_t n_bytes) {
  std::vector<std::uint8_t> bytes(n_bytes);
  fill_keystream(key, bytes);
  return Keystream(std::move(bytes));
}

KeystreamTooShort::KeystreamTooShort(std::size_t needed, std::size_t available)
    : std::length_error("keystream too short: need " + std::to_string(needed) + " bytes, have " +
                        std::to_string(available)) {}

void lock_bytes_into(std::span<const std::uint8_t> plain, std::span<const std::uint8_t> ks,
                     std::span<std::uint8_t> out) {
  if (ks.size() < plain.size()) throw KeystreamTooShort(plain.size(), ks.size());
  if (out.size() < plain.size()) throw std::length_error("lock output buffer too small");
  const auto& fwd = kTable.forward;
  for (std::size_t i = 0; i < plain.size(); ++i) out[i] = fwd[plain[i] ^ ks[i]];
}

void unlock_bytes_into(std::span<const std::uint8_t> locked, std::span<const std::uint8_t> ks,
                       std::span<std::uint8_t> out) {
  if (ks.size() < locked.size()) throw KeystreamTooShort(locked.size(), ks.size());
  if (out.size() < locked.size()) throw std::length_error("unlock output buffer too small");
  const auto& inv = kTable.inverse;
  for (std::size_t i = 0; i < locked.size(); ++i) out[i] = inv[locked[i]] ^ ks[i];
}

std::vector<std::uint8_t> lock_bytes(std::span<const std::uint8_t> plain, const Keystream& ks) {
  std::vector<std::uint8_t> out(plain.size());
  lock_bytes_into(plain, ks.bytes(), out);
  return out;
}

std::vector<std::uint8_t> unlock_bytes(std::span<const std::uint8_t> locked, const Keystream& ks) {
  std::vector<std::uint8_t> out(locked.size());
  unlock_bytes_into(locked, ks.bytes(), out);
  return out;
}

}  // namespace paramlock
