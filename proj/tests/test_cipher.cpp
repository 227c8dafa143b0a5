#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <set>

#include "paramlock/cipher.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace paramlock;

namespace {

const MasterKey kFipsKey = MasterKey::from_hex("2B7E151628AED2A6ABF7158809CF4F3C");

std::vector<std::uint8_t> hex_bytes(std::string_view hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

// Key-expansion words w[0..43] for the FIPS-197 A.1 key.
constexpr std::string_view kFipsExpansion =
    "2b7e151628aed2a6abf7158809cf4f3c"
    "a0fafe1788542cb123a339392a6c7605"
    "f2c295f27a96b9435935807a7359f67f"
    "3d80477d4716fe3e1e237e446d7a883b"
    "ef44a541a8525b7fb671253bdb0bad00"
    "d4d1c6f87c839d87caf2b8bc11f915bc"
    "6d88a37a110b3efddbf98641ca0093fd"
    "4e54f70e5f5fc9f384a64fb24ea6dc4f"
    "ead27321b58dbad2312bf5607f8d292f"
    "ac7766f319fadc2128d12941575c006e"
    "d014f9a8c9ee2589e13f0cc8b6630ca6";

}  // namespace

TEST(Sbox, KnownEntries) {
  EXPECT_EQ(sbox_forward(0x00), 0x63);
  EXPECT_EQ(sbox_forward(0x53), 0xED);
  EXPECT_EQ(sbox_inverse(0x63), 0x00);
  EXPECT_EQ(sbox_inverse(0xED), 0x53);
  for (int b : {0x00, 0x7F, 0xFF}) {
    EXPECT_EQ(sbox_inverse(sbox_forward(static_cast<std::uint8_t>(b))), b);
  }
}

TEST(Sbox, MatchesFieldInverseAndAffineMap) {
  for (int b = 0; b < 256; ++b) {
    EXPECT_EQ(sbox_forward(static_cast<std::uint8_t>(b)), oracle::sbox(static_cast<std::uint8_t>(b)))
        << "b=" << b;
  }
}

TEST(Sbox, IsBijectionWithExactInverse) {
  std::set<int> images;
  for (int b = 0; b < 256; ++b) {
    const auto x = static_cast<std::uint8_t>(b);
    images.insert(sbox_forward(x));
    EXPECT_EQ(sbox_inverse(sbox_forward(x)), x);
    EXPECT_EQ(sbox_forward(sbox_inverse(x)), x);
  }
  EXPECT_EQ(images.size(), 256u);
}

TEST(MasterKey, HexParsing) {
  EXPECT_EQ(kFipsKey.to_hex(), "2b7e151628aed2a6abf7158809cf4f3c");
  EXPECT_EQ(MasterKey::from_hex("2b7e151628aed2a6abf7158809cf4f3c"), kFipsKey);
  EXPECT_THROW(MasterKey::from_hex("2B7E15"), std::invalid_argument);
  EXPECT_THROW(MasterKey::from_hex("2B7E151628AED2A6ABF7158809CF4F3C00"), std::invalid_argument);
  EXPECT_THROW(MasterKey::from_hex("ZZ7E151628AED2A6ABF7158809CF4F3C"), std::invalid_argument);
  const std::vector<std::uint8_t> fifteen(15);
  EXPECT_THROW(MasterKey::from_bytes(fifteen), std::invalid_argument);
}

TEST(MasterKey, EqualityIsOctetWise) {
  auto bytes = kFipsKey.bytes();
  EXPECT_EQ(MasterKey(bytes), kFipsKey);
  bytes[15] ^= 1;
  EXPECT_NE(MasterKey(bytes), kFipsKey);
}

TEST(KeySchedule, FipsAppendixAVector) {
  const auto expected = hex_bytes(kFipsExpansion);
  const auto schedule = aes128_expand_key(kFipsKey.bytes());
  EXPECT_TRUE(std::equal(schedule.begin(), schedule.end(), expected.begin()));

  const auto ks = expand_keystream(kFipsKey, 176);
  EXPECT_TRUE(std::ranges::equal(ks.bytes(), expected));
  EXPECT_TRUE(std::ranges::equal(ks.subspan(160, 16), hex_bytes("D014F9A8C9EE2589E13F0CC8B6630CA6")));
}

TEST(KeySchedule, MatchesWordOrientedOracleForRandomKeys) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto key = gen::key(rng);
    const auto expect = oracle::key_expansion(std::span<const std::uint8_t, 16>(key.bytes()));
    EXPECT_EQ(aes128_expand_key(key.bytes()), expect) << key.to_hex();
  }
}

TEST(Keystream, FirstSixteenBytesAreTheKey) {
  const auto ks = expand_keystream(kFipsKey, 16);
  EXPECT_TRUE(std::ranges::equal(ks.bytes(), kFipsKey.bytes()));
}

TEST(Keystream, EmptyRequest) { EXPECT_EQ(expand_keystream(kFipsKey, 0).size(), 0u); }

TEST(Keystream, ChainsBlocksThroughLastSixteenBytes) {
  Rng rng(12);
  for (std::size_t n : {177u, 352u, 500u, 4096u}) {
    const auto key = gen::key(rng);
    const auto ks = expand_keystream(key, n);
    const auto expect = oracle::keystream(std::span<const std::uint8_t, 16>(key.bytes()), n);
    EXPECT_TRUE(std::ranges::equal(ks.bytes(), expect)) << "n=" << n;
  }
}

TEST(Keystream, PrefixConsistentAndDeterministic) {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    SCOPED_TRACE(i);
    const auto key = gen::key(rng);
    const auto n = static_cast<std::size_t>(uniform_index(rng, 2000));
    const auto m = static_cast<std::size_t>(uniform_index(rng, n + 1));
    const auto full = expand_keystream(key, n);
    const auto prefix = expand_keystream(key, m);
    EXPECT_TRUE(std::ranges::equal(full.subspan(0, m), prefix.bytes()));
    EXPECT_TRUE(std::ranges::equal(full.bytes(), expand_keystream(key, n).bytes()));
  }
}

TEST(Keystream, FillMatchesExpand) {
  std::vector<std::uint8_t> buf(1000);
  fill_keystream(kFipsKey, buf);
  EXPECT_TRUE(std::ranges::equal(buf, expand_keystream(kFipsKey, 1000).bytes()));
}

TEST(LockBytes, WorkedExample) {
  // p = 0x00 under the first FIPS key byte 0x2B: Sbox[0x2B] = 0xF1.
  const auto ks = expand_keystream(kFipsKey, 1);
  const std::vector<std::uint8_t> plain{0x00};
  EXPECT_EQ(lock_bytes(plain, ks), std::vector<std::uint8_t>{0xF1});
  EXPECT_EQ(unlock_bytes(std::vector<std::uint8_t>{0xF1}, ks), plain);
}

TEST(LockBytes, EmptyInput) {
  const auto ks = expand_keystream(kFipsKey, 0);
  EXPECT_TRUE(lock_bytes({}, ks).empty());
  EXPECT_TRUE(unlock_bytes({}, ks).empty());
}

TEST(LockBytes, ShortKeystreamIsAnError) {
  const auto ks = expand_keystream(kFipsKey, 3);
  const std::vector<std::uint8_t> plain(4);
  EXPECT_THROW(lock_bytes(plain, ks), KeystreamTooShort);
  EXPECT_THROW(unlock_bytes(plain, ks), KeystreamTooShort);
}

TEST(LockBytes, RoundTripProperty) {
  Rng rng(14);
  for (int i = 0; i < 10000; ++i) {
    const auto n = static_cast<std::size_t>(uniform_index(rng, 64));
    const auto plain = gen::bytes(rng, n);
    const auto ks = expand_keystream(gen::key(rng), n);
    const auto locked = lock_bytes(plain, ks);
    ASSERT_EQ(unlock_bytes(locked, ks), plain) << "iteration " << i;
  }
}

TEST(LockBytes, EachOutputByteFollowsTheDefinition) {
  Rng rng(15);
  const auto plain = gen::bytes(rng, 700);
  const auto ks = expand_keystream(gen::key(rng), 700);
  const auto locked = lock_bytes(plain, ks);
  for (std::size_t i = 0; i < plain.size(); ++i) {
    ASSERT_EQ(locked[i], oracle::sbox(plain[i] ^ ks.bytes()[i]));
  }
}

TEST(LockBytes, InPlaceAliasing) {
  Rng rng(16);
  auto buf = gen::bytes(rng, 300);
  const auto original = buf;
  const auto ks = expand_keystream(gen::key(rng), 300);
  lock_bytes_into(buf, ks.bytes(), buf);
  EXPECT_EQ(buf, lock_bytes(original, ks));
  unlock_bytes_into(buf, ks.bytes(), buf);
  EXPECT_EQ(buf, original);
}

TEST(LockBytes, WrongKeyMatchesAboutOneByteInTwoFiftySix) {
  Rng rng(17);
  const std::size_t n = 1 << 18;
  const auto plain = gen::bytes(rng, n);
  const auto right = expand_keystream(gen::key(rng), n);
  const auto wrong = expand_keystream(gen::key(rng), n);
  const auto recovered = unlock_bytes(lock_bytes(plain, right), wrong);
  std::size_t same = 0;
  for (std::size_t i = 0; i < n; ++i) same += recovered[i] == plain[i];
  const double rate = static_cast<double>(same) / static_cast<double>(n);
  // Binomial(n, 1/256): sd is about 6e-5 of n, so 4e-4 is over six sigma.
  EXPECT_NEAR(rate, 1.0 / 256.0, 4e-4);
}
