#include "container.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <memory>

namespace paramlock::detail {
namespace {

using Kind = FormatError::Kind;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(Kind::kTruncated, std::string("file truncated while reading ") + what);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t uint(std::size_t width, const char* what) {
    auto s = take(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }

  std::string string(const char* what) {
    const auto n = uint(4, what);
    auto s = take(n, what);
    return std::string(s.begin(), s.end());
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::vector<std::uint8_t> encode_header(const char* magic, std::uint16_t version,
                                        const std::string& arch_text,
                                        std::span<const BlobEntry> entries) {
  std::vector<std::uint8_t> out(magic, magic + 4);
  put_u16(out, version);
  put_string(out, arch_text);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    put_string(out, *e.name);
    put_u32(out, static_cast<std::uint32_t>(e.dims->size()));
    for (auto d : *e.dims) put_u32(out, d);
    put_u64(out, offset);
    put_u64(out, e.bytes.size());
    offset += e.bytes.size();
  }
  return out;
}

Digest compute_digest(std::span<const std::uint8_t> header, std::span<const BlobEntry> entries) {
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  EVP_DigestUpdate(ctx.get(), header.data(), header.size());
  for (const auto& e : entries) EVP_DigestUpdate(ctx.get(), e.bytes.data(), e.bytes.size());
  Digest d{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), d.data(), &len) != 1 || len != d.size()) {
    throw std::runtime_error("SHA-256 finalisation failed");
  }
  return d;
}

std::vector<std::uint8_t> encode_container(const char* magic, const Architecture& arch,
                                           std::span<const BlobEntry> entries) {
  auto out = encode_header(magic, kFormatVersion, arch.to_text(), entries);
  const Digest d = compute_digest(out, entries);
  for (const auto& e : entries) out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

DecodedContainer decode_container(std::span<const std::uint8_t> bytes, const char* magic) {
  Reader r(bytes);
  auto m = r.take(4, "magic");
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw FormatError(Kind::kBadMagic, std::string("bad magic, expected ") + magic);
  }
  DecodedContainer out;
  out.version = static_cast<std::uint16_t>(r.uint(2, "format version"));
  if (out.version != kFormatVersion) {
    throw FormatError(Kind::kVersionUnsupported,
                      "unsupported format version " + std::to_string(out.version));
  }
  out.arch_text = r.string("architecture");
  const auto count = r.uint(4, "tensor count");

  struct Row {
    std::uint64_t offset, length;
  };
  std::vector<Row> rows;
  for (std::uint64_t t = 0; t < count; ++t) {
    DecodedEntry e;
    e.name = r.string("tensor name");
    const auto rank = r.uint(4, "tensor rank");
    if (rank > 8) throw FormatError(Kind::kMalformed, "tensor '" + e.name + "' has rank > 8");
    for (std::uint64_t k = 0; k < rank; ++k) {
      e.dims.push_back(static_cast<std::uint32_t>(r.uint(4, "tensor dims")));
    }
    rows.push_back({r.uint(8, "blob offset"), r.uint(8, "blob length")});
    out.entries.push_back(std::move(e));
  }

  const std::size_t blob_start = r.pos();
  std::uint64_t expected_offset = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].offset != expected_offset) {
      throw FormatError(Kind::kMalformed, "blobs are not contiguous in canonical order");
    }
    expected_offset += rows[t].length;
    if (expected_offset < rows[t].length) throw FormatError(Kind::kMalformed, "blob size overflow");
  }
  if (r.remaining() < 32 || r.remaining() - 32 < expected_offset) {
    throw FormatError(Kind::kTruncated, "file truncated inside the blob region or footer");
  }
  if (r.remaining() - 32 != expected_offset) {
    throw FormatError(Kind::kMalformed, "trailing bytes after the footer");
  }
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.entries[t].bytes = bytes.subspan(blob_start + rows[t].offset, rows[t].length);
  }
  auto footer = bytes.subspan(bytes.size() - 32);
  std::copy(footer.begin(), footer.end(), out.digest.begin());

  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  Digest actual{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size() - 32) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), actual.data(), &len) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  if (actual != out.digest) throw FormatError(Kind::kDigestMismatch, "integrity digest mismatch");
  return out;
}

}  // namespace paramlock::detail
