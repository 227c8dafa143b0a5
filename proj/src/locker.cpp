#include "paramlock/locker.hpp"

#include <openssl/crypto.h>

#include <bit>
#include <cstring>

#include "container.hpp"

namespace paramlock {
namespace {

std::vector<detail::BlobEntry> entries_of(std::span<const LockedTensor> tensors) {
  std::vector<detail::BlobEntry> entries;
  entries.reserve(tensors.size());
  for (const auto& t : tensors) entries.push_back({&t.name, &t.dims, t.bytes});
  return entries;
}

Digest digest_of(const Architecture& arch, std::span<const LockedTensor> tensors,
                 std::uint16_t version) {
  const auto entries = entries_of(tensors);
  const auto header =
      detail::encode_header(detail::kLockedMagic, version, arch.to_text(), entries);
  return detail::compute_digest(header, entries);
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void to_host_order_inplace(std::span<float> values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : values) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
  }
}

}  // namespace

const char* to_string(FormatError::Kind kind) {
  switch (kind) {
    case FormatError::Kind::kTruncated: return "truncated-file";
    case FormatError::Kind::kBadMagic: return "bad-magic";
    case FormatError::Kind::kVersionUnsupported: return "version-unsupported";
    case FormatError::Kind::kDigestMismatch: return "digest-mismatch";
    case FormatError::Kind::kMalformed: return "malformed-file";
  }
  return "unknown";
}

void floats_to_le_bytes(std::span<const float> values, std::span<std::uint8_t> out) {
  if (out.size() < 4 * values.size()) throw std::length_error("byte buffer too small");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
}

void le_bytes_to_floats(std::span<const std::uint8_t> bytes, std::span<float> out) {
  if (bytes.size() != 4 * out.size()) throw std::length_error("byte count is not 4 x float count");
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = std::uint32_t{bytes[4 * i]} | (std::uint32_t{bytes[4 * i + 1]} << 8) |
                               (std::uint32_t{bytes[4 * i + 2]} << 16) |
                               (std::uint32_t{bytes[4 * i + 3]} << 24);
    out[i] = std::bit_cast<float>(bits);
  }
}

LockedModel::LockedModel(Architecture arch, std::vector<LockedTensor> tensors, Digest digest,
                         std::uint16_t format_version)
    : arch_(std::move(arch)),
      tensors_(std::move(tensors)),
      digest_(digest),
      format_version_(format_version) {
  const auto layout = arch_.parameter_layout();
  if (tensors_.size() != layout.size()) {
    throw MalformedModel("locked model has " + std::to_string(tensors_.size()) +
                         " tensors, architecture needs " + std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = tensors_[i];
    if (t.name != layout[i].name || t.dims != layout[i].dims ||
        t.bytes.size() != 4 * layout[i].size()) {
      throw MalformedModel("locked tensor '" + t.name + "' does not match the architecture");
    }
  }
}

LockedModel LockedModel::assemble(Architecture arch, std::vector<LockedTensor> tensors) {
  const Digest d = digest_of(arch, tensors, kFormatVersion);
  return LockedModel(std::move(arch), std::move(tensors), d);
}

bool LockedModel::verify_integrity() const {
  return digest_of(arch_, tensors_, format_version_) == digest_;
}

UnlockedView::~UnlockedView() {
  for (auto& t : tensors_) {
    if (!t.empty()) OPENSSL_cleanse(t.data(), t.size() * sizeof(float));
  }
}

std::vector<std::span<const float>> UnlockedView::parameter_spans() const {
  std::vector<std::span<const float>> spans;
  spans.reserve(tensors_.size());
  for (const auto& t : tensors_) spans.emplace_back(t);
  return spans;
}

bool UnlockedView::bit_equal(const Model& model) const {
  if (!(model.arch() == arch_) || model.tensors().size() != tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& v = model.tensors()[i].values;
    if (v.size() != tensors_[i].size()) return false;
    if (!v.empty() && std::memcmp(v.data(), tensors_[i].data(), v.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

LockedModel lock_model(const Model& m, const MasterKey& key) {
  validate_tensors(m.arch(), m.tensors());
  const Keystream ks = expand_keystream(key, 4 * m.param_count());
  std::vector<LockedTensor> locked;
  locked.reserve(m.tensors().size());
  std::size_t offset = 0;
  for (const auto& t : m.tensors()) {
    LockedTensor lt{t.name, t.dims, std::vector<std::uint8_t>(4 * t.values.size())};
    floats_to_le_bytes(t.values, lt.bytes);
    lock_bytes_into(lt.bytes, ks.subspan(offset, lt.bytes.size()), lt.bytes);
    offset += lt.bytes.size();
    locked.push_back(std::move(lt));
  }
  return LockedModel::assemble(m.arch(), std::move(locked));
}

UnlockedView unlock_model(const LockedModel& lm, const MasterKey& key) {
  if (!lm.verify_integrity()) {
    throw FormatError(FormatError::Kind::kDigestMismatch,
                      "locked model failed its integrity check");
  }
  std::vector<std::uint8_t> ks(4 * lm.param_count());
  fill_keystream(key, ks);
  std::vector<std::vector<float>> tensors;
  tensors.reserve(lm.tensors().size());
  std::size_t offset = 0;
  for (const auto& t : lm.tensors()) {
    std::vector<float> values(t.bytes.size() / 4);
    std::span<std::uint8_t> raw(reinterpret_cast<std::uint8_t*>(values.data()), t.bytes.size());
    unlock_bytes_into(t.bytes, std::span<const std::uint8_t>(ks).subspan(offset, t.bytes.size()),
                      raw);
    to_host_order_inplace(values);
    offset += t.bytes.size();
    tensors.push_back(std::move(values));
  }
  OPENSSL_cleanse(ks.data(), ks.size());
  return UnlockedView(lm.arch(), std::move(tensors));
}

}  // namespace paramlock
