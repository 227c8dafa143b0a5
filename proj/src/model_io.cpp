#include "paramlock/model_io.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "container.hpp"

namespace paramlock {
namespace {

using Kind = FormatError::Kind;

std::vector<std::uint8_t> slurp(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read failure");
  return bytes;
}

void spill(std::ostream& out, const std::vector<std::uint8_t>& bytes) {
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failure");
}

// The encoder always writes canonical text; the digest of a locked model is
// recomputed from that form, so anything else is rejected here.
Architecture decode_arch(const std::string& text) {
  try {
    auto arch = Architecture::parse(text);
    if (arch.to_text() != text) {
      throw FormatError(Kind::kMalformed, "embedded architecture is not in canonical form");
    }
    return arch;
  } catch (const ArchitectureError& e) {
    throw FormatError(Kind::kMalformed, std::string("embedded architecture: ") + e.what());
  }
}

template <typename Fn>
auto rethrow_as_malformed(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const MalformedModel& e) {
    throw FormatError(Kind::kMalformed, e.what());
  }
}

// Writes to `path` via a temporary sibling so a failed write never leaves a
// partial file behind.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    spill(out, bytes);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return slurp(in);
}

}  // namespace

std::vector<std::uint8_t> encode_locked(const LockedModel& lm) {
  std::vector<detail::BlobEntry> entries;
  for (const auto& t : lm.tensors()) entries.push_back({&t.name, &t.dims, t.bytes});
  return detail::encode_container(detail::kLockedMagic, lm.arch(), entries);
}

LockedModel decode_locked(std::span<const std::uint8_t> bytes) {
  const auto c = detail::decode_container(bytes, detail::kLockedMagic);
  auto arch = decode_arch(c.arch_text);
  std::vector<LockedTensor> tensors;
  for (const auto& e : c.entries) {
    tensors.push_back({e.name, e.dims, std::vector<std::uint8_t>(e.bytes.begin(), e.bytes.end())});
  }
  return rethrow_as_malformed(
      [&] { return LockedModel(std::move(arch), std::move(tensors), c.digest, c.version); });
}

std::vector<std::uint8_t> encode_model(const Model& m) {
  std::vector<std::vector<std::uint8_t>> blobs;
  std::vector<detail::BlobEntry> entries;
  blobs.reserve(m.tensors().size());
  for (const auto& t : m.tensors()) {
    blobs.emplace_back(4 * t.values.size());
    floats_to_le_bytes(t.values, blobs.back());
    entries.push_back({&t.name, &t.dims, blobs.back()});
  }
  return detail::encode_container(detail::kPlainMagic, m.arch(), entries);
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  const auto c = detail::decode_container(bytes, detail::kPlainMagic);
  auto arch = decode_arch(c.arch_text);
  std::vector<WeightTensor> tensors;
  for (const auto& e : c.entries) {
    if (e.bytes.size() % 4 != 0) {
      throw FormatError(Kind::kMalformed, "tensor '" + e.name + "' blob is not a float array");
    }
    WeightTensor t{e.name, e.dims, std::vector<float>(e.bytes.size() / 4)};
    le_bytes_to_floats(e.bytes, t.values);
    tensors.push_back(std::move(t));
  }
  return rethrow_as_malformed([&] { return Model(std::move(arch), std::move(tensors)); });
}

void write_locked(const LockedModel& lm, std::ostream& sink) { spill(sink, encode_locked(lm)); }
LockedModel read_locked(std::istream& source) { return decode_locked(slurp(source)); }
void write_model(const Model& m, std::ostream& sink) { spill(sink, encode_model(m)); }
Model read_model(std::istream& source) { return decode_model(slurp(source)); }

void save_locked(const LockedModel& lm, const std::filesystem::path& path) {
  write_file(path, encode_locked(lm));
}
LockedModel load_locked(const std::filesystem::path& path) { return decode_locked(read_file(path)); }
void save_model(const Model& m, const std::filesystem::path& path) {
  write_file(path, encode_model(m));
}
Model load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace paramlock
