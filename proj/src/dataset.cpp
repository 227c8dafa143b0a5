#include "paramlock/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "paramlock/random.hpp"

namespace paramlock {

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string new_name) const {
  Dataset out;
  out.name = std::move(new_name);
  out.image_shape = image_shape;
  out.num_classes = num_classes;
  out.images.resize(images.rows(), static_cast<Eigen::Index>(indices.size()));
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= size()) throw std::out_of_range("dataset subset index out of range");
    out.images.col(static_cast<Eigen::Index>(j)) =
        images.col(static_cast<Eigen::Index>(indices[j]));
    out.labels.push_back(labels[indices[j]]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(images.cols()) != labels.size()) {
    throw std::invalid_argument("dataset '" + name + "': image and label counts differ");
  }
  if (static_cast<std::size_t>(images.rows()) != image_shape.size()) {
    throw std::invalid_argument("dataset '" + name + "': image size does not match its shape");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("dataset '" + name + "': label out of range");
    }
  }
  if (images.size() > 0 && (images.minCoeff() < 0.0f || images.maxCoeff() > 1.0f)) {
    throw std::invalid_argument("dataset '" + name + "': pixel values outside [0, 1]");
  }
}

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  using Kind = IdxError::Kind;
  if (bytes.size() < 4) throw IdxError(Kind::kTruncated, "IDX: file shorter than its header");
  if (bytes[0] != 0 || bytes[1] != 0) throw IdxError(Kind::kBadMagic, "IDX: bad magic");
  if (bytes[2] != 0x08) {
    throw IdxError(Kind::kUnsupportedType,
                   "IDX: unsupported type code " + std::to_string(bytes[2]));
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw IdxError(Kind::kBadMagic, "IDX: rank 0");
  if (bytes.size() < 4 + 4 * rank) throw IdxError(Kind::kTruncated, "IDX: truncated dimensions");
  IdxTensor t;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const auto* p = bytes.data() + 4 + 4 * i;
    const std::uint32_t d = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    t.dims.push_back(d);
    count *= d;
  }
  const std::size_t header = 4 + 4 * rank;
  const std::size_t payload = bytes.size() - header;
  if (payload < count) {
    throw IdxError(Kind::kTruncated, "IDX: declared " + std::to_string(count) +
                                         " elements, found " + std::to_string(payload));
  }
  if (payload > count) {
    throw IdxError(Kind::kSizeMismatch, "IDX: declared " + std::to_string(count) +
                                            " elements, found " + std::to_string(payload));
  }
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

IdxTensor read_idx_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

Dataset dataset_from_idx(const IdxTensor& images, const IdxTensor& labels, int num_classes,
                         std::string name) {
  if (images.dims.size() != 3 || labels.dims.size() != 1 || images.dims[0] != labels.dims[0]) {
    throw std::invalid_argument("IDX images must be N x H x W with N labels");
  }
  Dataset d;
  d.name = std::move(name);
  d.num_classes = num_classes;
  d.image_shape = {1, static_cast<int>(images.dims[1]), static_cast<int>(images.dims[2])};
  const auto n = static_cast<Eigen::Index>(images.dims[0]);
  const auto pixels = static_cast<Eigen::Index>(d.image_shape.size());
  Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>> raw(
      images.data.data(), pixels, n);
  d.images = raw.cast<float>() / 255.0f;
  d.labels.assign(labels.data.begin(), labels.data.end());
  d.validate();
  return d;
}

Dataset load_mnist_dir(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::kTrain ? "train" : "t10k";
  const auto images = read_idx_file(dir / (prefix + "-images-idx3-ubyte"));
  const auto labels = read_idx_file(dir / (prefix + "-labels-idx1-ubyte"));
  return dataset_from_idx(images, labels, 10, dir.filename().string() + "/" + prefix);
}

namespace {

struct Placement {
  float cx, cy, r, t;
};

// Ink in [0, 1] for pattern `cls` at pixel (x, y).
float pattern_ink(int cls, float x, float y, const Placement& p) {
  const float dx = x - p.cx, dy = y - p.cy;
  const float adx = std::abs(dx), ady = std::abs(dy);
  const bool in_box = adx <= p.r && ady <= p.r;
  switch (cls) {
    case 0:  // horizontal bar
      return (ady <= p.t && adx <= p.r) ? 1.0f : 0.0f;
    case 1:  // vertical bar
      return (adx <= p.t && ady <= p.r) ? 1.0f : 0.0f;
    case 2:  // main diagonal
      return (in_box && std::abs(dx - dy) <= p.t * 1.4f) ? 1.0f : 0.0f;
    case 3:  // anti-diagonal
      return (in_box && std::abs(dx + dy) <= p.t * 1.4f) ? 1.0f : 0.0f;
    case 4:  // hollow square
      return (in_box && std::max(adx, ady) >= p.r - p.t) ? 1.0f : 0.0f;
    case 5:  // filled disk
      return (dx * dx + dy * dy <= 0.55f * p.r * p.r) ? 1.0f : 0.0f;
    case 6:  // plus
      return ((ady <= p.t && adx <= p.r) || (adx <= p.t && ady <= p.r)) ? 1.0f : 0.0f;
    case 7:  // X
      return (in_box && (std::abs(dx - dy) <= p.t * 1.4f || std::abs(dx + dy) <= p.t * 1.4f))
                 ? 1.0f
                 : 0.0f;
    case 8:  // ring
      return std::abs(std::sqrt(dx * dx + dy * dy) - 0.8f * p.r) <= p.t ? 1.0f : 0.0f;
    case 9:  // two horizontal bars
      return (adx <= p.r && std::abs(ady - 0.5f * p.r) <= p.t) ? 1.0f : 0.0f;
    default:
      return 0.0f;
  }
}

}  // namespace

Dataset synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.num_classes < 1 || cfg.num_classes > 10) {
    throw std::invalid_argument("synthetic dataset supports 1..10 classes");
  }
  if (cfg.per_class < 1) throw std::invalid_argument("synthetic dataset: per_class must be positive");
  if (cfg.image_size < 12) throw std::invalid_argument("synthetic dataset: image_size must be >= 12");
  if (cfg.channels < 1) throw std::invalid_argument("synthetic dataset: channels must be positive");

  const int S = cfg.image_size;
  const auto n = static_cast<Eigen::Index>(cfg.num_classes) * cfg.per_class;
  Dataset d;
  d.name = "synthetic-" + std::to_string(cfg.num_classes) + "x" + std::to_string(cfg.per_class) +
           "-s" + std::to_string(cfg.seed);
  d.image_shape = {cfg.channels, S, S};
  d.num_classes = cfg.num_classes;
  const Eigen::Index plane = static_cast<Eigen::Index>(S) * S;
  d.images.resize(plane * cfg.channels, n);
  d.labels.resize(static_cast<std::size_t>(n));

  // Interleave classes so that any prefix is roughly balanced.
  Rng rng(cfg.seed);
  const float mid = 0.5f * static_cast<float>(S - 1);
  const float jitter = 0.1f * static_cast<float>(S);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int cls = static_cast<int>(j % cfg.num_classes);
    d.labels[static_cast<std::size_t>(j)] = cls;
    Placement p;
    p.cx = mid + uniform_range(rng, -jitter, jitter);
    p.cy = mid + uniform_range(rng, -jitter, jitter);
    p.r = static_cast<float>(S) * uniform_range(rng, 0.22f, 0.32f);
    p.t = uniform_range(rng, 0.8f, 1.6f);
    const float intensity = uniform_range(rng, 0.6f, 1.0f);
    for (int c = 0; c < cfg.channels; ++c) {
      const float tint = c == 0 ? 1.0f : uniform_range(rng, 0.5f, 1.0f);
      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          const float ink = tint * intensity *
                            pattern_ink(cls, static_cast<float>(x), static_cast<float>(y), p);
          const float noise = 0.3f * uniform_unit(rng);
          d.images(c * plane + static_cast<Eigen::Index>(y) * S + x, j) =
              std::min(1.0f, ink + noise);
        }
      }
    }
  }
  return d;
}

Dataset manifest_split(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::out_of_range("manifest fraction must lie in (0, 1], got " +
                            std::to_string(fraction));
  }
  const std::size_t n = d.size();
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.num_classes));
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);

  // Largest-remainder apportionment of `target` across classes.
  std::vector<std::size_t> quota(by_class.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const double exact = fraction * static_cast<double>(by_class[c].size());
    quota[c] = std::min(by_class[c].size(), static_cast<std::size_t>(std::floor(exact)));
    assigned += quota[c];
    remainders.emplace_back(exact - static_cast<double>(quota[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < target && k < remainders.size(); ++k) {
    const auto c = remainders[k].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(target);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    shuffle(std::span<std::size_t>(members), rng);
    chosen.insert(chosen.end(), members.begin(),
                  members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  shuffle(std::span<std::size_t>(chosen), rng);
  return d.subset(chosen, d.name + "/manifest");
}

}  // namespace paramlock
