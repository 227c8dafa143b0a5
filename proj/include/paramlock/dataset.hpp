#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "paramlock/architecture.hpp"

namespace paramlock {

/// Labelled images, one sample per column of `images` (C x H x W flattened
/// row-major), pixel values in [0, 1].
struct Dataset {
  std::string name;
  Shape3 image_shape;
  int num_classes = 0;
  Eigen::MatrixXf images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const float> image(std::size_t i) const {
    return {images.col(static_cast<Eigen::Index>(i)).data(), image_shape.size()};
  }
  /// Samples at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices, std::string new_name) const;
  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { kBadMagic, kUnsupportedType, kSizeMismatch, kTruncated };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;  // row-major
};

/// Parses an IDX file (two zero bytes, type code, rank, big-endian u32 dims,
/// payload). Only type code 0x08 (unsigned byte) is supported. Missing
/// payload bytes raise kTruncated; extra trailing bytes raise kSizeMismatch.
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor read_idx_file(const std::filesystem::path& path);

/// Combines an N x H x W image file and an N label file; pixels scaled by 1/255.
Dataset dataset_from_idx(const IdxTensor& images, const IdxTensor& labels, int num_classes,
                         std::string name);

enum class Split { kTrain, kTest };

/// Loads MNIST-family files from `dir` (train-* or t10k-* images/labels,
/// optionally with a .gz suffix removed beforehand). Never downloads.
Dataset load_mnist_dir(const std::filesystem::path& dir, Split split);

struct SyntheticConfig {
  int num_classes = 10;
  int per_class = 100;
  int image_size = 28;
  std::uint64_t seed = 1;
  /// Channels beyond the first repeat the pattern with their own tint and noise.
  int channels = 1;
};

/// Balanced class-conditional geometric patterns (bars, diagonals, boxes,
/// disks, crosses, rings ...) with random placement and additive noise.
/// Supports 1..10 classes and image_size >= 12. Deterministic per seed.
Dataset synthetic_dataset(const SyntheticConfig& cfg);

/// Seeded stratified subsample of ceil(fraction * N) samples, returned in
/// shuffled order. Throws std::out_of_range unless 0 < fraction <= 1.
Dataset manifest_split(const Dataset& d, double fraction, std::uint64_t seed);

}  // namespace paramlock
