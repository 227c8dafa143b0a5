#pragma once

// Network structure descriptors and their line-oriented text grammar.
//
//   input 1x28x28
//   conv 16 5x5 stride 1 pad valid relu
//   maxpool 2x2 stride 2
//   flatten
//   dense 100 relu
//   dense 10 linear
//
// `input` must come first. Optional conv fields default to `stride 1`,
// `pad valid` and `relu`; maxpool stride defaults to the pool height; dense
// activation defaults to `relu`. The final layer must be `dense <n> linear`,
// and <n> is the class count. `#` starts a comment.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace paramlock {

enum class Activation { kLinear, kRelu };

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct Padding {
  enum class Kind { kValid, kSame, kExplicit };
  Kind kind = Kind::kValid;
  int amount = 0;  // only for kExplicit
  friend bool operator==(const Padding&, const Padding&) = default;
};

struct Conv2D {
  int out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  Padding padding;
  Activation activation = Activation::kRelu;
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

struct MaxPool2D {
  int pool_h = 0;
  int pool_w = 0;
  int stride = 0;
  friend bool operator==(const MaxPool2D&, const MaxPool2D&) = default;
};

struct Dense {
  int out_features = 0;
  Activation activation = Activation::kRelu;
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

using LayerSpec = std::variant<Conv2D, MaxPool2D, Dense, Flatten>;

/// One trainable tensor in canonical order.
struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::size_t layer = 0;
  bool is_bias = false;
  std::size_t offset = 0;  // in scalars, from the start of the flat parameter vector

  std::size_t size() const;
};

class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Grammar errors carry the 1-based line and the offending token.
class ArchParseError : public ArchitectureError {
 public:
  ArchParseError(std::size_t line, std::string token, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  std::size_t line_;
  std::string token_;
};

/// Shape-checked at construction; immutable afterwards.
class Architecture {
 public:
  Architecture(Shape3 input_shape, std::vector<LayerSpec> layers);

  static Architecture parse(std::string_view text);
  /// Canonical text form; parse(to_text()) == *this.
  std::string to_text() const;

  const Shape3& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// Shape entering layer i; index layers().size() is the output shape.
  const Shape3& shape_before(std::size_t layer) const { return shapes_[layer]; }
  int num_classes() const { return shapes_.back().channels; }

  std::span<const TensorSpec> parameter_layout() const { return layout_; }
  std::size_t parameter_count() const { return parameter_count_; }

  friend bool operator==(const Architecture& a, const Architecture& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  Shape3 input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape3> shapes_;
  std::vector<TensorSpec> layout_;
  std::size_t parameter_count_ = 0;
};

/// Resolved (pad_h, pad_w) for a conv layer.
std::pair<int, int> resolve_padding(const Conv2D& conv);

// Reference configurations with the parameter counts of the three benchmark
// models: 86,166 (MNIST), 180,438 (Fashion-MNIST), 1,250,858 (CIFAR-10).
Architecture mnist_architecture();
Architecture fashion_mnist_architecture();
Architecture cifar10_architecture();

}  // namespace paramlock
