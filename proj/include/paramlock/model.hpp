#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "paramlock/architecture.hpp"

namespace paramlock {

struct WeightTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;  // row-major

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

class MalformedModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Plaintext model: architecture plus parameters in canonical order
/// (layer order, weight before bias, row-major elements).
class Model {
 public:
  /// Throws MalformedModel unless `tensors` matches arch.parameter_layout()
  /// in name, dims and element count.
  Model(Architecture arch, std::vector<WeightTensor> tensors);

  const Architecture& arch() const { return arch_; }
  const std::vector<WeightTensor>& tensors() const { return tensors_; }
  std::vector<WeightTensor>& mutable_tensors() { return tensors_; }
  std::size_t param_count() const { return arch_.parameter_count(); }

  std::vector<std::span<const float>> parameter_spans() const;

  /// Bitwise comparison (NaN payloads included).
  bool bit_equal(const Model& other) const;

 private:
  Architecture arch_;
  std::vector<WeightTensor> tensors_;
};

/// Checks that `tensors` matches the layout of `arch`.
void validate_tensors(const Architecture& arch, const std::vector<WeightTensor>& tensors);

/// Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero. Deterministic
/// per seed.
Model build_model(const Architecture& arch, std::uint64_t seed);

/// All-zero parameters.
Model zero_model(const Architecture& arch);

}  // namespace paramlock
