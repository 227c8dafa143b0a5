#include "paramlock/model.hpp"

#include <cmath>
#include <cstring>

#include "paramlock/random.hpp"

namespace paramlock {

void validate_tensors(const Architecture& arch, const std::vector<WeightTensor>& tensors) {
  const auto layout = arch.parameter_layout();
  if (tensors.size() != layout.size()) {
    throw MalformedModel("expected " + std::to_string(layout.size()) + " tensors, got " +
                         std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = tensors[i];
    const auto& spec = layout[i];
    if (t.name != spec.name) {
      throw MalformedModel("tensor " + std::to_string(i) + " is '" + t.name + "', expected '" +
                           spec.name + "'");
    }
    if (t.dims != spec.dims) throw MalformedModel("tensor '" + t.name + "' has the wrong shape");
    if (t.values.size() != spec.size()) {
      throw MalformedModel("tensor '" + t.name + "' holds " + std::to_string(t.values.size()) +
                           " values, shape needs " + std::to_string(spec.size()));
    }
  }
}

Model::Model(Architecture arch, std::vector<WeightTensor> tensors)
    : arch_(std::move(arch)), tensors_(std::move(tensors)) {
  validate_tensors(arch_, tensors_);
}

std::vector<std::span<const float>> Model::parameter_spans() const {
  std::vector<std::span<const float>> spans;
  spans.reserve(tensors_.size());
  for (const auto& t : tensors_) spans.emplace_back(t.values);
  return spans;
}

bool Model::bit_equal(const Model& other) const {
  if (!(arch_ == other.arch_) || tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.dims != b.dims || a.values.size() != b.values.size()) return false;
    if (!a.values.empty() &&
        std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

Model zero_model(const Architecture& arch) {
  std::vector<WeightTensor> tensors;
  for (const auto& spec : arch.parameter_layout()) {
    tensors.push_back({spec.name, spec.dims, std::vector<float>(spec.size(), 0.0f)});
  }
  return Model(arch, std::move(tensors));
}

Model build_model(const Architecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  Model m = zero_model(arch);
  for (auto& t : m.mutable_tensors()) {
    if (t.dims.size() == 1) continue;  // bias
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < t.dims.size(); ++d) fan_in *= t.dims[d];
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    for (auto& v : t.values) v = uniform_range(rng, -bound, bound);
  }
  return m;
}

}  // namespace paramlock
