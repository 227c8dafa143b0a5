#include "paramlock/nn/network.hpp"

#include <cmath>

namespace paramlock {
namespace {

template <typename Scalar>
std::size_t argmax_finite(std::span<const Scalar> logits) {
  if (logits.empty()) throw std::invalid_argument("predict_class: empty logit vector");
  std::size_t best = 0;
  bool found = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) continue;
    if (!found || logits[i] > logits[best]) {
      best = i;
      found = true;
    }
  }
  return found ? best : 0;
}

}  // namespace

std::size_t predict_class(std::span<const float> logits) { return argmax_finite(logits); }
std::size_t predict_class(std::span<const double> logits) { return argmax_finite(logits); }

}  // namespace paramlock
