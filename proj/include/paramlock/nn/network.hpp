#pragma once

#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "paramlock/architecture.hpp"
#include "paramlock/nn/layers.hpp"

namespace paramlock {

/// Result of a single-input forward pass.
struct Prediction {
  std::vector<float> logits;
  std::size_t class_index = 0;
  bool nan_flag = false;  // any logit non-finite
};

/// Index of the largest finite logit, lowest index on ties, 0 when no logit
/// is finite. Throws std::invalid_argument on an empty vector.
std::size_t predict_class(std::span<const float> logits);
std::size_t predict_class(std::span<const double> logits);

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything that exposes an architecture and canonical-order parameters.
template <typename Source>
concept ParameterSource = requires(const Source& s) {
  { s.arch() } -> std::convertible_to<const Architecture&>;
  { s.parameter_spans() } -> std::same_as<std::vector<std::span<const float>>>;
};

namespace nn {

template <typename Scalar>
using ParamSpans = std::span<const std::span<const Scalar>>;

/// Index of each layer's weight tensor in the parameter layout, or -1.
inline std::vector<std::ptrdiff_t> weight_tensor_index(const Architecture& arch) {
  std::vector<std::ptrdiff_t> idx(arch.layers().size(), -1);
  const auto layout = arch.parameter_layout();
  for (std::size_t t = 0; t < layout.size(); ++t) {
    if (!layout[t].is_bias) idx[layout[t].layer] = static_cast<std::ptrdiff_t>(t);
  }
  return idx;
}

inline void check_params(const Architecture& arch, std::size_t tensor_count) {
  if (tensor_count != arch.parameter_layout().size()) {
    throw ShapeMismatch("parameter tensor count does not match the architecture");
  }
}

inline void check_input(const Architecture& arch, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != arch.input_shape().size()) {
    throw ShapeMismatch("input has " + std::to_string(rows) + " values, architecture expects " +
                        std::to_string(arch.input_shape().size()));
  }
}

/// Applies layer `i` to `in`, writing `out`. Activations are applied.
template <typename Scalar>
void apply_layer(const Architecture& arch, std::size_t i, ParamSpans<Scalar> params,
                 std::ptrdiff_t weight_index, const MatrixX<Scalar>& in, MatrixX<Scalar>& out,
                 std::vector<Eigen::Index>* argmax) {
  const auto w = static_cast<std::size_t>(weight_index);
  const Shape3& in_shape = arch.shape_before(i);
  const Shape3& out_shape = arch.shape_before(i + 1);
  const auto& layer = arch.layers()[i];
  if (const auto* conv = std::get_if<Conv2D>(&layer)) {
    const auto g = ConvGeometry::of(*conv, in_shape, out_shape);
    conv2d_forward<Scalar>(g, params[w], params[w + 1], in, out);
    if (conv->activation == Activation::kRelu) relu_inplace(out);
  } else if (const auto* pool = std::get_if<MaxPool2D>(&layer)) {
    maxpool_forward(*pool, in_shape, out_shape, in, out, argmax);
  } else if (const auto* dense = std::get_if<Dense>(&layer)) {
    dense_forward<Scalar>(params[w], params[w + 1], dense->out_features, in, out);
    if (dense->activation == Activation::kRelu) relu_inplace(out);
  } else {
    out = in;
  }
}

/// Logits (num_classes x batch) for a batch of inputs (features x batch).
template <typename Scalar>
MatrixX<Scalar> forward_batch(const Architecture& arch, ParamSpans<Scalar> params,
                              const MatrixX<Scalar>& inputs) {
  check_params(arch, params.size());
  check_input(arch, inputs.rows());
  const auto widx = weight_tensor_index(arch);
  MatrixX<Scalar> a = inputs, b;
  for (std::size_t i = 0; i < arch.layers().size(); ++i) {
    apply_layer(arch, i, params, widx[i], a, b, nullptr);
    a.swap(b);
  }
  return a;
}

/// Loss, accuracy count and a finiteness flag for one mini-batch.
template <typename Scalar>
struct BatchLoss {
  Scalar loss = 0;
  std::size_t correct = 0;
  bool finite = true;
};

/// Mean softmax cross-entropy over the batch, plus d(loss)/d(logits).
template <typename Scalar>
BatchLoss<Scalar> softmax_cross_entropy(const MatrixX<Scalar>& logits,
                                        std::span<const int> labels, MatrixX<Scalar>& dlogits) {
  const Eigen::Index n = logits.cols();
  dlogits.resize(logits.rows(), n);
  BatchLoss<Scalar> result;
  Scalar total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto col = logits.col(j);
    const Scalar m = col.maxCoeff();
    VectorX<Scalar> e = (col.array() - m).exp().matrix();
    const Scalar z = e.sum();
    const int y = labels[static_cast<std::size_t>(j)];
    total += std::log(z) - (col(y) - m);
    dlogits.col(j) = e / z;
    dlogits(y, j) -= Scalar(1);
    if (predict_class(std::span<const Scalar>(col.data(), static_cast<std::size_t>(col.size()))) ==
        static_cast<std::size_t>(y)) {
      ++result.correct;
    }
  }
  dlogits /= static_cast<Scalar>(n);
  result.loss = total / static_cast<Scalar>(n);
  result.finite = std::isfinite(result.loss);
  return result;
}

/// Forward + backward over one batch. `grads` is resized to the parameter
/// layout and overwritten with d(mean loss)/d(param).
template <typename Scalar>
BatchLoss<Scalar> loss_and_gradients(const Architecture& arch, ParamSpans<Scalar> params,
                                     const MatrixX<Scalar>& inputs, std::span<const int> labels,
                                     std::vector<std::vector<Scalar>>& grads) {
  check_params(arch, params.size());
  check_input(arch, inputs.rows());
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
    throw ShapeMismatch("batch has a different number of inputs and labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= arch.num_classes()) throw std::invalid_argument("label out of range");
  }
  const auto layout = arch.parameter_layout();
  grads.resize(layout.size());
  for (std::size_t t = 0; t < layout.size(); ++t) grads[t].assign(layout[t].size(), Scalar(0));

  const std::size_t L = arch.layers().size();
  const auto widx = weight_tensor_index(arch);
  std::vector<MatrixX<Scalar>> acts(L + 1);
  std::vector<std::vector<Eigen::Index>> argmax(L);
  acts[0] = inputs;
  for (std::size_t i = 0; i < L; ++i) {
    apply_layer(arch, i, params, widx[i], acts[i], acts[i + 1], &argmax[i]);
  }

  MatrixX<Scalar> delta, next;
  const auto loss = softmax_cross_entropy(acts[L], labels, delta);

  for (std::size_t i = L; i-- > 0;) {
    const auto& layer = arch.layers()[i];
    const bool need_input_grad = i > 0;
    if (const auto* conv = std::get_if<Conv2D>(&layer)) {
      if (conv->activation == Activation::kRelu) relu_backward(acts[i + 1], delta);
      const auto g = ConvGeometry::of(*conv, arch.shape_before(i), arch.shape_before(i + 1));
      const auto w = static_cast<std::size_t>(widx[i]);
      conv2d_backward<Scalar>(g, params[w], acts[i], delta, grads[w], grads[w + 1],
                              need_input_grad ? &next : nullptr);
    } else if (std::holds_alternative<MaxPool2D>(layer)) {
      maxpool_backward(arch.shape_before(i), argmax[i], delta, next);
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      if (dense->activation == Activation::kRelu) relu_backward(acts[i + 1], delta);
      const auto w = static_cast<std::size_t>(widx[i]);
      dense_backward<Scalar>(params[w], acts[i], delta, grads[w], grads[w + 1],
                             need_input_grad ? &next : nullptr);
    } else {
      next = delta;
    }
    if (need_input_grad) delta.swap(next);
  }
  return loss;
}

}  // namespace nn

template <ParameterSource Source>
Eigen::MatrixXf forward_logits(const Source& model, const Eigen::MatrixXf& inputs) {
  const auto spans = model.parameter_spans();
  return nn::forward_batch<float>(model.arch(), spans, inputs);
}

/// Single-input inference. Throws ShapeMismatch if the input size differs
/// from the architecture's input shape.
template <ParameterSource Source>
Prediction forward(const Source& model, std::span<const float> input) {
  Eigen::Map<const Eigen::MatrixXf> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const Eigen::MatrixXf logits = forward_logits(model, Eigen::MatrixXf(x));
  Prediction p;
  p.logits.assign(logits.data(), logits.data() + logits.size());
  p.class_index = predict_class(p.logits);
  for (float v : p.logits) p.nan_flag |= !std::isfinite(v);
  return p;
}

}  // namespace paramlock
