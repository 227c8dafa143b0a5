#pragma once

// Layer kernels as free functions over Eigen dense types, templated on the
// scalar so the same code runs in float (production) and double (gradient
// oracles). Batches are stored one sample per column, each column holding a
// C x H x W activation flattened row-major (channel, then row, then column).
//
// Non-finite values are never masked: NaN passes through ReLU and wins every
// max-pool window it appears in.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "paramlock/architecture.hpp"

namespace paramlock::nn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMajorMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  Shape3 in;
  Shape3 out;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int pad_h = 0;
  int pad_w = 0;

  static ConvGeometry of(const Conv2D& conv, const Shape3& in, const Shape3& out) {
    const auto [ph, pw] = resolve_padding(conv);
    return {in, out, conv.kernel_h, conv.kernel_w, conv.stride, ph, pw};
  }
  Eigen::Index patch_size() const {
    return static_cast<Eigen::Index>(in.channels) * kernel_h * kernel_w;
  }
  Eigen::Index positions() const { return static_cast<Eigen::Index>(out.height) * out.width; }
};

/// Unfolds one image into a (positions x patch_size) matrix whose column
/// order (channel, kernel row, kernel col) matches the conv weight layout
/// [out][in][kh][kw]. Out-of-bounds taps read as zero.
template <typename Scalar>
void im2col(const ConvGeometry& g, const Scalar* image, MatrixX<Scalar>& cols) {
  cols.resize(g.positions(), g.patch_size());
  const int H = g.in.height, W = g.in.width;
  for (int c = 0; c < g.in.channels; ++c) {
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * g.kernel_h + ki) * g.kernel_w + kj;
        Scalar* dst = cols.col(col).data();
        for (int oy = 0; oy < g.out.height; ++oy) {
          const int y = oy * g.stride + ki - g.pad_h;
          for (int ox = 0; ox < g.out.width; ++ox) {
            const int x = ox * g.stride + kj - g.pad_w;
            const bool inside = y >= 0 && y < H && x >= 0 && x < W;
            *dst++ = inside ? image[(static_cast<std::size_t>(c) * H + y) * W + x] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch gradients back onto the image.
template <typename Scalar>
void col2im_accumulate(const ConvGeometry& g, const MatrixX<Scalar>& dcols, Scalar* dimage) {
  const int H = g.in.height, W = g.in.width;
  for (int c = 0; c < g.in.channels; ++c) {
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        const Eigen::Index col = (static_cast<Eigen::Index>(c) * g.kernel_h + ki) * g.kernel_w + kj;
        const Scalar* src = dcols.col(col).data();
        for (int oy = 0; oy < g.out.height; ++oy) {
          const int y = oy * g.stride + ki - g.pad_h;
          for (int ox = 0; ox < g.out.width; ++ox, ++src) {
            const int x = ox * g.stride + kj - g.pad_w;
            if (y >= 0 && y < H && x >= 0 && x < W) {
              dimage[(static_cast<std::size_t>(c) * H + y) * W + x] += *src;
            }
          }
        }
      }
    }
  }
}

/// `weight` is [out][in][kh][kw] row-major, which as a column-major
/// (patch_size x out) matrix is exactly W^T; the product cols * W^T is then
/// laid out channel-major, i.e. already in C x H x W order.
template <typename Scalar>
void conv2d_forward(const ConvGeometry& g, std::span<const Scalar> weight,
                    std::span<const Scalar> bias, const MatrixX<Scalar>& in,
                    MatrixX<Scalar>& out) {
  const Eigen::Index K = g.patch_size(), P = g.positions(), C = g.out.channels;
  Eigen::Map<const MatrixX<Scalar>> wt(weight.data(), K, C);
  Eigen::Map<const VectorX<Scalar>> b(bias.data(), C);
  out.resize(P * C, in.cols());
  MatrixX<Scalar> cols;
  for (Eigen::Index n = 0; n < in.cols(); ++n) {
    im2col(g, in.col(n).data(), cols);
    Eigen::Map<MatrixX<Scalar>> y(out.col(n).data(), P, C);
    y.noalias() = cols * wt;
    y.rowwise() += b.transpose();
  }
}

/// Accumulates into dweight/dbias; overwrites din (when non-null).
template <typename Scalar>
void conv2d_backward(const ConvGeometry& g, std::span<const Scalar> weight,
                     const MatrixX<Scalar>& in, const MatrixX<Scalar>& dout,
                     std::span<Scalar> dweight, std::span<Scalar> dbias, MatrixX<Scalar>* din) {
  const Eigen::Index K = g.patch_size(), P = g.positions(), C = g.out.channels;
  Eigen::Map<const MatrixX<Scalar>> wt(weight.data(), K, C);
  Eigen::Map<MatrixX<Scalar>> dwt(dweight.data(), K, C);
  Eigen::Map<VectorX<Scalar>> db(dbias.data(), C);
  if (din != nullptr) din->setZero(static_cast<Eigen::Index>(g.in.size()), in.cols());
  MatrixX<Scalar> cols, dcols;
  for (Eigen::Index n = 0; n < in.cols(); ++n) {
    Eigen::Map<const MatrixX<Scalar>> dy(dout.col(n).data(), P, C);
    im2col(g, in.col(n).data(), cols);
    dwt.noalias() += cols.transpose() * dy;
    db += dy.colwise().sum().transpose();
    if (din != nullptr) {
      dcols.noalias() = dy * wt.transpose();
      col2im_accumulate(g, dcols, din->col(n).data());
    }
  }
}

/// `argmax` receives, per output element, the flat input index it came from.
template <typename Scalar>
void maxpool_forward(const MaxPool2D& pool, const Shape3& in_shape, const Shape3& out_shape,
                     const MatrixX<Scalar>& in, MatrixX<Scalar>& out,
                     std::vector<Eigen::Index>* argmax) {
  const Eigen::Index n_out = static_cast<Eigen::Index>(out_shape.size());
  out.resize(n_out, in.cols());
  if (argmax != nullptr) argmax->assign(static_cast<std::size_t>(n_out * in.cols()), 0);
  const int H = in_shape.height, W = in_shape.width;
  for (Eigen::Index n = 0; n < in.cols(); ++n) {
    const Scalar* src = in.col(n).data();
    Eigen::Index o = 0;
    for (int c = 0; c < out_shape.channels; ++c) {
      for (int oy = 0; oy < out_shape.height; ++oy) {
        for (int ox = 0; ox < out_shape.width; ++ox, ++o) {
          Eigen::Index best_idx = (static_cast<Eigen::Index>(c) * H + oy * pool.stride) * W +
                                  ox * pool.stride;
          Scalar best = src[best_idx];
          for (int i = 0; i < pool.pool_h && !std::isnan(best); ++i) {
            for (int j = 0; j < pool.pool_w; ++j) {
              const Eigen::Index idx =
                  (static_cast<Eigen::Index>(c) * H + oy * pool.stride + i) * W +
                  ox * pool.stride + j;
              const Scalar v = src[idx];
              if (v > best || std::isnan(v)) {
                best = v;
                best_idx = idx;
                if (std::isnan(v)) break;
              }
            }
          }
          out(o, n) = best;
          if (argmax != nullptr) (*argmax)[static_cast<std::size_t>(n * n_out + o)] = best_idx;
        }
      }
    }
  }
}

template <typename Scalar>
void maxpool_backward(const Shape3& in_shape, const std::vector<Eigen::Index>& argmax,
                      const MatrixX<Scalar>& dout, MatrixX<Scalar>& din) {
  din.setZero(static_cast<Eigen::Index>(in_shape.size()), dout.cols());
  const Eigen::Index n_out = dout.rows();
  for (Eigen::Index n = 0; n < dout.cols(); ++n) {
    for (Eigen::Index o = 0; o < n_out; ++o) {
      din(argmax[static_cast<std::size_t>(n * n_out + o)], n) += dout(o, n);
    }
  }
}

/// `weight` is [out][in] row-major.
template <typename Scalar>
void dense_forward(std::span<const Scalar> weight, std::span<const Scalar> bias,
                   Eigen::Index out_features, const MatrixX<Scalar>& in, MatrixX<Scalar>& out) {
  Eigen::Map<const RowMajorMatrixX<Scalar>> w(weight.data(), out_features, in.rows());
  Eigen::Map<const VectorX<Scalar>> b(bias.data(), out_features);
  out.noalias() = w * in;
  out.colwise() += b;
}

template <typename Scalar>
void dense_backward(std::span<const Scalar> weight, const MatrixX<Scalar>& in,
                    const MatrixX<Scalar>& dout, std::span<Scalar> dweight,
                    std::span<Scalar> dbias, MatrixX<Scalar>* din) {
  const Eigen::Index out_features = dout.rows();
  Eigen::Map<const RowMajorMatrixX<Scalar>> w(weight.data(), out_features, in.rows());
  Eigen::Map<RowMajorMatrixX<Scalar>> dw(dweight.data(), out_features, in.rows());
  Eigen::Map<VectorX<Scalar>> db(dbias.data(), out_features);
  dw.noalias() += dout * in.transpose();
  db += dout.rowwise().sum();
  if (din != nullptr) din->noalias() = w.transpose() * dout;
}

/// x < 0 ? 0 : x, so NaN survives.
template <typename Scalar>
void relu_inplace(MatrixX<Scalar>& x) {
  x = (x.array() < Scalar(0)).select(Scalar(0), x);
}

/// Masks `grad` by the ReLU derivative, evaluated from the layer output.
template <typename Scalar>
void relu_backward(const MatrixX<Scalar>& out, MatrixX<Scalar>& grad) {
  grad = (out.array() > Scalar(0)).select(grad, Scalar(0));
}

}  // namespace paramlock::nn
