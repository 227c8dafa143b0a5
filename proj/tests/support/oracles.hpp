#pragma once

// Reference implementations used only by tests. Each one is written from
// first principles and shares no code with the library it checks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "paramlock/architecture.hpp"

namespace oracle {

// ---- GF(2^8) with the AES polynomial x^8 + x^4 + x^3 + x + 1 ----

inline std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
  std::uint8_t p = 0;
  for (int i = 0; i < 8; ++i) {
    if (b & 1) p ^= a;
    const bool carry = a & 0x80;
    a = static_cast<std::uint8_t>(a << 1);
    if (carry) a ^= 0x1B;
    b >>= 1;
  }
  return p;
}

// a^254 = a^-1 for a != 0, and maps 0 to 0.
inline std::uint8_t gf_inv(std::uint8_t a) {
  std::uint8_t result = 1;
  std::uint8_t base = a;
  for (int e = 254; e > 0; e >>= 1) {
    if (e & 1) result = gf_mul(result, base);
    base = gf_mul(base, base);
  }
  return a == 0 ? 0 : result;
}

inline std::uint8_t rotl8(std::uint8_t x, int s) {
  return static_cast<std::uint8_t>((x << s) | (x >> (8 - s)));
}

inline std::uint8_t sbox(std::uint8_t x) {
  const std::uint8_t b = gf_inv(x);
  return static_cast<std::uint8_t>(b ^ rotl8(b, 1) ^ rotl8(b, 2) ^ rotl8(b, 3) ^ rotl8(b, 4) ^
                                   0x63);
}

// Word-oriented AES-128 KeyExpansion, Nk = 4, Nr = 10.
inline std::array<std::uint8_t, 176> key_expansion(std::span<const std::uint8_t, 16> key) {
  using Word = std::array<std::uint8_t, 4>;
  std::array<Word, 44> w{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) w[i][j] = key[4 * i + j];
  }
  std::uint8_t rcon = 1;
  for (int i = 4; i < 44; ++i) {
    Word temp = w[i - 1];
    if (i % 4 == 0) {
      temp = {temp[1], temp[2], temp[3], temp[0]};
      for (auto& b : temp) b = sbox(b);
      temp[0] ^= rcon;
      rcon = gf_mul(rcon, 2);
    }
    for (int j = 0; j < 4; ++j) w[i][j] = w[i - 4][j] ^ temp[j];
  }
  std::array<std::uint8_t, 176> out{};
  for (int i = 0; i < 44; ++i) {
    for (int j = 0; j < 4; ++j) out[4 * i + j] = w[i][j];
  }
  return out;
}

// Chained expansion: every further 176-byte block expands the last 16 bytes
// of the previous one.
inline std::vector<std::uint8_t> keystream(std::span<const std::uint8_t, 16> key, std::size_t n) {
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 16> seed{};
  std::copy(key.begin(), key.end(), seed.begin());
  while (out.size() < n) {
    const auto block = key_expansion(seed);
    out.insert(out.end(), block.begin(), block.end());
    std::copy(block.end() - 16, block.end(), seed.begin());
  }
  out.resize(n);
  return out;
}

// ---- brute-force network evaluation in double ----

struct Volume {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Volume(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_ * h_ * w_)) {}
  double& at(int ch, int y, int x) { return v[static_cast<std::size_t>((ch * h + y) * w + x)]; }
  double at(int ch, int y, int x) const {
    return v[static_cast<std::size_t>((ch * h + y) * w + x)];
  }
};

inline double relu(double x) { return x < 0 ? 0.0 : x; }

// Which side of every ReLU kink and which maxpool tap won. Finite
// differences are only a valid derivative while this stays fixed.
using Pattern = std::vector<int>;

inline double activate(double acc, paramlock::Activation a, Pattern* pattern) {
  if (a != paramlock::Activation::kRelu) return acc;
  if (pattern != nullptr) pattern->push_back(acc > 0 ? 1 : 0);
  return relu(acc);
}

inline Volume conv(const Volume& in, const paramlock::Conv2D& layer, std::span<const double> wt,
                   std::span<const double> bias, Pattern* pattern = nullptr) {
  int ph = 0, pw = 0;
  if (layer.padding.kind == paramlock::Padding::Kind::kSame) {
    ph = (layer.kernel_h - 1) / 2;
    pw = (layer.kernel_w - 1) / 2;
  } else if (layer.padding.kind == paramlock::Padding::Kind::kExplicit) {
    ph = pw = layer.padding.amount;
  }
  const int oh = (in.h + 2 * ph - layer.kernel_h) / layer.stride + 1;
  const int ow = (in.w + 2 * pw - layer.kernel_w) / layer.stride + 1;
  Volume out(layer.out_channels, oh, ow);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int c = 0; c < in.c; ++c) {
          for (int ky = 0; ky < layer.kernel_h; ++ky) {
            for (int kx = 0; kx < layer.kernel_w; ++kx) {
              const int iy = y * layer.stride + ky - ph;
              const int ix = x * layer.stride + kx - pw;
              if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
              const auto wi = static_cast<std::size_t>(
                  ((o * in.c + c) * layer.kernel_h + ky) * layer.kernel_w + kx);
              acc += wt[wi] * in.at(c, iy, ix);
            }
          }
        }
        out.at(o, y, x) = activate(acc, layer.activation, pattern);
      }
    }
  }
  return out;
}

inline Volume maxpool(const Volume& in, const paramlock::MaxPool2D& layer,
                      Pattern* pattern = nullptr) {
  const int oh = (in.h - layer.pool_h) / layer.stride + 1;
  const int ow = (in.w - layer.pool_w) / layer.stride + 1;
  Volume out(in.c, oh, ow);
  for (int c = 0; c < in.c; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        int winner = 0;
        for (int py = 0; py < layer.pool_h; ++py) {
          for (int px = 0; px < layer.pool_w; ++px) {
            const double v = in.at(c, y * layer.stride + py, x * layer.stride + px);
            if (v > best) {
              best = v;
              winner = py * layer.pool_w + px;
            }
          }
        }
        if (pattern != nullptr) pattern->push_back(winner);
        out.at(c, y, x) = best;
      }
    }
  }
  return out;
}

inline Volume dense(const Volume& in, const paramlock::Dense& layer, std::span<const double> wt,
                    std::span<const double> bias, Pattern* pattern = nullptr) {
  const auto n_in = in.v.size();
  Volume out(layer.out_features, 1, 1);
  for (int o = 0; o < layer.out_features; ++o) {
    double acc = bias[static_cast<std::size_t>(o)];
    for (std::size_t i = 0; i < n_in; ++i) {
      acc += wt[static_cast<std::size_t>(o) * n_in + i] * in.v[i];
    }
    out.v[static_cast<std::size_t>(o)] = activate(acc, layer.activation, pattern);
  }
  return out;
}

/// `params` in canonical order (weight then bias for every conv and dense
/// layer, in layer order).
inline std::vector<double> forward(const paramlock::Architecture& arch,
                                   const std::vector<std::vector<double>>& params,
                                   std::span<const double> input, Pattern* pattern = nullptr) {
  const auto& s = arch.input_shape();
  Volume cur(s.channels, s.height, s.width);
  std::copy(input.begin(), input.end(), cur.v.begin());
  std::size_t t = 0;
  for (const auto& layer : arch.layers()) {
    if (const auto* c = std::get_if<paramlock::Conv2D>(&layer)) {
      cur = conv(cur, *c, params[t], params[t + 1], pattern);
      t += 2;
    } else if (const auto* p = std::get_if<paramlock::MaxPool2D>(&layer)) {
      cur = maxpool(cur, *p, pattern);
    } else if (const auto* d = std::get_if<paramlock::Dense>(&layer)) {
      cur = dense(cur, *d, params[t], params[t + 1], pattern);
      t += 2;
    } else {
      Volume flat(static_cast<int>(cur.v.size()), 1, 1);
      flat.v = cur.v;
      cur = flat;
    }
  }
  return cur.v;
}

/// Concatenated activation pattern over every column of `x`.
inline Pattern batch_pattern(const paramlock::Architecture& arch,
                             const std::vector<std::vector<double>>& params,
                             const Eigen::MatrixXd& x) {
  Pattern pattern;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXd col = x.col(j);
    forward(arch, params, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
            &pattern);
  }
  return pattern;
}

}  // namespace oracle
