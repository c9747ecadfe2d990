// Copyright 2026 The blvnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// conv2d as im2col + a GEMM with double accumulators. Frames are processed in
// chunks so the column buffer stays bounded for full-resolution inputs.

#include <algorithm>
#include <vector>

#include "blvnet/ops.hpp"
#include "blvnet/parallel.hpp"

namespace blvnet::ops {
namespace {

constexpr std::int64_t kColumnBudget = std::int64_t{1} << 22;

struct ConvGeom {
  std::int64_t n, c, h, w;
  std::int64_t o, k, stride, pad;
  std::int64_t ho, wo;

  std::int64_t K() const { return c * k * k; }
  std::int64_t P() const { return ho * wo; }
  std::int64_t frames_per_chunk() const { return std::max<std::int64_t>(1, kColumnBudget / std::max<std::int64_t>(1, K() * P())); }
};

// col is K × M with M = (n1 - n0) * P, rows ordered (c, ki, kj).
template <typename T>
void im2col(const T* in, const ConvGeom& g, std::int64_t n0, std::int64_t n1, T* col) {
  const std::int64_t M = (n1 - n0) * g.P();
  for (std::int64_t c = 0; c < g.c; ++c) {
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        T* dst = col + ((c * g.k + ki) * g.k + kj) * M;
        for (std::int64_t n = n0; n < n1; ++n) {
          const T* plane = in + (n * g.c + c) * g.h * g.w;
          for (std::int64_t oh = 0; oh < g.ho; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) {
              std::fill(dst, dst + g.wo, T(0));
              dst += g.wo;
              continue;
            }
            const T* src = plane + ih * g.w;
            for (std::int64_t ow = 0; ow < g.wo; ++ow) {
              const std::int64_t iw = ow * g.stride - g.pad + kj;
              *dst++ = (iw >= 0 && iw < g.w) ? src[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adds a K × M column gradient back onto the chunk's input gradient.
void col2im_add(const double* dcol, const ConvGeom& g, std::int64_t n0, std::int64_t n1, double* dx_chunk) {
  const std::int64_t M = (n1 - n0) * g.P();
  for (std::int64_t c = 0; c < g.c; ++c) {
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const double* src = dcol + ((c * g.k + ki) * g.k + kj) * M;
        for (std::int64_t n = n0; n < n1; ++n) {
          double* plane = dx_chunk + ((n - n0) * g.c + c) * g.h * g.w;
          for (std::int64_t oh = 0; oh < g.ho; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) {
              src += g.wo;
              continue;
            }
            for (std::int64_t ow = 0; ow < g.wo; ++ow, ++src) {
              const std::int64_t iw = ow * g.stride - g.pad + kj;
              if (iw >= 0 && iw < g.w) plane[ih * g.w + iw] += *src;
            }
          }
        }
      }
    }
  }
}

constexpr std::int64_t kTile = 256;
constexpr std::int64_t kLanes = 8;

// out[o, m] for a block of up to four output channels over one column tile.
template <typename T>
void forward_block(const T* weight, std::int64_t K, std::int64_t o, std::int64_t nb, const T* col, std::int64_t M,
                   std::int64_t m0, std::int64_t len, double (*acc)[kTile]) {
  const T* w0 = weight + o * K;
  const T* w1 = nb > 1 ? w0 + K : w0;
  const T* w2 = nb > 2 ? w0 + 2 * K : w0;
  const T* w3 = nb > 3 ? w0 + 3 * K : w0;
  for (std::int64_t kk = 0; kk < K; ++kk) {
    const double a = w0[kk], b = w1[kk], c = w2[kk], d = w3[kk];
    const T* crow = col + kk * M + m0;
    for (std::int64_t m = 0; m < len; ++m) {
      const double x = crow[m];
      acc[0][m] += a * x;
      acc[1][m] += b * x;
      acc[2][m] += c * x;
      acc[3][m] += d * x;
    }
  }
}

template <typename T>
void conv_forward(const ConvGeom& g, const T* in, const T* weight, const T* bias, T* out) {
  const std::int64_t K = g.K(), P = g.P();
  const std::int64_t chunk = g.frames_per_chunk();
  std::vector<T> col;
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::int64_t n1 = std::min(g.n, n0 + chunk);
    const std::int64_t M = (n1 - n0) * P;
    col.resize(static_cast<std::size_t>(K * M));
    im2col(in, g, n0, n1, col.data());
    const std::int64_t blocks = (g.o + 3) / 4;
    parallel_for(blocks, [&](std::int64_t b0, std::int64_t b1) {
      double acc[4][kTile];
      for (std::int64_t blk = b0; blk < b1; ++blk) {
        const std::int64_t o = blk * 4, nb = std::min<std::int64_t>(4, g.o - o);
        for (std::int64_t m0 = 0; m0 < M; m0 += kTile) {
          const std::int64_t len = std::min(kTile, M - m0);
          for (std::int64_t j = 0; j < 4; ++j) {
            const double init = bias && j < nb ? static_cast<double>(bias[o + j]) : 0.0;
            std::fill(acc[j], acc[j] + len, init);
          }
          forward_block(weight, K, o, nb, col.data(), M, m0, len, acc);
          for (std::int64_t j = 0; j < nb; ++j) {
            for (std::int64_t m = 0; m < len; ++m) {
              const std::int64_t mm = m0 + m, n = n0 + mm / P, p = mm % P;
              out[(n * g.o + o + j) * P + p] = static_cast<T>(acc[j][m]);
            }
          }
        }
      }
    });
  }
}

// Dot product with kLanes independent partial sums combined in a fixed order.
template <typename T>
double dot(const double* a, const T* b, std::int64_t n) {
  double part[kLanes] = {};
  std::int64_t m = 0;
  for (; m + kLanes <= n; m += kLanes)
    for (std::int64_t j = 0; j < kLanes; ++j) part[j] += a[m + j] * static_cast<double>(b[m + j]);
  double s = 0.0;
  for (; m < n; ++m) s += a[m] * static_cast<double>(b[m]);
  for (std::int64_t j = 0; j < kLanes; ++j) s += part[j];
  return s;
}

template <typename T>
void conv_backward(const ConvGeom& g, const T* in, const T* weight, const T* gy, T* gx, T* gw, T* gb) {
  const std::int64_t K = g.K(), P = g.P();
  const std::int64_t chunk = g.frames_per_chunk();
  std::vector<double> gw_acc(gw ? static_cast<std::size_t>(g.o * K) : 0, 0.0);
  std::vector<double> gb_acc(gb ? static_cast<std::size_t>(g.o) : 0, 0.0);
  std::vector<T> col;
  std::vector<double> G, dcol, dx_chunk;
  for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::int64_t n1 = std::min(g.n, n0 + chunk);
    const std::int64_t M = (n1 - n0) * P;
    G.resize(static_cast<std::size_t>(g.o * M));
    for (std::int64_t o = 0; o < g.o; ++o) {
      for (std::int64_t n = n0; n < n1; ++n) {
        const T* src = gy + (n * g.o + o) * P;
        double* dst = G.data() + o * M + (n - n0) * P;
        for (std::int64_t p = 0; p < P; ++p) dst[p] = src[p];
      }
    }
    if (gw) {
      col.resize(static_cast<std::size_t>(K * M));
      im2col(in, g, n0, n1, col.data());
      parallel_for(g.o, [&](std::int64_t o0, std::int64_t o1) {
        for (std::int64_t o = o0; o < o1; ++o) {
          const double* grow = G.data() + o * M;
          for (std::int64_t kk = 0; kk < K; ++kk) gw_acc[o * K + kk] += dot(grow, col.data() + kk * M, M);
        }
      });
    }
    if (gb) {
      for (std::int64_t o = 0; o < g.o; ++o) {
        const double* grow = G.data() + o * M;
        double s = 0.0;
        for (std::int64_t m = 0; m < M; ++m) s += grow[m];
        gb_acc[o] += s;
      }
    }
    if (gx) {
      dcol.assign(static_cast<std::size_t>(K * M), 0.0);
      parallel_for(K, [&](std::int64_t k0, std::int64_t k1) {
        for (std::int64_t kk = k0; kk < k1; ++kk) {
          double* drow = dcol.data() + kk * M;
          std::int64_t o = 0;
          for (; o + 4 <= g.o; o += 4) {
            const double a = weight[o * K + kk], b = weight[(o + 1) * K + kk];
            const double c = weight[(o + 2) * K + kk], d = weight[(o + 3) * K + kk];
            const double* g0 = G.data() + o * M;
            const double* g1 = g0 + M;
            const double* g2 = g1 + M;
            const double* g3 = g2 + M;
            for (std::int64_t m = 0; m < M; ++m) drow[m] += ((a * g0[m] + b * g1[m]) + c * g2[m]) + d * g3[m];
          }
          for (; o < g.o; ++o) {
            const double wv = weight[o * K + kk];
            const double* grow = G.data() + o * M;
            for (std::int64_t m = 0; m < M; ++m) drow[m] += wv * grow[m];
          }
        }
      });
      dx_chunk.assign(static_cast<std::size_t>((n1 - n0) * g.c * g.h * g.w), 0.0);
      col2im_add(dcol.data(), g, n0, n1, dx_chunk.data());
      T* dst = gx + n0 * g.c * g.h * g.w;
      for (std::size_t i = 0; i < dx_chunk.size(); ++i) dst[i] = static_cast<T>(dx_chunk[i]);
    }
  }
  if (gw) {
    for (std::size_t i = 0; i < gw_acc.size(); ++i) gw[i] = static_cast<T>(gw_acc[i]);
  }
  if (gb) {
    for (std::size_t i = 0; i < gb_acc.size(); ++i) gb[i] = static_cast<T>(gb_acc[i]);
  }
}

}  // namespace

std::int64_t conv_out_size(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
  if (stride < 1) throw ValueError("stride must be positive, got " + std::to_string(stride));
  if (padding < 0) throw ValueError("padding must be non-negative, got " + std::to_string(padding));
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0) {
    throw ShapeError("padded extent " + std::to_string(in + 2 * padding) + " is smaller than kernel " +
                     std::to_string(kernel));
  }
  return span / stride + 1;
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int padding) {
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 4) throw ShapeError("conv2d: input must be NCHW, got " + shape_str(xs));
  if (ws.size() != 4) throw ShapeError("conv2d: weight must be OIHW, got " + shape_str(ws));
  if (ws[2] != ws[3]) throw ShapeError("conv2d: only square kernels are supported, got " + shape_str(ws));
  if (xs[1] != ws[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(xs[1]) + " channels but weight expects " +
                     std::to_string(ws[1]) + " (input " + shape_str(xs) + ", weight " + shape_str(ws) + ")");
  }
  if (input.dtype() != weight.dtype()) throw ValueError("conv2d: input and weight dtypes differ");
  if (bias.defined()) {
    if (bias.shape() != Shape{ws[0]}) {
      throw ShapeError("conv2d: bias must have shape " + std::to_string(ws[0]) + ", got " + shape_str(bias.shape()));
    }
    if (bias.dtype() != input.dtype()) throw ValueError("conv2d: bias dtype differs");
  }
  ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, padding, 0, 0};
  g.ho = conv_out_size(g.h, g.k, stride, padding);
  g.wo = conv_out_size(g.w, g.k, stride, padding);

  Tensor out({g.n, g.o, g.ho, g.wo}, input.dtype());
  dispatch(input.dtype(), [&]<typename T>() {
    conv_forward<T>(g, input.value().data<T>().data(), weight.value().data<T>().data(),
                    bias.defined() ? bias.value().data<T>().data() : nullptr, out.mutable_data<T>().data());
  });

  std::vector<Var> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool need_x = input.requires_grad(), need_w = weight.requires_grad();
  const bool need_b = bias.defined() && bias.requires_grad();
  Tensor xv = input.value(), wv = weight.value();
  return make_result(std::move(out), "conv2d", std::move(inputs), [=](const Tensor& gy) {
    std::vector<Tensor> grads(bias.defined() ? 3 : 2);
    Tensor gx = need_x ? Tensor(xv.shape(), xv.dtype()) : Tensor();
    Tensor gw = need_w ? Tensor(wv.shape(), wv.dtype()) : Tensor();
    Tensor gb = need_b ? Tensor({g.o}, wv.dtype()) : Tensor();
    dispatch(xv.dtype(), [&]<typename T>() {
      conv_backward<T>(g, xv.data<T>().data(), wv.data<T>().data(), gy.data<T>().data(),
                       need_x ? gx.mutable_data<T>().data() : nullptr, need_w ? gw.mutable_data<T>().data() : nullptr,
                       need_b ? gb.mutable_data<T>().data() : nullptr);
    });
    grads[0] = gx;
    grads[1] = gw;
    if (grads.size() == 3) grads[2] = gb;
    return grads;
  });
}

}  // namespace blvnet::ops
