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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blvnet/ops.hpp"

namespace blvnet::ops {
namespace {

void require_nchw(const char* op, const Var& x) {
  if (x.shape().size() != 4) throw ShapeError(std::string(op) + ": expected NCHW input, got " + shape_str(x.shape()));
}

void require_same_dtype(const char* op, const Var& a, const Var& b) {
  if (a.dtype() != b.dtype()) throw ValueError(std::string(op) + ": operand dtypes differ");
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  require_same_dtype(op, a, b);
}

// Elementwise map producing a fresh tensor of the same shape.
template <typename F>
Tensor map_tensor(const Tensor& x, F f) {
  Tensor out(x.shape(), x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto s = x.data<T>();
    auto d = out.mutable_data<T>();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = f(s[i]);
  });
  return out;
}

// Interpolation taps along one axis, half-pixel centers.
struct Taps {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> frac;
};

Taps bilinear_taps(std::int64_t in, std::int64_t out) {
  Taps t;
  t.i0.resize(static_cast<std::size_t>(out));
  t.i1.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::int64_t>(std::floor(src));
    lo = std::min(lo, in - 1);
    t.i0[d] = lo;
    t.i1[d] = std::min(lo + 1, in - 1);
    t.frac[d] = src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

Var depthwise_conv1x1(const Var& input, const Var& weight) {
  require_nchw("depthwise_conv1x1", input);
  const auto& s = input.shape();
  if (weight.shape() != Shape{s[1]}) {
    throw ShapeError("depthwise_conv1x1: weight has shape " + shape_str(weight.shape()) + " but input has " +
                     std::to_string(s[1]) + " channels");
  }
  require_same_dtype("depthwise_conv1x1", input, weight);
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor out(s, input.dtype());
  dispatch(input.dtype(), [&]<typename T>() {
    auto x = input.value().data<T>();
    auto w = weight.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c) {
        const std::int64_t base = (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) o[base + i] = w[c] * x[base + i];
      }
  });
  Tensor xv = input.value(), wv = weight.value();
  return make_result(std::move(out), "depthwise_conv1x1", {input, weight}, [=](const Tensor& gy) {
    Tensor gx(xv.shape(), xv.dtype()), gw(wv.shape(), wv.dtype());
    dispatch(xv.dtype(), [&]<typename T>() {
      auto x = xv.data<T>();
      auto w = wv.data<T>();
      auto g = gy.data<T>();
      auto dx = gx.mutable_data<T>();
      auto dw = gw.mutable_data<T>();
      for (std::int64_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n) {
          const std::int64_t base = (n * C + c) * HW;
          for (std::int64_t i = 0; i < HW; ++i) {
            dx[base + i] = w[c] * g[base + i];
            acc += static_cast<double>(g[base + i]) * x[base + i];
          }
        }
        dw[c] = static_cast<T>(acc);
      }
    });
    return std::vector<Tensor>{gx, gw};
  });
}

Var resize_bilinear(const Var& input, std::int64_t out_h, std::int64_t out_w) {
  require_nchw("resize_bilinear", input);
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_bilinear: output size must be positive");
  const auto& s = input.shape();
  const std::int64_t NC = s[0] * s[1], H = s[2], W = s[3];
  const Taps ty = bilinear_taps(H, out_h), tx = bilinear_taps(W, out_w);
  Tensor out({s[0], s[1], out_h, out_w}, input.dtype());
  dispatch(input.dtype(), [&]<typename T>() {
    auto x = input.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t p = 0; p < NC; ++p) {
      const T* plane = x.data() + p * H * W;
      T* dst = o.data() + p * out_h * out_w;
      for (std::int64_t y = 0; y < out_h; ++y) {
        const double fy = ty.frac[y];
        const T* r0 = plane + ty.i0[y] * W;
        const T* r1 = plane + ty.i1[y] * W;
        for (std::int64_t xx = 0; xx < out_w; ++xx) {
          const double fx = tx.frac[xx];
          const double top = (1.0 - fx) * r0[tx.i0[xx]] + fx * r0[tx.i1[xx]];
          const double bot = (1.0 - fx) * r1[tx.i0[xx]] + fx * r1[tx.i1[xx]];
          dst[y * out_w + xx] = static_cast<T>((1.0 - fy) * top + fy * bot);
        }
      }
    }
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "resize_bilinear", {input}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto dx = gx.mutable_data<T>();
      std::vector<double> acc(static_cast<std::size_t>(H * W));
      for (std::int64_t p = 0; p < NC; ++p) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const T* src = g.data() + p * out_h * out_w;
        for (std::int64_t y = 0; y < out_h; ++y) {
          const double fy = ty.frac[y];
          for (std::int64_t xx = 0; xx < out_w; ++xx) {
            const double fx = tx.frac[xx];
            const double v = src[y * out_w + xx];
            acc[ty.i0[y] * W + tx.i0[xx]] += (1.0 - fy) * (1.0 - fx) * v;
            acc[ty.i0[y] * W + tx.i1[xx]] += (1.0 - fy) * fx * v;
            acc[ty.i1[y] * W + tx.i0[xx]] += fy * (1.0 - fx) * v;
            acc[ty.i1[y] * W + tx.i1[xx]] += fy * fx * v;
          }
        }
        T* dst = dx.data() + p * H * W;
        for (std::int64_t i = 0; i < H * W; ++i) dst[i] = static_cast<T>(acc[i]);
      }
    });
    return std::vector<Tensor>{gx};
  });
}

Var upsample2x(const Var& input) {
  require_nchw("upsample2x", input);
  return resize_bilinear(input, input.shape()[2] * 2, input.shape()[3] * 2);
}

Var downsample2x(const Var& input) {
  require_nchw("downsample2x", input);
  const auto& s = input.shape();
  if (s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw ShapeError("downsample2x: spatial dims must be even, got " + std::to_string(s[2]) + "x" +
                     std::to_string(s[3]));
  }
  return resize_bilinear(input, s[2] / 2, s[3] / 2);
}

Var batch_norm(const Var& input, const Var& gamma, const Var& beta, Var& running_mean, Var& running_var,
               const BatchNormConfig& config) {
  require_nchw("batch_norm", input);
  const auto& s = input.shape();
  const std::int64_t N = s[0], C = s[1], HW = s[2] * s[3];
  const Shape cs{C};
  for (const Var* v : std::initializer_list<const Var*>{&gamma, &beta, &running_mean, &running_var}) {
    if (v->shape() != cs) {
      throw ShapeError("batch_norm: per-channel parameter has shape " + shape_str(v->shape()) + ", input has " +
                       std::to_string(C) + " channels");
    }
    require_same_dtype("batch_norm", input, *v);
  }
  if (config.eps <= 0.0) throw ValueError("batch_norm: eps must be positive");
  const std::int64_t count = N * HW;
  if (config.training && count < 2) {
    throw ValueError("batch_norm: training mode needs more than one value per channel");
  }

  std::vector<double> mean(static_cast<std::size_t>(C)), inv_std(static_cast<std::size_t>(C));
  Tensor xhat(s, input.dtype());
  Tensor out(s, input.dtype());
  Tensor new_rm, new_rv;
  dispatch(input.dtype(), [&]<typename T>() {
    auto x = input.value().data<T>();
    auto g = gamma.value().data<T>();
    auto b = beta.value().data<T>();
    auto rm = running_mean.value().data<T>();
    auto rv = running_var.value().data<T>();
    auto xh = xhat.mutable_data<T>();
    auto o = out.mutable_data<T>();
    std::vector<double> var(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c) {
      if (config.training) {
        double m = 0.0;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < HW; ++i) m += x[(n * C + c) * HW + i];
        m /= static_cast<double>(count);
        double v = 0.0;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < HW; ++i) {
            const double d = x[(n * C + c) * HW + i] - m;
            v += d * d;
          }
        v /= static_cast<double>(count);
        mean[c] = m;
        var[c] = v;
      } else {
        if (rv[c] < 0) throw ValueError("batch_norm: running variance is negative for channel " + std::to_string(c));
        mean[c] = rm[c];
        var[c] = rv[c];
      }
      inv_std[c] = 1.0 / std::sqrt(var[c] + config.eps);
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t i = 0; i < HW; ++i) {
          const std::int64_t idx = (n * C + c) * HW + i;
          const double h = (x[idx] - mean[c]) * inv_std[c];
          xh[idx] = static_cast<T>(h);
          o[idx] = static_cast<T>(g[c] * h + b[c]);
        }
    }
    if (config.training) {
      new_rm = Tensor(cs, input.dtype());
      new_rv = Tensor(cs, input.dtype());
      auto nm = new_rm.mutable_data<T>();
      auto nv = new_rv.mutable_data<T>();
      const double unbias = static_cast<double>(count) / static_cast<double>(count - 1);
      for (std::int64_t c = 0; c < C; ++c) {
        nm[c] = static_cast<T>((1.0 - config.momentum) * rm[c] + config.momentum * mean[c]);
        nv[c] = static_cast<T>((1.0 - config.momentum) * rv[c] + config.momentum * var[c] * unbias);
      }
    }
  });
  if (config.training) {
    running_mean.assign(new_rm);
    running_var.assign(new_rv);
  }

  const bool training = config.training;
  Tensor gv = gamma.value();
  return make_result(std::move(out), "batch_norm", {input, gamma, beta}, [=](const Tensor& gy) {
    Tensor gx(s, gy.dtype()), gg(cs, gy.dtype()), gb(cs, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto dy = gy.data<T>();
      auto xh = xhat.data<T>();
      auto g = gv.data<T>();
      auto dx = gx.mutable_data<T>();
      auto dg = gg.mutable_data<T>();
      auto db = gb.mutable_data<T>();
      for (std::int64_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < HW; ++i) {
            const std::int64_t idx = (n * C + c) * HW + i;
            sum_dy += dy[idx];
            sum_dy_xh += static_cast<double>(dy[idx]) * xh[idx];
          }
        dg[c] = static_cast<T>(sum_dy_xh);
        db[c] = static_cast<T>(sum_dy);
        const double k = g[c] * inv_std[c];
        const double inv_count = 1.0 / static_cast<double>(count);
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t i = 0; i < HW; ++i) {
            const std::int64_t idx = (n * C + c) * HW + i;
            if (training) {
              dx[idx] = static_cast<T>(k * (dy[idx] - inv_count * sum_dy - xh[idx] * inv_count * sum_dy_xh));
            } else {
              dx[idx] = static_cast<T>(k * dy[idx]);
            }
          }
      }
    });
    return std::vector<Tensor>{gx, gg, gb};
  });
}

Var relu(const Var& x) {
  Tensor out = map_tensor(x.value(), []<typename T>(T v) { return v > T(0) ? v : T(0); });
  Tensor ov = out;
  return make_result(std::move(out), "relu", {x}, [ov](const Tensor& gy) {
    Tensor gx(gy.shape(), gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto o = ov.data<T>();
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = o[i] > T(0) ? g[i] : T(0);
    });
    return std::vector<Tensor>{gx};
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<typename T>() {
    auto x = a.value().data<T>();
    auto y = b.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  });
  return make_result(std::move(out), "add", {a, b}, [](const Tensor& gy) { return std::vector<Tensor>{gy, gy}; });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<typename T>() {
    auto x = a.value().data<T>();
    auto y = b.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  });
  Tensor av = a.value(), bv = b.value();
  return make_result(std::move(out), "mul", {a, b}, [av, bv](const Tensor& gy) {
    Tensor ga(av.shape(), av.dtype()), gb(bv.shape(), bv.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto x = av.data<T>();
      auto y = bv.data<T>();
      auto g = gy.data<T>();
      auto dA = ga.mutable_data<T>();
      auto dB = gb.mutable_data<T>();
      for (std::size_t i = 0; i < g.size(); ++i) {
        dA[i] = g[i] * y[i];
        dB[i] = g[i] * x[i];
      }
    });
    return std::vector<Tensor>{ga, gb};
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = map_tensor(x.value(), [factor]<typename T>(T v) { return static_cast<T>(v * factor); });
  return make_result(std::move(out), "scale", {x}, [factor](const Tensor& gy) {
    return std::vector<Tensor>{map_tensor(gy, [factor]<typename T>(T v) { return static_cast<T>(v * factor); })};
  });
}

Var sum(const Var& x) {
  const double total = dispatch(x.dtype(), [&]<typename T>() {
    double s = 0.0;
    for (T v : x.value().data<T>()) s += v;
    return s;
  });
  const Shape in_shape = x.shape();
  return make_result(Tensor::scalar(total, x.dtype()), "sum", {x}, [in_shape](const Tensor& gy) {
    return std::vector<Tensor>{Tensor::full(in_shape, gy.item(0), gy.dtype())};
  });
}

Var global_avg_pool(const Var& x) {
  require_nchw("global_avg_pool", x);
  const auto& s = x.shape();
  const std::int64_t NC = s[0] * s[1], HW = s[2] * s[3];
  Tensor out({s[0], s[1]}, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t p = 0; p < NC; ++p) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < HW; ++i) acc += in[p * HW + i];
      o[p] = static_cast<T>(acc / static_cast<double>(HW));
    }
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "global_avg_pool", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      for (std::int64_t p = 0; p < NC; ++p) {
        const T v = static_cast<T>(g[p] / static_cast<double>(HW));
        for (std::int64_t i = 0; i < HW; ++i) d[p * HW + i] = v;
      }
    });
    return std::vector<Tensor>{gx};
  });
}

Var avg_pool2d(const Var& x, int kernel, int stride, int padding) {
  require_nchw("avg_pool2d", x);
  const auto& s = x.shape();
  const std::int64_t NC = s[0] * s[1], H = s[2], W = s[3];
  const std::int64_t Ho = conv_out_size(H, kernel, stride, padding), Wo = conv_out_size(W, kernel, stride, padding);
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  Tensor out({s[0], s[1], Ho, Wo}, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t p = 0; p < NC; ++p)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          for (int ki = 0; ki < kernel; ++ki) {
            const std::int64_t ih = oh * stride - padding + ki;
            if (ih < 0 || ih >= H) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const std::int64_t iw = ow * stride - padding + kj;
              if (iw >= 0 && iw < W) acc += in[(p * H + ih) * W + iw];
            }
          }
          o[(p * Ho + oh) * Wo + ow] = static_cast<T>(acc * inv);
        }
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "avg_pool2d", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      std::vector<double> acc(static_cast<std::size_t>(H * W));
      for (std::int64_t p = 0; p < NC; ++p) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::int64_t oh = 0; oh < Ho; ++oh)
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const double v = g[(p * Ho + oh) * Wo + ow] * inv;
            for (int ki = 0; ki < kernel; ++ki) {
              const std::int64_t ih = oh * stride - padding + ki;
              if (ih < 0 || ih >= H) continue;
              for (int kj = 0; kj < kernel; ++kj) {
                const std::int64_t iw = ow * stride - padding + kj;
                if (iw >= 0 && iw < W) acc[ih * W + iw] += v;
              }
            }
          }
        for (std::int64_t i = 0; i < H * W; ++i) d[p * H * W + i] = static_cast<T>(acc[i]);
      }
    });
    return std::vector<Tensor>{gx};
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int padding) {
  require_nchw("max_pool2d", x);
  const auto& s = x.shape();
  const std::int64_t NC = s[0] * s[1], H = s[2], W = s[3];
  const std::int64_t Ho = conv_out_size(H, kernel, stride, padding), Wo = conv_out_size(W, kernel, stride, padding);
  Tensor out({s[0], s[1], Ho, Wo}, x.dtype());
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(NC * Ho * Wo), -1);
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t p = 0; p < NC; ++p)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_idx = -1;
          for (int ki = 0; ki < kernel; ++ki) {
            const std::int64_t ih = oh * stride - padding + ki;
            if (ih < 0 || ih >= H) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const std::int64_t iw = ow * stride - padding + kj;
              if (iw < 0 || iw >= W) continue;
              const std::int64_t idx = (p * H + ih) * W + iw;
              if (best_idx < 0 || in[idx] > best) {
                best = in[idx];
                best_idx = idx;
              }
            }
          }
          if (best_idx < 0) throw ShapeError("max_pool2d: window covers only padding");
          const std::int64_t oidx = (p * Ho + oh) * Wo + ow;
          o[oidx] = best;
          (*argmax)[oidx] = best_idx;
        }
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "max_pool2d", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      for (std::size_t i = 0; i < argmax->size(); ++i) d[(*argmax)[i]] += g[i];
    });
    return std::vector<Tensor>{gx};
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1]) {
    throw ShapeError("linear: input " + shape_str(xs) + " does not match weight " + shape_str(ws));
  }
  require_same_dtype("linear", x, weight);
  const std::int64_t N = xs[0], F = xs[1], O = ws[0];
  if (bias.defined()) {
    if (bias.shape() != Shape{O}) throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
    require_same_dtype("linear", x, bias);
  }
  Tensor out({N, O}, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto w = weight.value().data<T>();
    auto o = out.mutable_data<T>();
    const T* b = bias.defined() ? bias.value().data<T>().data() : nullptr;
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t k = 0; k < O; ++k) {
        double acc = b ? static_cast<double>(b[k]) : 0.0;
        for (std::int64_t f = 0; f < F; ++f) acc += static_cast<double>(in[n * F + f]) * w[k * F + f];
        o[n * O + k] = static_cast<T>(acc);
      }
  });
  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  Tensor xv = x.value(), wv = weight.value();
  return make_result(std::move(out), "linear", std::move(inputs), [=](const Tensor& gy) {
    Tensor gx(xv.shape(), xv.dtype()), gw(wv.shape(), wv.dtype());
    Tensor gb = has_bias ? Tensor({O}, wv.dtype()) : Tensor();
    dispatch(gy.dtype(), [&]<typename T>() {
      auto in = xv.data<T>();
      auto w = wv.data<T>();
      auto g = gy.data<T>();
      auto dx = gx.mutable_data<T>();
      auto dw = gw.mutable_data<T>();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t f = 0; f < F; ++f) {
          double acc = 0.0;
          for (std::int64_t k = 0; k < O; ++k) acc += static_cast<double>(g[n * O + k]) * w[k * F + f];
          dx[n * F + f] = static_cast<T>(acc);
        }
      for (std::int64_t k = 0; k < O; ++k)
        for (std::int64_t f = 0; f < F; ++f) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < N; ++n) acc += static_cast<double>(g[n * O + k]) * in[n * F + f];
          dw[k * F + f] = static_cast<T>(acc);
        }
      if (has_bias) {
        auto db = gb.mutable_data<T>();
        for (std::int64_t k = 0; k < O; ++k) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < N; ++n) acc += g[n * O + k];
          db[k] = static_cast<T>(acc);
        }
      }
    });
    std::vector<Tensor> grads{gx, gw};
    if (has_bias) grads.push_back(gb);
    return grads;
  });
}

Var select_frames(const Var& x, std::span<const std::int64_t> indices) {
  const auto& s = x.shape();
  if (indices.empty()) throw ShapeError("select_frames: no indices");
  const std::int64_t rows = s[0];
  const std::int64_t row_size = x.numel() / rows;
  for (auto i : indices) {
    if (i < 0 || i >= rows) {
      throw ShapeError("select_frames: index " + std::to_string(i) + " outside [0, " + std::to_string(rows) + ")");
    }
  }
  Shape os = s;
  os[0] = static_cast<std::int64_t>(indices.size());
  Tensor out(os, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::size_t r = 0; r < indices.size(); ++r)
      std::copy_n(in.data() + indices[r] * row_size, row_size, o.data() + static_cast<std::int64_t>(r) * row_size);
  });
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  const Shape in_shape = s;
  return make_result(std::move(out), "select_frames", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::int64_t i = 0; i < row_size; ++i) d[idx[r] * row_size + i] += g[static_cast<std::int64_t>(r) * row_size + i];
    });
    return std::vector<Tensor>{gx};
  });
}

Var shift_time(const Var& x, std::int64_t frames_per_clip, std::int64_t offset) {
  const auto& s = x.shape();
  if (frames_per_clip < 1 || s[0] % frames_per_clip != 0) {
    throw ShapeError("shift_time: leading axis " + std::to_string(s[0]) + " is not a multiple of " +
                     std::to_string(frames_per_clip) + " frames");
  }
  const std::int64_t T_ = frames_per_clip, B = s[0] / T_, row = x.numel() / s[0];
  // dst frame t reads src frame t + off; zero when src is outside the clip.
  auto shift = [B, T_, row](const Tensor& src, std::int64_t off) {
    Tensor dst(src.shape(), src.dtype());
    dispatch(src.dtype(), [&]<typename T>() {
      auto in = src.data<T>();
      auto o = dst.mutable_data<T>();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t t = 0; t < T_; ++t) {
          const std::int64_t from = t + off;
          if (from < 0 || from >= T_) continue;
          std::copy_n(in.data() + (b * T_ + from) * row, row, o.data() + (b * T_ + t) * row);
        }
    });
    return dst;
  };
  Tensor out = shift(x.value(), offset);
  return make_result(std::move(out), "shift_time", {x}, [shift, offset](const Tensor& gy) {
    return std::vector<Tensor>{shift(gy, -offset)};
  });
}

Var select_row(const Var& x, std::int64_t row) {
  const auto& s = x.shape();
  if (s.size() != 2) throw ShapeError("select_row: expected a 2-D tensor, got " + shape_str(s));
  if (row < 0 || row >= s[0]) throw ShapeError("select_row: row " + std::to_string(row) + " out of range");
  const std::int64_t C = s[1];
  Tensor out({C}, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    std::copy_n(x.value().data<T>().data() + row * C, C, out.mutable_data<T>().data());
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "select_row", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() { std::copy_n(gy.data<T>().data(), C, gx.mutable_data<T>().data() + row * C); });
    return std::vector<Tensor>{gx};
  });
}

Var mean_over_time(const Var& x, std::int64_t frames_per_clip) {
  const auto& s = x.shape();
  if (frames_per_clip < 1 || s[0] % frames_per_clip != 0) {
    throw ShapeError("mean_over_time: leading axis " + std::to_string(s[0]) + " is not a multiple of " +
                     std::to_string(frames_per_clip));
  }
  const std::int64_t T_ = frames_per_clip, B = s[0] / T_, row = x.numel() / s[0];
  Shape os = s;
  os[0] = B;
  Tensor out(os, x.dtype());
  dispatch(x.dtype(), [&]<typename T>() {
    auto in = x.value().data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t i = 0; i < row; ++i) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < T_; ++t) acc += in[(b * T_ + t) * row + i];
        o[b * row + i] = static_cast<T>(acc / static_cast<double>(T_));
      }
  });
  const Shape in_shape = s;
  return make_result(std::move(out), "mean_over_time", {x}, [=](const Tensor& gy) {
    Tensor gx(in_shape, gy.dtype());
    dispatch(gy.dtype(), [&]<typename T>() {
      auto g = gy.data<T>();
      auto d = gx.mutable_data<T>();
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t t = 0; t < T_; ++t)
          for (std::int64_t i = 0; i < row; ++i)
            d[(b * T_ + t) * row + i] = static_cast<T>(g[b * row + i] / static_cast<double>(T_));
    });
    return std::vector<Tensor>{gx};
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const auto& s = logits.shape();
  if (s.size() != 2) throw ShapeError("cross_entropy: logits must be N×K, got " + shape_str(s));
  const std::int64_t N = s[0], K = s[1];
  if (static_cast<std::int64_t>(labels.size()) != N) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(N) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || l >= K) throw ValueError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(K) + ")");
  }
  std::vector<int> lab(labels.begin(), labels.end());
  Tensor probs = softmax(logits.value());
  const double loss = dispatch(logits.dtype(), [&]<typename T>() {
    auto z = logits.value().data<T>();
    double total = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
      double mx = z[n * K];
      for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(z[n * K + k]));
      double se = 0.0;
      for (std::int64_t k = 0; k < K; ++k) se += std::exp(z[n * K + k] - mx);
      total += mx + std::log(se) - z[n * K + lab[n]];
    }
    return total / static_cast<double>(N);
  });
  return make_result(Tensor::scalar(loss, logits.dtype()), "cross_entropy", {logits}, [=](const Tensor& gy) {
    const double g = gy.item(0) / static_cast<double>(N);
    Tensor gz(probs.shape(), probs.dtype());
    dispatch(probs.dtype(), [&]<typename T>() {
      auto p = probs.data<T>();
      auto d = gz.mutable_data<T>();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t k = 0; k < K; ++k) {
          const double onehot = (k == lab[n]) ? 1.0 : 0.0;
          d[n * K + k] = static_cast<T>(g * (p[n * K + k] - onehot));
        }
    });
    return std::vector<Tensor>{gz};
  });
}

Tensor softmax(const Tensor& logits) {
  const auto& s = logits.shape();
  const std::int64_t K = s.back();
  const std::int64_t N = logits.numel() / K;
  Tensor out(s, logits.dtype());
  dispatch(logits.dtype(), [&]<typename T>() {
    auto z = logits.data<T>();
    auto o = out.mutable_data<T>();
    for (std::int64_t n = 0; n < N; ++n) {
      double mx = z[n * K];
      for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(z[n * K + k]));
      double se = 0.0;
      for (std::int64_t k = 0; k < K; ++k) se += std::exp(z[n * K + k] - mx);
      for (std::int64_t k = 0; k < K; ++k) o[n * K + k] = static_cast<T>(std::exp(z[n * K + k] - mx) / se);
    }
  });
  return out;
}

}  // namespace blvnet::ops
