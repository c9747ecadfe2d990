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

#include "blvnet/tam.hpp"

#include <random>
#include <string>
#include <vector>

#include "blvnet/diagnostics.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"

namespace blvnet::tam {
namespace {

void check_range(int range) {
  if (range < 1 || range % 2 == 0) {
    throw ValueError("temporal range must be an odd positive integer, got " + std::to_string(range));
  }
}

void check_input(const Shape& ys, std::int64_t channels, std::int64_t frames_per_clip) {
  if (ys.size() != 4) throw ShapeError("temporal aggregation expects (B*T)xCxHxW, got " + shape_str(ys));
  if (ys[1] != channels) {
    throw ShapeError("temporal aggregation weights have " + std::to_string(channels) + " channels, input has " +
                     std::to_string(ys[1]));
  }
  if (frames_per_clip < 1 || ys[0] % frames_per_clip != 0) {
    throw ShapeError("leading axis " + std::to_string(ys[0]) + " is not a whole number of " +
                     std::to_string(frames_per_clip) + "-frame clips");
  }
}

void warn_if_wide(int range, std::int64_t frames_per_clip) {
  if (range > 2 * frames_per_clip - 1) {
    warn("temporal range " + std::to_string(range) + " exceeds 2T-1 = " + std::to_string(2 * frames_per_clip - 1) +
         "; outer taps only see zero padding");
  }
}

}  // namespace

TamParams::TamParams(Var weights) : weights_(std::move(weights)) {
  if (!weights_.defined() || weights_.shape().size() != 2) {
    throw ShapeError("temporal aggregation weights must be an r×C tensor");
  }
  check_range(static_cast<int>(weights_.shape()[0]));
}

TamParams tam_init(std::int64_t channels, int range, TamInit scheme, std::uint64_t seed, DType dtype,
                   bool requires_grad) {
  check_range(range);
  if (channels < 1) throw ValueError("channel count must be positive");
  std::vector<double> w(static_cast<std::size_t>(range * channels), 0.0);
  const int half = range / 2;
  for (std::int64_t c = 0; c < channels; ++c) w[static_cast<std::size_t>(half * channels + c)] = 1.0;
  if (scheme == TamInit::identity_noise) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (auto& v : w) v += noise(rng);
  }
  return TamParams(Var(Tensor::from_values({range, channels}, w, dtype), requires_grad));
}

TamParams tsm_params(std::int64_t channels, Fraction shift_fraction, int range, DType dtype) {
  check_range(range);
  if (range < 3) throw ValueError("a channel shift needs a temporal range of at least 3");
  if (shift_fraction.den <= 0 || shift_fraction.num <= 0 || 2 * shift_fraction.num > shift_fraction.den) {
    throw ValueError("shift fraction must lie in (0, 1/2], got " + std::to_string(shift_fraction.num) + "/" +
                     std::to_string(shift_fraction.den));
  }
  if ((channels * shift_fraction.num) % shift_fraction.den != 0) {
    throw ValueError(std::to_string(channels) + " channels cannot be split into whole " +
                     std::to_string(shift_fraction.num) + "/" + std::to_string(shift_fraction.den) + " groups");
  }
  const std::int64_t fold = channels * shift_fraction.num / shift_fraction.den;
  const int half = range / 2;
  std::vector<double> w(static_cast<std::size_t>(range * channels), 0.0);
  auto at = [&](int offset, std::int64_t c) -> double& {
    return w[static_cast<std::size_t>((offset + half) * channels + c)];
  };
  for (std::int64_t c = 0; c < channels; ++c) {
    if (c < fold) {
      at(+1, c) = 1.0;
    } else if (c < 2 * fold) {
      at(-1, c) = 1.0;
    } else {
      at(0, c) = 1.0;
    }
  }
  return TamParams(Var(Tensor::from_values({range, channels}, w, dtype), false));
}

Var tam_forward(const Var& y, const TamParams& params, std::int64_t frames_per_clip, TamOptions options) {
  check_input(y.shape(), params.channels(), frames_per_clip);
  const int r = params.range();
  const int half = params.half_range();
  warn_if_wide(r, frames_per_clip);

  // Step 1: the r×T grid, one depthwise 1×1 convolution per row.
  std::vector<Var> grid;
  grid.reserve(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) grid.push_back(ops::depthwise_conv1x1(y, ops::select_row(params.weights(), i)));

  // Step 2: row i < r/2 moves right (reads the past), row i > r/2 moves left.
  for (int i = 0; i < r; ++i) {
    if (i != half) grid[i] = ops::shift_time(grid[i], frames_per_clip, i - half);
  }

  // Step 3: column sums.
  Var out = grid[0];
  for (int i = 1; i < r; ++i) out = ops::add(out, grid[i]);
  return options.apply_relu ? ops::relu(out) : out;
}

Tensor tam_oracle(const Tensor& y, const Tensor& weights, std::int64_t frames_per_clip, TamOptions options) {
  if (weights.ndim() != 2) throw ShapeError("temporal aggregation weights must be an r×C tensor");
  const int r = static_cast<int>(weights.dim(0));
  check_range(r);
  check_input(y.shape(), weights.dim(1), frames_per_clip);
  warn_if_wide(r, frames_per_clip);
  const int half = r / 2;
  const std::int64_t N = y.dim(0), C = y.dim(1), HW = y.dim(2) * y.dim(3);
  const std::int64_t T_ = frames_per_clip, B = N / T_;
  const auto yv = y.to_vector();
  const auto wv = weights.to_vector();
  std::vector<double> out(yv.size(), 0.0);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t t = 0; t < T_; ++t)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < HW; ++i) {
          double acc = 0.0;
          for (int j = -half; j <= half; ++j) {
            const std::int64_t src = t + j;
            if (src < 0 || src >= T_) continue;
            acc += wv[static_cast<std::size_t>((j + half) * C + c)] * yv[static_cast<std::size_t>(((b * T_ + src) * C + c) * HW + i)];
          }
          if (options.apply_relu && acc < 0.0) acc = 0.0;
          out[static_cast<std::size_t>(((b * T_ + t) * C + c) * HW + i)] = acc;
        }
  return Tensor::from_values(y.shape(), out, y.dtype());
}

}  // namespace blvnet::tam
