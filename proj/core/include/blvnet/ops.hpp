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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blvnet/autograd.hpp"

/// Differentiable operators over NCHW activations.
///
/// Every op accepts f32 or f64 inputs (all operands share one dtype) and
/// records itself on the active tape when an input requires a gradient.
namespace blvnet::ops {

/// Output extent of a strided window along one axis.
std::int64_t conv_out_size(std::int64_t in, std::int64_t kernel, std::int64_t stride, std::int64_t padding);

/// input N×C×H×W, weight O×C×k×k, optional bias O. Accumulates in double.
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int padding);

/// out[n,c,h,w] = weight[c] * in[n,c,h,w].
Var depthwise_conv1x1(const Var& input, const Var& weight);

/// Bilinear resampling, half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& input, std::int64_t out_h, std::int64_t out_w);
Var upsample2x(const Var& input);
/// Requires even H and W.
Var downsample2x(const Var& input);

struct BatchNormConfig {
  double momentum = 0.1;
  double eps = 1e-5;
  bool training = false;
};

/// Statistics over (N, H, W). In training mode the running buffers are
/// updated in place with the unbiased batch variance.
Var batch_norm(const Var& input, const Var& gamma, const Var& beta, Var& running_mean, Var& running_var,
               const BatchNormConfig& config);

Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Sum of all elements as a {1} tensor.
Var sum(const Var& x);

/// N×C×H×W -> N×C.
Var global_avg_pool(const Var& x);
/// Padding counts toward the divisor (k*k).
Var avg_pool2d(const Var& x, int kernel, int stride, int padding);
Var max_pool2d(const Var& x, int kernel, int stride, int padding);

/// x N×F, weight O×F, optional bias O -> N×O.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Rows of the leading axis, in the given order.
Var select_frames(const Var& x, std::span<const std::int64_t> indices);

/// The leading axis holds clips of frames_per_clip consecutive frames.
/// out[t] = x[t + offset] within each clip, zero where t + offset falls outside.
Var shift_time(const Var& x, std::int64_t frames_per_clip, std::int64_t offset);

/// Row `row` of a 2-D tensor as a 1-D tensor.
Var select_row(const Var& x, std::int64_t row);

/// (B*T)×... -> B×..., arithmetic mean over each clip's T rows.
Var mean_over_time(const Var& x, std::int64_t frames_per_clip);

/// Mean over rows of -log softmax(logits)[label]; log-sum-exp form.
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Row-wise softmax, not differentiable.
Tensor softmax(const Tensor& logits);

}  // namespace blvnet::ops
