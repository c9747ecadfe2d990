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

#include "blvnet/autograd.hpp"

/// Temporal aggregation: a learnable, channel-wise weighted sum over a window
/// of neighbouring frames followed by ReLU,
///
///   out_t = ReLU( sum_{j=-r/2}^{r/2} w_j (x) y_{t+j} ),
///
/// where (x) scales channel c of y_{t+j} by w_j[c] and frames outside the
/// clip contribute zero.
namespace blvnet::tam {

/// The r weight vectors of one aggregation layer, stored as an r×C tensor.
/// Row i holds w_j for temporal offset j = i - r/2.
class TamParams {
 public:
  TamParams() = default;
  /// weights must be r×C with r odd and >= 1.
  explicit TamParams(Var weights);

  const Var& weights() const { return weights_; }
  Var& weights() { return weights_; }
  int range() const { return static_cast<int>(weights_.shape()[0]); }
  int half_range() const { return range() / 2; }
  std::int64_t channels() const { return weights_.shape()[1]; }
  /// Row index holding the weights for temporal offset j.
  std::int64_t row_for_offset(int offset) const { return offset + half_range(); }

 private:
  Var weights_;
};

enum class TamInit {
  identity,        ///< w_0 = 1, every other tap 0.
  identity_noise,  ///< identity plus N(0, 0.01^2) on every tap.
};

/// Raises ValueError for an even or non-positive range.
TamParams tam_init(std::int64_t channels, int range, TamInit scheme, std::uint64_t seed = 0,
                   DType dtype = DType::f32, bool requires_grad = true);

struct Fraction {
  std::int64_t num = 1;
  std::int64_t den = 8;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Fixed one-hot weights that turn temporal aggregation into a temporal
/// channel shift. With fold = C * fraction channels per direction, channels
/// [0, fold) read frame t+1, [fold, 2*fold) read frame t-1 and the rest pass
/// through. Rejects fractions outside (0, 1/2] and folds that are not whole
/// channel counts.
TamParams tsm_params(std::int64_t channels, Fraction shift_fraction = {}, int range = 3,
                     DType dtype = DType::f32);

struct TamOptions {
  /// Test hook: disabling exposes the linear pre-activation sum.
  bool apply_relu = true;
};

/// Aggregation over a (B*T)×C×H×W batch whose leading axis holds B clips of
/// frames_per_clip frames each, computed in three stages:
///   1. r depthwise 1×1 convolutions give an r×T grid of weighted frames;
///   2. row i is shifted along time by i - r/2, zero-filling vacated frames;
///   3. the grid is summed column-wise and rectified.
/// Windows wider than 2T-1 are allowed; the extra taps only see padding and a
/// warning is emitted.
Var tam_forward(const Var& y, const TamParams& params, std::int64_t frames_per_clip, TamOptions options = {});

/// Direct nested-loop evaluation of the same formula. Used as a test oracle.
Tensor tam_oracle(const Tensor& y, const Tensor& weights, std::int64_t frames_per_clip, TamOptions options = {});

/// Learnable parameters added by one aggregation layer: r * C.
constexpr std::int64_t tam_param_count(std::int64_t channels, int range) { return channels * range; }

}  // namespace blvnet::tam
