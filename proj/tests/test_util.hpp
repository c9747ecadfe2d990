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
#include <random>
#include <vector>

#include "blvnet/random.hpp"
#include "blvnet/tensor.hpp"

namespace blvnet::testing {

inline Tensor randn(Shape shape, std::uint64_t seed, DType dtype = DType::f64, double stddev = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, stddev);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = nd(rng);
  return Tensor::from_values(std::move(shape), v, dtype);
}

// Direct six-loop convolution with zero padding.
inline Tensor conv_oracle(const Tensor& x, const Tensor& w, int stride, int pad) {
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), k = w.dim(2);
  const auto Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const auto xv = x.to_vector(), wv = w.to_vector();
  std::vector<double> out(static_cast<std::size_t>(N * O * Ho * Wo), 0.0);
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t i = 0; i < Ho; ++i)
        for (std::int64_t j = 0; j < Wo; ++j) {
          double acc = 0;
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t a = 0; a < k; ++a)
              for (std::int64_t b = 0; b < k; ++b) {
                const auto y = i * stride - pad + a, z = j * stride - pad + b;
                if (y < 0 || y >= H || z < 0 || z >= W) continue;
                acc += xv[static_cast<std::size_t>(((n * C + c) * H + y) * W + z)] *
                       wv[static_cast<std::size_t>(((o * C + c) * k + a) * k + b)];
              }
          out[static_cast<std::size_t>(((n * O + o) * Ho + i) * Wo + j)] = acc;
        }
  return Tensor::from_values({N, O, Ho, Wo}, out, x.dtype());
}

}  // namespace blvnet::testing
