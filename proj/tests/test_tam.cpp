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

#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "blvnet/diagnostics.hpp"
#include "blvnet/gradcheck.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/tam.hpp"
#include "test_util.hpp"

namespace blvnet {
namespace {

using testing::randn;

Tensor run(const Tensor& y, const Tensor& w, std::int64_t T, bool relu = true) {
  return tam::tam_forward(Var(y), tam::TamParams(Var(w)), T, {.apply_relu = relu}).value();
}

TEST(Tam, ThreeFrameFixture) {
  auto y = Tensor::from_values({3, 1, 1, 1}, {1, 2, 3}, DType::f64);
  auto w = Tensor::from_values({3, 1}, {0.5, 1, 0.25}, DType::f64);
  EXPECT_EQ(run(y, w, 3).to_vector(), (std::vector<double>{1.5, 3.25, 4.0}));
  EXPECT_EQ(tam::tam_oracle(y, w, 3).to_vector(), (std::vector<double>{1.5, 3.25, 4.0}));
}

TEST(Tam, RowsAreOrderedByOffset) {
  tam::TamParams p(Var(Tensor::zeros({5, 2}, DType::f64)));
  EXPECT_EQ(p.range(), 5);
  EXPECT_EQ(p.half_range(), 2);
  EXPECT_EQ(p.row_for_offset(-2), 0);
  EXPECT_EQ(p.row_for_offset(0), 2);
  EXPECT_EQ(p.row_for_offset(2), 4);
}

TEST(Tam, MatchesOracleOnRandomShapes) {
  int trial = 0;
  for (int T : {1, 2, 3, 5, 8})
    for (int r : {1, 3, 5})
      for (std::int64_t clips : {1, 3})
        for (bool relu : {true, false}) {
          const std::int64_t C = 1 + trial % 4;
          auto y = randn({clips * T, C, 2, 3}, 10 + trial);
          auto w = randn({r, C}, 500 + trial);
          const auto got = run(y, w, T, relu);
          const auto want = tam::tam_oracle(y, w, T, {.apply_relu = relu});
          EXPECT_LT(max_abs_diff(got, want), 1e-14) << "T=" << T << " r=" << r << " clips=" << clips;
          ++trial;
        }
}

TEST(Tam, FloatMatchesDoubleOracle) {
  auto y = randn({16, 8, 4, 4}, 3, DType::f32);
  auto w = randn({3, 8}, 4, DType::f32);
  const auto got = run(y, w, 8);
  const auto want = tam::tam_oracle(y.to(DType::f64), w.to(DType::f64), 8);
  EXPECT_LT(max_abs_diff(got.to(DType::f64), want), 1e-5);
}

TEST(Tam, IdentityInitIsExactlyRelu) {
  for (auto dt : {DType::f32, DType::f64}) {
    auto y = randn({12, 6, 3, 3}, 8, dt);
    auto p = tam::tam_init(6, 3, tam::TamInit::identity, 0, dt);
    auto out = tam::tam_forward(Var(y), p, 4).value();
    EXPECT_TRUE(out.identical(ops::relu(Var(y)).value()));
  }
}

TEST(Tam, NoisyInitStaysNearIdentity) {
  auto p = tam::tam_init(256, 3, tam::TamInit::identity_noise, 5, DType::f64);
  const auto w = p.weights().value().to_vector();
  double sq = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double target = (i / 256 == 1) ? 1.0 : 0.0;
    sq += (w[i] - target) * (w[i] - target);
  }
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(w.size())), 0.01, 0.002);
  EXPECT_TRUE(p.weights().requires_grad());
}

TEST(Tam, ClipsDoNotLeak) {
  auto y = randn({8, 3, 2, 2}, 1);
  auto w = randn({5, 3}, 2);
  auto y2 = y.clone();
  auto d = y2.mutable_data<double>();
  for (std::size_t i = 4 * 12; i < d.size(); ++i) d[i] += 10.0;  // perturb the second clip only
  const auto a = run(y, w, 4).to_vector(), b = run(y2, w, 4).to_vector();
  for (std::size_t i = 0; i < 4 * 12; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Tam, LinearBeforeRelu) {
  auto y1 = randn({6, 2, 2, 2}, 1), y2 = randn({6, 2, 2, 2}, 2);
  auto w = randn({3, 2}, 3);
  auto mix = ops::add(ops::scale(Var(y1), 2.0), ops::scale(Var(y2), -0.5)).value();
  auto lhs = run(mix, w, 3, false);
  auto rhs = ops::add(ops::scale(Var(run(y1, w, 3, false)), 2.0), ops::scale(Var(run(y2, w, 3, false)), -0.5)).value();
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

TEST(Tam, TimeReversalFlipsWeightRows) {
  const std::int64_t T = 5, C = 3;
  auto y = randn({T, C, 2, 2}, 4);
  auto w = randn({3, C}, 5);
  std::vector<std::int64_t> rev;
  for (std::int64_t t = T - 1; t >= 0; --t) rev.push_back(t);
  auto yr = ops::select_frames(Var(y), rev).value();
  auto wv = w.to_vector();
  std::vector<double> wf(wv.size());
  for (int r = 0; r < 3; ++r)
    for (std::int64_t c = 0; c < C; ++c) wf[static_cast<std::size_t>(r * C + c)] = wv[static_cast<std::size_t>((2 - r) * C + c)];
  auto out = run(yr, Tensor::from_values({3, C}, wf, DType::f64), T);
  auto back = ops::select_frames(Var(out), rev).value();
  EXPECT_LT(max_abs_diff(back, run(y, w, T)), 1e-14);
}

TEST(Tam, TsmIsAFixedWeightSpecialCase) {
  const std::int64_t C = 16, T = 4;
  auto p = tam::tsm_params(C, {1, 8}, 3, DType::f64);
  auto y = randn({T, C, 1, 2}, 6);
  auto got = tam::tam_forward(Var(y), p, T, {.apply_relu = false}).value().to_vector();
  const auto yv = y.to_vector();
  auto at = [&](std::int64_t t, std::int64_t c, std::int64_t i) {
    return (t < 0 || t >= T) ? 0.0 : yv[static_cast<std::size_t>((t * C + c) * 2 + i)];
  };
  for (std::int64_t t = 0; t < T; ++t)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < 2; ++i) {
        const double want = c < 2 ? at(t + 1, c, i) : c < 4 ? at(t - 1, c, i) : at(t, c, i);
        EXPECT_EQ(got[static_cast<std::size_t>((t * C + c) * 2 + i)], want) << t << " " << c;
      }
}

TEST(Tam, TsmRejectsBadFractions) {
  EXPECT_THROW(tam::tsm_params(16, {3, 4}), ValueError);
  EXPECT_THROW(tam::tsm_params(16, {0, 8}), ValueError);
  EXPECT_THROW(tam::tsm_params(12, {1, 8}), ValueError);
  EXPECT_THROW(tam::tsm_params(16, {1, 8}, 1), ValueError);
  EXPECT_NO_THROW(tam::tsm_params(16, {1, 2}));
}

TEST(Tam, ShapeAndRangeErrors) {
  EXPECT_THROW(tam::TamParams(Var(Tensor::zeros({2, 4}, DType::f64))), ValueError);
  auto w = Tensor::zeros({3, 4}, DType::f64);
  EXPECT_THROW(run(randn({6, 3, 2, 2}, 1), w, 3), ShapeError);
  EXPECT_THROW(run(randn({7, 4, 2, 2}, 1), w, 3), ShapeError);
}

TEST(Tam, WarnsWhenRangeExceedsClip) {
  std::vector<std::string> seen;
  auto previous = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
  run(randn({2, 1, 1, 1}, 1), Tensor::zeros({5, 1}, DType::f64), 2);
  set_warning_sink(previous);
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_NE(seen[0].find("exceeds"), std::string::npos);
}

TEST(Tam, ParameterCount) {
  EXPECT_EQ(tam::tam_param_count(64, 3), 192);
  EXPECT_EQ(tam::tam_init(64, 3, tam::TamInit::identity).weights().numel(), 192);
}

TEST(Tam, GradcheckSuitePasses) {
  for (auto dt : {DType::f64, DType::f32}) {
    auto r = gradcheck::run_suite("tam", dt, 3);
    EXPECT_TRUE(r.passed()) << dtype_name(dt) << " " << r.max_rel_error();
  }
  EXPECT_LT(gradcheck::run_suite("tam", DType::f64, 0).max_rel_error(), 1e-4);
}

}  // namespace
}  // namespace blvnet
