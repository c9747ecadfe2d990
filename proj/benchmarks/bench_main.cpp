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

#include <benchmark/benchmark.h>

#include <random>

#include "blvnet/analyzer.hpp"
#include "blvnet/network.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"
#include "blvnet/tam.hpp"

namespace {

using namespace blvnet;

Tensor randn(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = nd(rng);
  return Tensor::from_values(std::move(shape), v, DType::f32);
}

void BM_Conv3x3(benchmark::State& state) {
  const auto c = state.range(0);
  const Var x(randn({8, c, 28, 28}, 1)), w(randn({c, c, 3, 3}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, Var(), 1, 1).value());
  state.counters["MAC/s"] = benchmark::Counter(static_cast<double>(8 * c * c * 9 * 28 * 28),
                                               benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TamForward(benchmark::State& state) {
  const auto T = state.range(0);
  const Var y(randn({2 * T, 64, 28, 28}, 3));
  const auto p = tam::tam_init(64, 3, tam::TamInit::identity_noise, 4);
  for (auto _ : state) benchmark::DoNotOptimize(tam::tam_forward(y, p, T).value());
}
BENCHMARK(BM_TamForward)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TinyForward(benchmark::State& state) {
  ArchSpec spec = parse_arch("blvnet-tam-tiny");
  spec.n_pairs = 4;
  const auto net = build_network(spec);
  const Var x(randn({8, 3, 32, 32}, 5));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x).logits.value());
}
BENCHMARK(BM_TinyForward)->Unit(benchmark::kMillisecond);

void BM_CountMacs(benchmark::State& state) {
  ArchSpec spec = parse_arch("blvnet-tam-101");
  spec.n_pairs = 16;
  for (auto _ : state) benchmark::DoNotOptimize(analyzer::count_macs(spec).macs);
}
BENCHMARK(BM_CountMacs)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
