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

// One line per acceptance criterion. Exit status is the number of failures.
//
//   acceptance            run all criteria
//   acceptance 1 3 10     run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "blvnet/analyzer.hpp"
#include "blvnet/dataio.hpp"
#include "blvnet/diagnostics.hpp"
#include "blvnet/gradcheck.hpp"
#include "blvnet/network.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"
#include "blvnet/tam.hpp"
#include "blvnet/trainer.hpp"

namespace {

using namespace blvnet;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ArchSpec at(const char* name, int n_pairs) {
  ArchSpec s = parse_arch(name);
  s.n_pairs = n_pairs;
  return s;
}

bool within(double got, double want, double rel) { return std::abs(got / want - 1.0) <= rel; }

Tensor randn(Shape shape, std::uint64_t seed, DType dtype) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = nd(rng);
  return Tensor::from_values(std::move(shape), v, dtype);
}

Outcome cost_reproduction() {
  bool ok = true;
  std::string d;
  const auto r50 = analyzer::count_macs(at("blvnet-tam-50", 8));
  ok = ok && within(static_cast<double>(r50.params), 25.0e6, 0.02) && within(static_cast<double>(r50.macs), 23.8e9, 0.05);
  d += fmt("tam-50@8x2 %.2fM/%.2fG", r50.params / 1e6, r50.macs / 1e9);
  const double table[] = {32.1e9, 64.3e9, 96.4e9, 128.6e9};
  for (int i = 0; i < 4; ++i) {
    const auto r = analyzer::count_macs(at("blvnet-tam-101", 8 * (i + 1)));
    ok = ok && within(static_cast<double>(r.params), 40.2e6, 0.02) && within(static_cast<double>(r.macs), table[i], 0.05);
    d += i == 0 ? fmt("; tam-101 %.2fM", r.params / 1e6) : "";
    d += fmt(" %.1fG", r.macs / 1e9);
  }
  return {ok, d + " (params +-2%, MACs +-5%)"};
}

Outcome mac_linearity() {
  bool ok = true;
  std::string d;
  for (const char* name : {"blvnet-tam-50", "blvnet-tam-101"}) {
    const auto a = analyzer::count_macs(at(name, 8)), b = analyzer::count_macs(at(name, 16));
    const double ratio = static_cast<double>(b.macs - b.fixed_macs) / static_cast<double>(a.macs - a.fixed_macs);
    ok = ok && std::abs(ratio / 2.0 - 1.0) <= 0.005;
    d += fmt("%s%s 8->16 pairs x%.6f", d.empty() ? "" : "; ", name, ratio);
  }
  return {ok, d + " (2 +-0.5%)"};
}

Outcome tam_correctness() {
  Rng rng(2026);
  std::uniform_int_distribution<int> pick_t(1, 8), pick_c(1, 8), pick_clips(1, 3), pick_r(0, 2);
  double worst = 0;
  int cases = 0, warnings = 0;
  const auto previous = set_warning_sink([&](std::string_view) { ++warnings; });
  for (; cases < 150; ++cases) {
    const int T = pick_t(rng), C = pick_c(rng), clips = pick_clips(rng), r = 1 + 2 * pick_r(rng);
    const bool relu = cases % 2 == 0;
    auto y = randn({clips * T, C, 3, 2}, derive_seed(7, static_cast<std::uint64_t>(cases)), DType::f64);
    auto w = randn({r, C}, derive_seed(8, static_cast<std::uint64_t>(cases)), DType::f64);
    const auto got = tam::tam_forward(Var(y), tam::TamParams(Var(w)), T, {.apply_relu = relu}).value();
    worst = std::max(worst, max_abs_diff(got, tam::tam_oracle(y, w, T, {.apply_relu = relu})));
  }
  set_warning_sink(previous);
  bool identity = true;
  for (auto dt : {DType::f32, DType::f64}) {
    auto y = randn({16, 12, 5, 5}, 3, dt);
    auto out = tam::tam_forward(Var(y), tam::tam_init(12, 3, tam::TamInit::identity, 0, dt), 8).value();
    identity = identity && out.identical(ops::relu(Var(y)).value());
  }
  // Channel-shift oracle written from scratch: first fold reads t+1, second fold reads t-1.
  const std::int64_t T = 8, C = 16, fold = C / 8, HW = 9;
  auto y = randn({2 * T, C, 3, 3}, 4, DType::f64);
  const auto got = tam::tam_forward(Var(y), tam::tsm_params(C, {1, 8}, 3, DType::f64), T, {.apply_relu = false})
                       .value()
                       .to_vector();
  const auto yv = y.to_vector();
  double tsm_err = 0;
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < HW; ++i) {
          const std::int64_t src = c < fold ? t + 1 : c < 2 * fold ? t - 1 : t;
          const double want = (src < 0 || src >= T) ? 0.0 : yv[static_cast<std::size_t>(((b * T + src) * C + c) * HW + i)];
          tsm_err = std::max(tsm_err, std::abs(got[static_cast<std::size_t>(((b * T + t) * C + c) * HW + i)] - want));
        }
  return {worst <= 1e-6 && identity && tsm_err <= 1e-7,
          fmt("%d random cases (%d wide-window warnings) max |diff| %.2e (<=1e-6); identity==relu bitwise: %s; TSM max |diff| %.2e (<=1e-7)", cases,
              warnings, worst, identity ? "yes" : "no", tsm_err)};
}

Outcome differentiability() {
  bool ok = true;
  std::string d;
  for (const auto& name : gradcheck::suite_names()) {
    const auto r = gradcheck::run_suite(name, DType::f64, 0);
    ok = ok && r.passed() && r.max_rel_error() < 1e-4;
    d += fmt("%s%s %.2e (%.1f s)", d.empty() ? "" : "; ", name.c_str(), r.max_rel_error(), r.seconds);
  }
  return {ok, d + " (f64, < 1e-4)"};
}

Outcome routing() {
  bool ok = true;
  std::string d;
  std::vector<ArchSpec> specs{at("blvnet-tiny", 4), at("blvnet-tam-tiny", 4), at("blvnet-tam-50", 2)};
  specs.back().input_size = 64;
  for (const auto& spec : specs) {
    BuildOptions bo;
    bo.tam_init = tam::TamInit::identity_noise;
    const auto net = build_network(spec, bo);
    const auto x = randn({spec.num_frames(), 3, spec.input_size, spec.input_size}, 5, DType::f32);
    const auto res = net.forward(Var(x), {.capture_stages = true});
    try {
      check_pair_duplication(net, res);
      d += fmt("%s%s %zu stages ok", d.empty() ? "" : "; ", arch_name(spec).c_str(), res.stages.size() - 1);
    } catch (const std::exception& e) {
      ok = false;
      d += std::string("; ") + e.what();
    }
  }
  bool rejected = false;
  try {
    const auto net = build_network(at("blvnet-tam-tiny", 4));
    forward_video(net, randn({7, 3, 32, 32}, 6, DType::f32));
  } catch (const ShapeError&) {
    rejected = true;
  }
  return {ok && rejected, d + (rejected ? "; odd T rejected" : "; odd T ACCEPTED")};
}

Outcome memory() {
  const double blv = static_cast<double>(analyzer::activation_memory(at("blvnet-tam-50", 8), analyzer::MemoryMode::training));
  const double tsn = static_cast<double>(analyzer::activation_memory(at("tsn-50", 16), analyzer::MemoryMode::training));
  return {tsn / blv >= 1.5, fmt("training activations tsn-50 %.1fM / blvnet-tam-50 %.1fM elements = %.2f (>= 1.5) at 16 frames",
                               tsn / 1e6, blv / 1e6, tsn / blv)};
}

Outcome tam_share() {
  const auto r = analyzer::count_macs(at("blvnet-tam-50", 8));
  const double p = 100.0 * static_cast<double>(r.tam_params) / static_cast<double>(r.params);
  const double m = 100.0 * static_cast<double>(r.tam_macs) / static_cast<double>(r.macs);
  return {p < 0.3 && m < 0.5, fmt("params %.4f%% (< 0.3%%), MACs %.4f%% (< 0.5%%)", p, m)};
}

fs::path toy_root() { return fs::temp_directory_path() / ("blvnet_acceptance_" + std::to_string(::getpid())); }
double g_toy_seconds = 0;

Outcome ablation() {
  const auto setup = train::default_toy_setup();
  train::ToyOptions opt;
  opt.out_dir = toy_root() / "run1";
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = train::run_toy(setup, opt);
  g_toy_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double tsn = r[0].final_val_acc, blv = r[1].final_val_acc, tam = r[2].final_val_acc;
  const bool ok = tsn <= 0.60 && blv > tsn && tam >= 0.90 && tam > blv && g_toy_seconds < 15 * 60;
  return {ok, fmt("val acc tsn-tiny %.3f (<= 0.60) < blvnet-tiny %.3f < blvnet-tam-tiny %.3f (>= 0.90); %d train / %d val "
                  "clips, %d epochs, %.0f s (< 900 s)",
                  tsn, blv, tam, setup.train_clips, setup.val_clips, setup.config.epochs, g_toy_seconds)};
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const auto setup = train::default_toy_setup();
  const auto first = toy_root() / "run1";
  const auto t0 = std::chrono::steady_clock::now();
  if (!fs::exists(first / "blvnet-tam-tiny.ckpt")) {
    train::ToyOptions opt;
    opt.out_dir = first;
    train::run_toy(setup, opt);
  }
  train::ToyOptions opt;
  opt.out_dir = toy_root() / "run2";
  train::run_toy(setup, opt);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool same = true;
  std::size_t total = 0;
  for (const char* name : {"tsn-tiny", "blvnet-tiny", "blvnet-tam-tiny"}) {
    const auto a = bytes(first / (std::string(name) + ".ckpt")), b = bytes(toy_root() / "run2" / (std::string(name) + ".ckpt"));
    same = same && !a.empty() && a == b;
    total += a.size();
  }
  const double budget = g_toy_seconds > 0 ? 2 * g_toy_seconds : 2 * 15 * 60.0;
  return {same && seconds <= budget,
          fmt("3 checkpoints (%zu bytes) %s byte-for-byte; second run %.0f s (<= %.0f s)", total,
              same ? "identical" : "DIFFER", seconds, budget)};
}

Outcome sampling_and_preprocessing() {
  using data::SampleMode;
  using data::uniform_sample;
  bool ok = uniform_sample(100, 4, SampleMode::infer).indices == std::vector<std::int64_t>{12, 37, 62, 87};
  ok = ok && uniform_sample(2, 4, SampleMode::infer).indices == std::vector<std::int64_t>{0, 0, 1, 1};
  ok = ok && uniform_sample(1, 5, SampleMode::train, 3).indices == std::vector<std::int64_t>(5, 0);
  ok = ok && uniform_sample(3, 3, SampleMode::train, 3).indices == std::vector<std::int64_t>{0, 1, 2};
  int props = 0;
  Rng rng(10);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 32);
    const std::int64_t L = n + static_cast<std::int64_t>(rng() % 400);
    const auto idx = uniform_sample(L, n, trial % 2 ? SampleMode::train : SampleMode::infer, rng()).indices;
    for (int i = 0; i < n; ++i) {
      const auto v = idx[static_cast<std::size_t>(i)];
      ok = ok && v >= i * L / n && v < (i + 1) * L / n;
    }
    ++props;
  }
  data::PreprocessConfig cfg;
  const auto size = data::resized_size(480, 640, cfg);
  ok = ok && size == std::array<int, 2>{256, 341};
  const auto t = data::preprocess_infer(data::Image(480, 640, 128), cfg);
  ok = ok && t.shape() == Shape{3, 224, 224};
  double err = 0;
  const auto v = t.to_vector();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 224 * 224; ++i)
      err = std::max(err, std::abs(v[c * 224 * 224 + i] - (128.0 / 255.0 - cfg.mean[c]) / cfg.std[c]));
  ok = ok && err < 1e-6;
  return {ok, fmt("L=100,n=4 -> 12 37 62 87; L=2,n=4 -> 0 0 1 1; %d segment properties; 480x640 -> %dx%d -> 3x224x224; "
                  "gray normalization max err %.1e",
                  props, size[0], size[1], err)};
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "cost reproduction", 5, cost_reproduction},
      {2, "MAC linearity", 10, mac_linearity},
      {3, "TAM correctness", 30, tam_correctness},
      {4, "differentiability", 60, differentiability},
      {5, "odd/even routing", 30, routing},
      {6, "training memory vs TSN", 10, memory},
      {7, "ablation ordering", 15 * 60, ablation},
      {8, "TAM cost share", 10, tam_share},
      {9, "determinism", 0, determinism},
      {10, "sampling/preprocessing contracts", 10, sampling_and_preprocessing},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && s > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0f s budget]", c.budget_s);
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d %-34s %s  %s  [%.1f s]\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail.c_str(), s);
    std::fflush(stdout);
  }
  fs::remove_all(toy_root());
  std::printf("%s: %d failure(s)\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures;
}
