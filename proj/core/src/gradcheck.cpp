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

#include "blvnet/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "blvnet/checkpoint.hpp"
#include "blvnet/error.hpp"
#include "blvnet/network.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"
#include "blvnet/tam.hpp"

namespace blvnet::gradcheck {
namespace {

double eval(const LossFn& loss) { return loss().value().item(0); }

Tensor with_element(const Tensor& t, std::int64_t index, double delta) {
  Tensor out = t.clone();
  dispatch(out.dtype(), [&]<typename T>() {
    auto d = out.mutable_data<T>();
    d[static_cast<std::size_t>(index)] = static_cast<T>(static_cast<double>(d[static_cast<std::size_t>(index)]) + delta);
  });
  return out;
}

Tensor with_direction(const Tensor& t, const std::vector<double>& dir, double scale) {
  auto v = t.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * dir[i];
  return Tensor::from_values(t.shape(), v, t.dtype());
}

Tensor random_tensor(Shape shape, std::uint64_t seed, DType dtype, double stddev = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = dist(rng);
  return Tensor::from_values(std::move(shape), v, dtype);
}

// sum(out * R) for a fixed random R: every output element gets a distinct weight.
Var weighted_sum(const Var& out, std::uint64_t seed, DType values) {
  return ops::sum(ops::mul(out, Var(random_tensor(out.shape(), seed, values).to(out.dtype()))));
}

struct Problem {
  std::unique_ptr<Network> net;
  LossFn loss;
  std::vector<std::pair<std::string, Var>> vars;
};

// Moves parameters off the initializer's special values (beta = 0, gamma = 1)
// so no ReLU input sits exactly on its kink.
void jitter(Network& net, std::uint64_t seed) {
  for (const auto& e : net.params().entries()) {
    if (e.buffer) continue;
    auto v = e.var.value().to_vector();
    double rms = 0;
    for (double x : v) rms += x * x;
    rms = v.empty() ? 0 : std::sqrt(rms / static_cast<double>(v.size()));
    Rng rng(derive_seed(derive_seed(seed, "jitter"), e.name));
    std::normal_distribution<double> nd(0.0, rms > 0 ? 0.1 * rms : 0.1);
    for (auto& x : v) x += nd(rng);
    Var var = e.var;
    var.assign(Tensor::from_values(e.var.shape(), v, e.var.dtype()));
  }
}

void add_params(Problem& p) {
  for (const auto& e : p.net->params().entries())
    if (!e.buffer) p.vars.emplace_back(e.name, e.var);
}

// Values are drawn in `values` precision and computed in `compute`, so an f64
// problem built from f32 values is the same function as its f32 twin.
std::unique_ptr<Problem> make_problem(std::string_view module, DType values, DType compute, std::uint64_t seed) {
  auto p = std::make_unique<Problem>();
  auto rnd = [&](Shape shape, std::string_view key, double stddev = 1.0) {
    return random_tensor(std::move(shape), derive_seed(seed, key), values, stddev).to(compute);
  };
  auto build = [&](auto&& builder) {
    BuildOptions bo;
    bo.seed = seed;
    bo.dtype = values;
    bo.tam_init = tam::TamInit::identity_noise;
    Network net = builder(bo);
    jitter(net, seed);
    if (values == compute) return std::make_unique<Network>(std::move(net));
    bo.dtype = compute;
    auto twin = std::make_unique<Network>(builder(bo));
    copy_parameters(net, *twin);
    return twin;
  };
  if (module == "tam") {
    // T=5, C=4, 3x3, r=3, two clips.
    Var y(rnd({10, 4, 3, 3}, "tam.y"), true);
    Var w(rnd({3, 4}, "tam.w", 0.5), true);
    p->loss = [=] { return weighted_sum(tam::tam_forward(y, tam::TamParams(w), 5), derive_seed(seed, "tam.r"), values); };
    p->vars = {{"tam.weight", w}, {"tam.input", y}};
    return p;
  }
  if (module == "bl-module") {
    BlModuleSpec spec;
    spec.arch = parse_arch("blvnet-tam-tiny");
    spec.in_channels = 8;
    spec.out_channels = 16;
    spec.blocks = 2;
    spec.stride = 2;
    spec.frames = 3;
    spec.size = 6;
    p->net = build([&](const BuildOptions& bo) { return build_bl_module(spec, bo); });
    // Two clips so BN statistics mix frames from different videos.
    Var x(rnd({6, 8, 6, 6}, "bl.x"), true);
    Network* net = p->net.get();
    p->loss = [=] {
      return weighted_sum(net->forward(x, {.training = true}).logits, derive_seed(seed, "bl.r"), values);
    };
    p->vars = {{"input", x}};
    add_params(*p);
    return p;
  }
  if (module == "full-tiny") {
    ArchSpec spec = parse_arch("blvnet-tam-tiny");
    spec.n_pairs = 2;
    spec.num_classes = 3;
    p->net = build([&](const BuildOptions& bo) { return build_network(spec, bo); });
    Var x(rnd({8, 3, 32, 32}, "full.x"), false);
    Network* net = p->net.get();
    // Inference-mode BN: batch statistics are covered by bl-module.
    p->loss = [=] {
      const int labels[2] = {0, 2};
      return ops::cross_entropy(net->forward(x, {.training = false}).logits, labels);
    };
    add_params(*p);
    return p;
  }
  throw ValueError("unknown gradcheck suite '" + std::string(module) + "' (tam, bl-module, full-tiny)");
}

}  // namespace

Options defaults_for(DType dtype) {
  Options o;
  if (dtype == DType::f32) {
    o.threshold = 1e-3;
  }
  return o;
}

bool Report::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupResult& g) { return g.passed; });
}

double Report::max_rel_error() const {
  double m = 0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

Report check(std::string module, const LossFn& loss, const std::vector<std::pair<std::string, Var>>& vars,
             const Options& options) {
  return check_against(std::move(module), loss, vars, loss, vars, options);
}

Report check_against(std::string module, const LossFn& loss, const std::vector<std::pair<std::string, Var>>& vars,
                     const LossFn& reference, const std::vector<std::pair<std::string, Var>>& reference_vars,
                     const Options& options) {
  if (reference_vars.size() != vars.size()) throw ValueError("gradcheck: reference has a different variable list");
  const auto t0 = std::chrono::steady_clock::now();
  Report report;
  report.module = std::move(module);
  report.threshold = options.threshold;
  if (!vars.empty()) report.dtype = vars.front().second.dtype();

  for (const auto& [name, v] : vars) {
    if (!v.requires_grad()) throw ValueError("gradcheck: " + name + " does not require a gradient");
    Var var = v;
    var.zero_grad();
  }
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var l;
    {
      TapeScope scope(tape);
      l = loss();
    }
    tape.backward(l);
    for (const auto& [name, v] : vars) analytic.push_back(v.grad());
  }

  const double h = options.step;
  for (std::size_t g = 0; g < vars.size(); ++g) {
    const auto& name = vars[g].first;
    Var v = reference_vars[g].second;
    if (reference_vars[g].first != name || v.shape() != vars[g].second.shape())
      throw ValueError("gradcheck: reference variable " + reference_vars[g].first + " does not match " + name);
    const Tensor original = v.value();
    const auto grad = analytic[g].to_vector();
    double gmax = 0;
    for (double x : grad) gmax = std::max(gmax, std::abs(x));
    const double floor = 1e-3 * gmax + 1e-12;
    GroupResult res{name, 0, 0.0, true};
    // Retries at smaller steps before reporting: a crossing of a ReLU kink
    // shrinks with the step, a wrong gradient does not.
    auto record = [&](double a, double fl, const std::function<Tensor(double)>& perturbed) {
      double err = std::numeric_limits<double>::infinity();
      for (double step = h; step >= h * 1e-2 && err >= options.threshold; step *= 0.1) {
        v.assign(perturbed(step));
        const double fp = eval(reference);
        v.assign(perturbed(-step));
        const double fm = eval(reference);
        const double n = (fp - fm) / (2 * step);
        err = std::min(err, std::abs(a - n) / std::max({std::abs(a), std::abs(n), fl}));
      }
      res.max_rel_error = std::max(res.max_rel_error, err);
      ++res.checked;
    };

    std::vector<std::int64_t> idx(static_cast<std::size_t>(original.numel()));
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_elements > 0 && idx.size() > static_cast<std::size_t>(options.max_elements)) {
      Rng rng(derive_seed(options.seed, name));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(options.max_elements));
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) {
      record(grad[static_cast<std::size_t>(i)], floor, [&](double step) { return with_element(original, i, step); });
    }
    for (int d = 0; d < options.directions; ++d) {
      Rng rng(derive_seed(derive_seed(options.seed, name), 0xd1ULL, static_cast<std::uint64_t>(d)));
      std::normal_distribution<double> nd;
      std::vector<double> dir(grad.size());
      double norm = 0;
      for (auto& e : dir) e = nd(rng), norm += e * e;
      norm = std::sqrt(norm);
      for (auto& e : dir) e /= norm;
      double a = 0, mag = 0;
      for (std::size_t i = 0; i < dir.size(); ++i) a += grad[i] * dir[i], mag += std::abs(grad[i] * dir[i]);
      record(a, 1e-3 * mag + 1e-12, [&](double step) { return with_direction(original, dir, step); });
    }
    v.assign(original);
    res.passed = res.max_rel_error < options.threshold;
    report.groups.push_back(std::move(res));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<std::string> suite_names() { return {"tam", "bl-module", "full-tiny"}; }

Report run_suite(std::string_view module, DType dtype, std::uint64_t seed) {
  Options opt = defaults_for(dtype);
  opt.seed = seed;
  if (module == "full-tiny") opt.max_elements = 2;
  auto p = make_problem(module, dtype, dtype, seed);
  if (dtype == DType::f64) return check(std::string(module), p->loss, p->vars, opt);
  auto ref = make_problem(module, dtype, DType::f64, seed);
  return check_against(std::string(module), p->loss, p->vars, ref->loss, ref->vars, opt);
}

}  // namespace blvnet::gradcheck
