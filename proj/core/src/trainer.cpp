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

#include "blvnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "blvnet/checkpoint.hpp"
#include "blvnet/error.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"

namespace blvnet::train {
namespace {

Tensor stack_clips(const Dataset& data, std::span<const std::size_t> order) {
  const Shape& s = data.clips[order[0]].shape();
  const std::int64_t per = data.clips[order[0]].numel();
  Tensor out({s[0] * static_cast<std::int64_t>(order.size()), s[1], s[2], s[3]}, DType::f32);
  auto dst = out.mutable_data<float>();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Tensor& c = data.clips[order[i]];
    if (c.shape() != s) throw ShapeError("clips in a batch differ in shape");
    const auto src = c.to(DType::f32);
    std::copy_n(src.data<float>().begin(), per, dst.begin() + static_cast<std::ptrdiff_t>(i) * per);
  }
  return out;
}

int argmax_row(const Tensor& logits, std::int64_t row) {
  const auto k = logits.dim(1);
  int best = 0;
  for (std::int64_t j = 1; j < k; ++j)
    if (logits.item(row * k + j) > logits.item(row * k + best)) best = static_cast<int>(j);
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ValueError("learning rate must be positive");
  if (momentum < 0 || momentum >= 1) throw ValueError("momentum must lie in [0, 1)");
  if (weight_decay < 0) throw ValueError("weight decay must be non-negative");
  if (epochs < 0) throw ValueError("epochs must be non-negative");
  if (batch_size < 1) throw ValueError("batch size must be positive");
  if (!(lr_decay > 0)) throw ValueError("lr decay must be positive");
  for (std::size_t i = 1; i < milestones.size(); ++i)
    if (milestones[i] <= milestones[i - 1]) throw ValueError("milestones must be strictly increasing");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ValueError("epoch must be non-negative");
  double lr = cfg.lr;
  for (int m : cfg.milestones)
    if (epoch >= m) lr /= cfg.lr_decay;
  return lr;
}

void sgd_nesterov_step(std::span<const Var> params, std::span<const Tensor> grads, SgdState& state,
                       const TrainConfig& cfg, double lr) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient counts differ");
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.shape(), p.dtype());
  }
  if (state.velocity.size() != params.size()) throw ShapeError("optimizer state does not match the parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& theta = params[i].value();
    if (grads[i].shape() != theta.shape()) {
      throw ShapeError("gradient " + shape_str(grads[i].shape()) + " does not match parameter " +
                       shape_str(theta.shape()));
    }
    Tensor next(theta.shape(), theta.dtype());
    Tensor vel(theta.shape(), theta.dtype());
    dispatch(theta.dtype(), [&]<typename T>() {
      const auto th = theta.data<T>();
      const auto g = grads[i].to(theta.dtype());
      const auto gd = g.template data<T>();
      const auto v0 = state.velocity[i].to(theta.dtype());
      const auto vd = v0.template data<T>();
      auto out = next.mutable_data<T>();
      auto vout = vel.mutable_data<T>();
      for (std::size_t k = 0; k < th.size(); ++k) {
        const double d = static_cast<double>(gd[k]) + cfg.weight_decay * static_cast<double>(th[k]);
        const double v = cfg.momentum * static_cast<double>(vd[k]) + d;
        const double step = cfg.nesterov ? d + cfg.momentum * v : v;
        vout[k] = static_cast<T>(v);
        out[k] = static_cast<T>(static_cast<double>(th[k]) - lr * step);
      }
    });
    state.velocity[i] = std::move(vel);
    Var p = params[i];
    p.assign(std::move(next));
  }
}

Dataset make_dataset(const std::vector<data::Clip>& clips, int num_frames) {
  Dataset d;
  for (const auto& c : clips) {
    const auto plan = data::uniform_sample(static_cast<std::int64_t>(c.frames.size()), num_frames,
                                           data::SampleMode::infer);
    std::vector<data::Image> picked;
    for (auto i : plan.indices) picked.push_back(c.frames[static_cast<std::size_t>(i)]);
    d.clips.push_back(data::frames_to_tensor(picked));
    d.labels.push_back(c.label);
  }
  return d;
}

double evaluate(const Network& net, const Dataset& data, int batch_size) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t b = 0; b < idx.size(); b += static_cast<std::size_t>(batch_size)) {
    const auto e = std::min(idx.size(), b + static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> part(idx.data() + b, e - b);
    const auto res = net.forward(Var(stack_clips(data, part).to(net.dtype())));
    for (std::size_t i = 0; i < part.size(); ++i)
      if (argmax_row(res.logits.value(), static_cast<std::int64_t>(i)) == data.labels[part[i]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

VariantReport train_network(Network& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw ValueError("training set is empty");
  VariantReport report;
  report.arch = arch_name(net.spec());
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = net.params().trainable();
  SgdState state;
  std::vector<std::size_t> order(train.size());
  bool first = true;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0x5eedULL, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    int step = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const auto e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> part(order.data() + b, e - b);
      std::vector<int> labels;
      for (auto i : part) labels.push_back(train.labels[i]);
      try {
        Tape tape;
        Var loss;
        Tensor logits;
        {
          TapeScope scope(tape);
          const auto res = net.forward(Var(stack_clips(train, part).to(net.dtype())), {.training = true});
          loss = ops::cross_entropy(res.logits, labels);
          logits = res.logits.value();
        }
        const double l = loss.value().item(0);
        if (!std::isfinite(l)) throw NumericError("loss is not finite");
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (const auto& p : params) grads.push_back(p.grad());
        sgd_nesterov_step(params, grads, state, cfg, lr);
        for (auto p : params) p.zero_grad();
        if (first) report.first_batch_loss = l, first = false;
        loss_sum += l * static_cast<double>(part.size());
        for (std::size_t i = 0; i < part.size(); ++i)
          if (argmax_row(logits, static_cast<std::int64_t>(i)) == labels[i]) ++correct;
        seen += part.size();
      } catch (const NumericError& err) {
        throw NumericError(report.arch + ": training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + ": " + err.what());
      }
    }
    EpochLog row{epoch, lr, loss_sum / static_cast<double>(seen), static_cast<double>(correct) / static_cast<double>(seen),
                 evaluate(net, val, cfg.batch_size)};
    report.epochs.push_back(row);
  }
  report.final_val_acc = report.epochs.empty() ? evaluate(net, val, cfg.batch_size) : report.epochs.back().val_acc;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<VariantReport> train_toy(const std::vector<ArchSpec>& specs, const Dataset& train, const Dataset& val,
                                     const TrainConfig& cfg, const ToyOptions& options) {
  std::vector<VariantReport> reports;
  for (const auto& spec : specs) {
    BuildOptions bo;
    bo.seed = cfg.seed;
    Network net = build_network(spec, bo);
    auto report = train_network(net, train, val, cfg);
    if (options.verbose) {
      for (const auto& e : report.epochs) {
        std::fprintf(stderr, "%s epoch %d lr %.5f loss %.4f train %.3f val %.3f\n", report.arch.c_str(), e.epoch, e.lr,
                     e.train_loss, e.train_acc, e.val_acc);
      }
    }
    if (options.out_dir) {
      std::filesystem::create_directories(*options.out_dir);
      write_log_csv(*options.out_dir / (report.arch + ".csv"), report.epochs);
      save_checkpoint(*options.out_dir / (report.arch + ".ckpt"), net);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

ToySetup default_toy_setup() {
  ToySetup s;
  s.motion.speed = 2;
  s.config.epochs = 10;
  s.config.milestones = {6, 9};
  return s;
}

std::vector<ArchSpec> toy_variants(const ToySetup& setup) {
  std::vector<ArchSpec> out;
  for (const char* name : {"tsn-tiny", "blvnet-tiny", "blvnet-tam-tiny"}) {
    ArchSpec s = parse_arch(name);
    s.num_classes = 2;
    s.input_size = setup.size;
    s.n_pairs = s.pairs_frames() ? setup.frames / 2 : setup.frames;
    out.push_back(s);
  }
  return out;
}

ToyData make_toy_data(const ToySetup& setup) {
  const auto seed = setup.config.seed;
  auto train = data::synth_motion_dataset(setup.train_clips, setup.frames, setup.size, derive_seed(seed, "toy.train"),
                                          setup.motion);
  auto val =
      data::synth_motion_dataset(setup.val_clips, setup.frames, setup.size, derive_seed(seed, "toy.val"), setup.motion);
  return {make_dataset(train, setup.frames), make_dataset(val, setup.frames)};
}

std::vector<VariantReport> run_toy(const ToySetup& setup, const ToyOptions& options) {
  const auto data = make_toy_data(setup);
  return train_toy(toy_variants(setup), data.train, data.val, setup.config, options);
}

void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,lr,train_loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.8g,%.8g,%.6f,%.6f\n", e.epoch, e.lr, e.train_loss, e.train_acc, e.val_acc);
    out << buf;
  }
}

}  // namespace blvnet::train
