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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blvnet/dataio.hpp"
#include "blvnet/network.hpp"

namespace blvnet::train {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = true;
  int epochs = 30;
  std::vector<int> milestones{10, 20};
  /// The learning rate is divided by this at every milestone.
  double lr_decay = 10.0;
  int batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr / lr_decay^(milestones <= epoch).
double lr_schedule(int epoch, const TrainConfig& cfg);

struct SgdState {
  std::vector<Tensor> velocity;
};

/// d = g + wd*theta;  v <- mu*v + d;
/// theta <- theta - lr*(d + mu*v)  (Nesterov)  or  theta - lr*v.
/// Updates params in place.
void sgd_nesterov_step(std::span<const Var> params, std::span<const Tensor> grads, SgdState& state,
                       const TrainConfig& cfg, double lr);

/// Clips as network-ready tensors (T×3×H×W each).
struct Dataset {
  std::vector<Tensor> clips;
  std::vector<int> labels;
  std::size_t size() const { return clips.size(); }
};

/// Samples num_frames frames per clip (segment centers) and normalizes.
Dataset make_dataset(const std::vector<data::Clip>& clips, int num_frames);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_acc = 0;
};

struct VariantReport {
  std::string arch;
  std::vector<EpochLog> epochs;
  double first_batch_loss = 0;
  double final_val_acc = 0;
  double seconds = 0;
};

/// Fraction of clips whose arg-max class matches the label (eval mode).
double evaluate(const Network& net, const Dataset& data, int batch_size);

/// Trains one network in place. Throws NumericError naming the epoch and
/// step if the loss or any activation stops being finite.
VariantReport train_network(Network& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

struct ToyOptions {
  /// When set, each variant writes <arch>.csv and <arch>.ckpt here.
  std::optional<std::filesystem::path> out_dir;
  bool verbose = false;
};

/// Builds each spec with the same seed and trains it under the same config.
std::vector<VariantReport> train_toy(const std::vector<ArchSpec>& specs, const Dataset& train, const Dataset& val,
                                     const TrainConfig& cfg, const ToyOptions& options = {});

/// The fixed desk-scale experiment: tiny backbones on synthetic motion clips.
struct ToySetup {
  int train_clips = 960;
  int val_clips = 200;
  int frames = 8;
  int size = 32;
  data::MotionConfig motion{};
  TrainConfig config{};
};
ToySetup default_toy_setup();

/// tsn-tiny, blvnet-tiny and blvnet-tam-tiny configured for setup.
std::vector<ArchSpec> toy_variants(const ToySetup& setup);

struct ToyData {
  Dataset train;
  Dataset val;
};

/// Train and validation motion clips, seeded from setup.config.seed.
ToyData make_toy_data(const ToySetup& setup);

/// The whole ablation: toy_variants(setup) trained on make_toy_data(setup).
std::vector<VariantReport> run_toy(const ToySetup& setup, const ToyOptions& options = {});

void write_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace blvnet::train
