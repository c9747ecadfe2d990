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
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blvnet/arch.hpp"
#include "blvnet/autograd.hpp"
#include "blvnet/graph.hpp"
#include "blvnet/tam.hpp"

namespace blvnet {

struct ParamEntry {
  std::string name;
  Var var;
  /// Running statistics: serialized but not trained or counted as parameters.
  bool buffer = false;
};

/// Named parameter and buffer store in registration order.
class ParamStore {
 public:
  Var add(std::string name, Tensor value, bool buffer);
  Var get(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<Var> trainable() const;
  std::int64_t param_count() const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// 1-based frame numbers consumed by one pipeline instance.
struct FramePair {
  int big = 0;
  int little = 0;
};

struct RoutingPlan {
  std::vector<FramePair> pairs;
  /// output_source[t - 1] is the frame whose instance produced output t.
  std::vector<int> output_source;
};

/// Pair k reads frames (2k-1, 2k): the odd frame feeds the Big branch and the
/// even frame the Little branch (swapped by spec.swap_branches); the pair's
/// output stands for both frames. Single-frame variants map t to (t, t).
RoutingPlan route_frames(int num_frames, const ArchSpec& spec);

struct BuildOptions {
  std::uint64_t seed = 0;
  DType dtype = DType::f32;
  tam::TamInit tam_init = tam::TamInit::identity;
  /// When false only the graph is built; the store stays empty.
  bool allocate_params = true;
};

struct ForwardOptions {
  bool training = false;
  /// Also return every stage output, expanded to one tensor per input frame.
  bool capture_stages = false;
};

struct ForwardResult {
  Var logits;  ///< B×num_classes consensus logits
  std::vector<std::pair<std::string, Var>> stages;
};

struct StageMark {
  std::string name;
  int node = -1;
};

class Network {
 public:
  Network(ArchSpec spec, Graph graph, ParamStore params, std::vector<StageMark> stages, DType dtype, Shape input_shape);

  const ArchSpec& spec() const { return spec_; }
  const Graph& graph() const { return graph_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }
  const std::vector<StageMark>& stages() const { return stages_; }
  DType dtype() const { return dtype_; }
  /// Single-video input shape, frames×3×input×input for full networks.
  const Shape& input_shape() const { return input_shape_; }

  /// frames: (B*T)×3×H×W with each video's T frames contiguous.
  ForwardResult forward(const Var& frames, const ForwardOptions& options = {}) const;

 private:
  ArchSpec spec_;
  Graph graph_;
  ParamStore params_;
  std::vector<StageMark> stages_;
  DType dtype_;
  Shape input_shape_;
};

/// Throws ValueError for invalid specs.
Network build_network(const ArchSpec& spec, const BuildOptions& options = {});

/// A single bL-module on its own: [TAM] -> Big/Little branches -> merge ->
/// fusion block. Input and output are (frames)×C×size×size activations.
struct BlModuleSpec {
  ArchSpec arch;  ///< supplies alpha, beta, r and whether TAM is present
  std::int64_t in_channels = 16;
  std::int64_t out_channels = 64;
  int blocks = 2;
  int stride = 2;
  std::int64_t frames = 2;
  std::int64_t size = 8;
};
Network build_bl_module(const BlModuleSpec& spec, const BuildOptions& options = {});

/// Layer graph alone, for static analysis.
Graph build_graph(const ArchSpec& spec);

/// One video (T×3×H×W) to a class distribution: per-instance logits are
/// averaged, then softmaxed.
Tensor forward_video(const Network& net, const Tensor& frames);

/// Checks that outputs of the two frames of each pair are bitwise identical.
/// Throws Error naming the first offending stage.
void check_pair_duplication(const Network& net, const ForwardResult& result);

}  // namespace blvnet
