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
#include <vector>

#include "blvnet/graph.hpp"
#include "blvnet/network.hpp"

/// Static cost model over layer metadata. Nothing is executed.
///
/// MACs are multiply-accumulates and are what "FLOPs" means throughout.
/// Elementwise work (BN, ReLU, sums, pooling, resampling) is reported in its
/// own column and not folded into MACs.
namespace blvnet::analyzer {

struct LayerCost {
  std::string name;
  std::string type;
  Shape in_shape;
  Shape out_shape;
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t elementwise = 0;
};

struct CostReport {
  std::string arch;
  Shape input;
  std::int64_t instances = 0;  ///< frame pairs, or frames for single-frame variants
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t macs_per_pair = 0;
  /// macs - instances * macs_per_pair: classifier/consensus work that does
  /// not scale with the frame count.
  std::int64_t fixed_macs = 0;
  /// Same network with the classifier applied once to averaged features.
  std::int64_t macs_fc_once = 0;
  std::int64_t elementwise = 0;
  std::int64_t tam_params = 0;
  std::int64_t tam_macs = 0;
  std::int64_t peak_activation_elems = 0;      ///< inference mode
  std::int64_t training_activation_elems = 0;  ///< training mode
  std::vector<LayerCost> layers;               ///< one row per non-input, non-probe node
};

enum class MemoryMode { inference, training };

/// Parameter count of one node from its metadata alone.
std::int64_t node_params(const Node& n);

/// Sum of parameter element counts, from metadata.
std::int64_t count_params(const Graph& g);
std::int64_t count_params(const Network& net);

CostReport count_macs(const Network& net);
/// Same report without allocating weights.
CostReport count_macs(const ArchSpec& spec);
CostReport count_macs(const Network& net, const Shape& input);
CostReport analyze_graph(const Graph& g, const Shape& input);

/// inference: peak of simultaneously live tensors over the execution order,
/// with views sharing their source's storage. training: input plus every
/// stored forward output (views excluded), as kept for backward.
std::int64_t activation_memory(const Graph& g, const Shape& input, MemoryMode mode);
std::int64_t activation_memory(const Network& net, MemoryMode mode);
std::int64_t activation_memory(const ArchSpec& spec, MemoryMode mode);

struct FormatOptions {
  /// Report mul and add separately (2 × MACs) in the FLOP columns.
  bool double_flops = false;
  /// Text only: include the per-layer table.
  bool layers = true;
};

std::string to_json(const CostReport& r, const FormatOptions& options = {});
std::string to_text(const CostReport& r, const FormatOptions& options = {});
std::string to_csv(const CostReport& r);

}  // namespace blvnet::analyzer
