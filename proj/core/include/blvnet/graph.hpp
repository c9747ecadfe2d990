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
#include <vector>

#include "blvnet/tensor.hpp"

/// Layer graph shared by execution and static cost analysis.
///
/// Node i produces value i. Shapes are stated for a single video: the
/// leading axis of every value is that video's frame (or instance) count.
/// At run time B videos are stacked clip-major along the same axis.
namespace blvnet {

enum class OpKind {
  input,
  conv,
  batch_norm,
  relu,
  add,
  tam,
  resize,      ///< bilinear resample of inputs[0] to the spatial size of size_ref
  avg_pool,
  max_pool,
  select,      ///< per-clip gather along the leading axis
  global_avg_pool,
  linear,
  mean_over_time,
};

std::string_view op_name(OpKind k);

struct Node {
  std::string name;
  OpKind kind = OpKind::input;
  std::vector<int> inputs;

  // conv / linear / batch_norm / tam
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int range = 0;
  bool bias = false;

  // tam / select / mean_over_time: frames per clip of inputs[0]
  std::int64_t clip_frames = 0;
  // select: per-clip source indices
  std::vector<std::int64_t> pattern;

  int size_ref = -1;
  /// Output aliases (or copies) existing storage; no memory is charged.
  bool view = false;
  /// Only evaluated on request; never consumed by other nodes.
  bool probe = false;
};

struct Graph {
  std::vector<Node> nodes;
  int output = -1;

  int add(Node n);
  const Node& at(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes.size(); }
};

/// Single-video shapes of every value; the input is frames×3×H×W.
std::vector<Shape> infer_shapes(const Graph& g, const Shape& input);

/// Last node index that reads each value (probes excluded); -1 if unread.
std::vector<int> last_uses(const Graph& g);

}  // namespace blvnet
