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

#include "blvnet/graph.hpp"

#include <array>

#include "blvnet/error.hpp"
#include "blvnet/ops.hpp"

namespace blvnet {
namespace {

void expect_rank(const Node& n, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw ShapeError(n.name + ": expected rank " + std::to_string(rank) + " input, got " + shape_str(s));
  }
}

void expect_channels(const Node& n, const Shape& s, std::int64_t c) {
  if (s[1] != c) {
    throw ShapeError(n.name + ": expected " + std::to_string(c) + " channels, got " + shape_str(s));
  }
}

}  // namespace

std::string_view op_name(OpKind k) {
  static constexpr std::array<std::string_view, 13> names{
      "input", "conv", "batch_norm", "relu", "add", "tam", "resize",
      "avg_pool", "max_pool", "select", "global_avg_pool", "linear", "mean_over_time"};
  return names[static_cast<std::size_t>(k)];
}

int Graph::add(Node n) {
  const int id = static_cast<int>(nodes.size());
  for (int in : n.inputs) {
    if (in < 0 || in >= id) throw ValueError(n.name + ": input refers to an undefined value");
  }
  if (n.size_ref >= id) throw ValueError(n.name + ": size reference refers to an undefined value");
  nodes.push_back(std::move(n));
  return id;
}

std::vector<Shape> infer_shapes(const Graph& g, const Shape& input) {
  std::vector<Shape> shapes(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.nodes[i];
    const Shape& x = n.inputs.empty() ? input : shapes[static_cast<std::size_t>(n.inputs[0])];
    Shape out;
    switch (n.kind) {
      case OpKind::input:
        expect_rank(n, input, 4);
        out = input;
        break;
      case OpKind::conv:
      case OpKind::avg_pool:
      case OpKind::max_pool: {
        expect_rank(n, x, 4);
        if (n.kind == OpKind::conv) expect_channels(n, x, n.in_channels);
        const auto oh = ops::conv_out_size(x[2], n.kernel, n.stride, n.padding);
        const auto ow = ops::conv_out_size(x[3], n.kernel, n.stride, n.padding);
        if (oh < 1 || ow < 1) throw ShapeError(n.name + ": input " + shape_str(x) + " too small for the window");
        out = {x[0], n.kind == OpKind::conv ? n.out_channels : x[1], oh, ow};
        break;
      }
      case OpKind::batch_norm:
      case OpKind::tam:
        expect_rank(n, x, 4);
        expect_channels(n, x, n.in_channels);
        if (n.kind == OpKind::tam && x[0] != n.clip_frames) {
          throw ShapeError(n.name + ": expected " + std::to_string(n.clip_frames) + " frames, got " + shape_str(x));
        }
        out = x;
        break;
      case OpKind::relu:
        out = x;
        break;
      case OpKind::add: {
        const Shape& y = shapes[static_cast<std::size_t>(n.inputs[1])];
        if (x != y) throw ShapeError(n.name + ": cannot add " + shape_str(x) + " and " + shape_str(y));
        out = x;
        break;
      }
      case OpKind::resize: {
        const Shape& ref = shapes[static_cast<std::size_t>(n.size_ref)];
        out = {x[0], x[1], ref[2], ref[3]};
        break;
      }
      case OpKind::select:
        if (x[0] != n.clip_frames) {
          throw ShapeError(n.name + ": expected " + std::to_string(n.clip_frames) + " frames, got " + shape_str(x));
        }
        for (auto p : n.pattern)
          if (p < 0 || p >= n.clip_frames) throw ShapeError(n.name + ": frame index out of range");
        out = x;
        out[0] = static_cast<std::int64_t>(n.pattern.size());
        break;
      case OpKind::global_avg_pool:
        expect_rank(n, x, 4);
        out = {x[0], x[1]};
        break;
      case OpKind::linear:
        expect_rank(n, x, 2);
        if (x[1] != n.in_channels) throw ShapeError(n.name + ": expected " + std::to_string(n.in_channels) + " features");
        out = {x[0], n.out_channels};
        break;
      case OpKind::mean_over_time:
        if (x[0] != n.clip_frames) throw ShapeError(n.name + ": frame count mismatch");
        out = x;
        out[0] = 1;
        break;
    }
    shapes[i] = std::move(out);
  }
  return shapes;
}

std::vector<int> last_uses(const Graph& g) {
  std::vector<int> last(g.size(), -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.probe) continue;
    for (int in : n.inputs) last[static_cast<std::size_t>(in)] = static_cast<int>(i);
    if (n.size_ref >= 0) last[static_cast<std::size_t>(n.size_ref)] = static_cast<int>(i);
  }
  return last;
}

}  // namespace blvnet
