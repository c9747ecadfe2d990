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

#include "blvnet/analyzer.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "blvnet/error.hpp"

namespace blvnet::analyzer {
namespace {

std::int64_t node_macs(const Node& n, const Shape& in, const Shape& out) {
  switch (n.kind) {
    case OpKind::conv: return shape_numel(out) * n.kernel * n.kernel * n.in_channels;
    case OpKind::tam: return shape_numel(out) * n.range;
    case OpKind::linear: return in[0] * n.in_channels * n.out_channels;
    default: return 0;
  }
}

std::int64_t node_elementwise(const Node& n, const Shape& in, const Shape& out) {
  switch (n.kind) {
    case OpKind::batch_norm:
    case OpKind::relu:
    case OpKind::add:
    case OpKind::tam:
    case OpKind::resize: return shape_numel(out);
    case OpKind::avg_pool:
    case OpKind::max_pool: return shape_numel(out) * n.kernel * n.kernel;
    case OpKind::global_avg_pool:
    case OpKind::mean_over_time: return shape_numel(in);
    default: return 0;
  }
}

std::vector<int> storage_roots(const Graph& g) {
  std::vector<int> root(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.nodes[i];
    root[i] = n.view && !n.inputs.empty() ? root[static_cast<std::size_t>(n.inputs[0])] : static_cast<int>(i);
  }
  return root;
}

std::string human(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  if (v >= 1e9) {
    os << v / 1e9 << "G";
  } else if (v >= 1e6) {
    os << v / 1e6 << "M";
  } else if (v >= 1e3) {
    os << v / 1e3 << "K";
  } else {
    os << std::setprecision(0) << v;
  }
  return os.str();
}

}  // namespace

std::int64_t node_params(const Node& n) {
  switch (n.kind) {
    case OpKind::conv:
      return n.out_channels * n.in_channels * n.kernel * n.kernel + (n.bias ? n.out_channels : 0);
    case OpKind::batch_norm: return 2 * n.in_channels;
    case OpKind::tam: return tam::tam_param_count(n.in_channels, n.range);
    case OpKind::linear: return n.in_channels * n.out_channels + n.out_channels;
    default: return 0;
  }
}

std::int64_t count_params(const Graph& g) {
  std::int64_t total = 0;
  for (const auto& n : g.nodes) total += node_params(n);
  return total;
}

std::int64_t count_params(const Network& net) { return count_params(net.graph()); }

CostReport analyze_graph(const Graph& g, const Shape& input) {
  const auto shapes = infer_shapes(g, input);
  CostReport r;
  r.input = input;
  std::int64_t fc_macs = 0, fc_once = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.kind == OpKind::input || n.probe) continue;
    const Shape& in = shapes[static_cast<std::size_t>(n.inputs.at(0))];
    LayerCost row{n.name, std::string(op_name(n.kind)), in, shapes[i], node_params(n),
                  node_macs(n, in, shapes[i]), node_elementwise(n, in, shapes[i])};
    r.params += row.params;
    r.macs += row.macs;
    r.elementwise += row.elementwise;
    if (n.kind == OpKind::tam) {
      r.tam_params += row.params;
      r.tam_macs += row.macs;
    }
    if (n.kind == OpKind::linear) {
      fc_macs += row.macs;
      fc_once += n.in_channels * n.out_channels;
    }
    r.layers.push_back(std::move(row));
  }
  r.macs_fc_once = r.macs - fc_macs + fc_once;
  r.peak_activation_elems = activation_memory(g, input, MemoryMode::inference);
  r.training_activation_elems = activation_memory(g, input, MemoryMode::training);
  return r;
}

namespace {

CostReport report_for(const Graph& g, const ArchSpec& spec, const Shape& input) {
  CostReport r = analyze_graph(g, input);
  r.arch = arch_name(spec);
  r.instances = spec.n_pairs;
  // Everything up to and including the per-instance classifier scales with
  // the instance count; only post-consensus work is fixed.
  std::int64_t fixed = 0;
  bool after_consensus = false;
  for (const auto& row : r.layers) {
    if (after_consensus) fixed += row.macs;
    if (row.type == op_name(OpKind::mean_over_time)) after_consensus = true;
  }
  r.macs_per_pair = (r.macs - fixed) / r.instances;
  r.fixed_macs = r.macs - r.macs_per_pair * r.instances;
  return r;
}

Shape spec_input(const ArchSpec& spec) { return {spec.num_frames(), 3, spec.input_size, spec.input_size}; }

}  // namespace

CostReport count_macs(const Network& net, const Shape& input) { return report_for(net.graph(), net.spec(), input); }

CostReport count_macs(const Network& net) { return count_macs(net, net.input_shape()); }

CostReport count_macs(const ArchSpec& spec) { return report_for(build_graph(spec), spec, spec_input(spec)); }

std::int64_t activation_memory(const Graph& g, const Shape& input, MemoryMode mode) {
  const auto shapes = infer_shapes(g, input);
  if (mode == MemoryMode::training) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Node& n = g.nodes[i];
      if (n.view || n.probe) continue;
      total += shape_numel(shapes[i]);
    }
    return total;
  }
  const auto roots = storage_roots(g);
  const auto last = last_uses(g);
  std::vector<int> root_last(g.size(), -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.nodes[i].probe) continue;
    auto& rl = root_last[static_cast<std::size_t>(roots[i])];
    rl = std::max({rl, last[i], static_cast<int>(i)});
  }
  if (g.output >= 0) root_last[static_cast<std::size_t>(roots[static_cast<std::size_t>(g.output)])] = static_cast<int>(g.size());
  std::int64_t live = 0, peak = 0;
  std::vector<std::vector<std::size_t>> frees(g.size() + 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (roots[i] == static_cast<int>(i) && !g.nodes[i].probe) frees[static_cast<std::size_t>(root_last[i])].push_back(i);
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Node& n = g.nodes[i];
    if (n.probe) continue;
    if (roots[i] == static_cast<int>(i)) live += shape_numel(shapes[i]);
    peak = std::max(peak, live);
    for (auto f : frees[i]) live -= shape_numel(shapes[f]);
  }
  return peak;
}

std::int64_t activation_memory(const Network& net, MemoryMode mode) {
  return activation_memory(net.graph(), net.input_shape(), mode);
}

std::int64_t activation_memory(const ArchSpec& spec, MemoryMode mode) {
  return activation_memory(build_graph(spec), spec_input(spec), mode);
}

std::string to_json(const CostReport& r, const FormatOptions& options) {
  using nlohmann::json;
  const std::int64_t k = options.double_flops ? 2 : 1;
  json layers = json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"name", l.name},
                      {"type", l.type},
                      {"in_shape", l.in_shape},
                      {"out_shape", l.out_shape},
                      {"params", l.params},
                      {"macs", l.macs},
                      {"macs_per_pair", r.instances ? l.macs / r.instances : l.macs},
                      {"elementwise", l.elementwise}});
  }
  json j = {{"arch", r.arch},
            {"input", r.input},
            {"instances", r.instances},
            {"params", r.params},
            {"macs", r.macs},
            {"flops", r.macs * k},
            {"flops_convention", options.double_flops ? "mul+add" : "macs"},
            {"macs_per_pair", r.macs_per_pair},
            {"fixed_macs", r.fixed_macs},
            {"macs_fc_once", r.macs_fc_once},
            {"elementwise", r.elementwise},
            {"tam_params", r.tam_params},
            {"tam_macs", r.tam_macs},
            {"peak_activation_elems", r.peak_activation_elems},
            {"training_activation_elems", r.training_activation_elems},
            {"layers", layers}};
  return j.dump(2);
}

std::string to_text(const CostReport& r, const FormatOptions& options) {
  const std::int64_t k = options.double_flops ? 2 : 1;
  std::ostringstream os;
  std::size_t w = 4;
  for (const auto& l : r.layers) w = std::max(w, l.name.size());
  if (options.layers) {
    os << std::left << std::setw(static_cast<int>(w)) << "name" << "  " << std::setw(16) << "type" << std::setw(22)
       << "input" << std::setw(22) << "output" << std::right << std::setw(12) << "params" << std::setw(16)
       << (options.double_flops ? "flops/pair" : "macs/pair") << "\n";
  }
  for (const auto& l : r.layers) {
    if (!options.layers) break;
    os << std::left << std::setw(static_cast<int>(w)) << l.name << "  " << std::setw(16) << l.type << std::setw(22)
       << shape_str(l.in_shape) << std::setw(22) << shape_str(l.out_shape) << std::right << std::setw(12) << l.params
       << std::setw(16) << (r.instances ? l.macs / r.instances : l.macs) * k << "\n";
  }
  os << "arch " << r.arch << "  input " << shape_str(r.input) << "  instances " << r.instances << "\n";
  os << "total params " << r.params << " (" << human(static_cast<double>(r.params)) << ")  "
     << (options.double_flops ? "flops " : "macs ") << r.macs * k << " (" << human(static_cast<double>(r.macs * k))
     << ")\n";
  os << "macs_per_pair " << r.macs_per_pair << "  fixed_macs " << r.fixed_macs << "  macs_fc_once " << r.macs_fc_once
     << "  elementwise " << r.elementwise << "\n";
  os << "tam_params " << r.tam_params << "  tam_macs " << r.tam_macs << "\n";
  os << "peak_activation_elems " << r.peak_activation_elems << "  training_activation_elems "
     << r.training_activation_elems << "\n";
  return os.str();
}

std::string to_csv(const CostReport& r) {
  auto dims = [](const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out;
  };
  std::ostringstream os;
  os << "name,type,in_shape,out_shape,params,macs,macs_per_pair,elementwise\n";
  for (const auto& l : r.layers) {
    os << l.name << ',' << l.type << ',' << dims(l.in_shape) << ',' << dims(l.out_shape) << ',' << l.params << ','
       << l.macs << ',' << (r.instances ? l.macs / r.instances : l.macs) << ',' << l.elementwise << "\n";
  }
  return os.str();
}

}  // namespace blvnet::analyzer
