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

#include "blvnet/network.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <random>

#include "blvnet/error.hpp"
#include "blvnet/ops.hpp"
#include "blvnet/random.hpp"

namespace blvnet {

Var ParamStore::add(std::string name, Tensor value, bool buffer) {
  if (index_.count(name)) throw ValueError("duplicate parameter name '" + name + "'");
  Var v(std::move(value), !buffer);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), v, buffer});
  return v;
}

Var ParamStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValueError("no parameter named '" + std::string(name) + "'");
  return entries_[it->second].var;
}

bool ParamStore::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::vector<Var> ParamStore::trainable() const {
  std::vector<Var> out;
  for (const auto& e : entries_)
    if (!e.buffer) out.push_back(e.var);
  return out;
}

std::int64_t ParamStore::param_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_)
    if (!e.buffer) n += e.var.numel();
  return n;
}

RoutingPlan route_frames(int num_frames, const ArchSpec& spec) {
  if (num_frames < 1) throw ShapeError("a clip needs at least one frame");
  RoutingPlan plan;
  if (!spec.pairs_frames()) {
    for (int t = 1; t <= num_frames; ++t) {
      plan.pairs.push_back({t, t});
      plan.output_source.push_back(t);
    }
    return plan;
  }
  if (num_frames % 2 != 0) {
    throw ShapeError(arch_name(spec) + " needs an even number of frames (odd/even pairs), got " +
                     std::to_string(num_frames));
  }
  for (int k = 1; 2 * k <= num_frames; ++k) {
    const int odd = 2 * k - 1, even = 2 * k;
    plan.pairs.push_back(spec.swap_branches ? FramePair{even, odd} : FramePair{odd, even});
    plan.output_source.push_back(odd);
    plan.output_source.push_back(odd);
  }
  return plan;
}

namespace {

class Builder {
 public:
  Builder(const ArchSpec& spec, const BuildOptions& opt) : spec_(spec), opt_(opt) {}

  Graph graph;
  ParamStore params;

  void param(std::string name, const std::function<Tensor()>& make, bool buffer) {
    if (opt_.allocate_params) params.add(std::move(name), make(), buffer);
  }
  std::vector<StageMark> stages;

  int input() {
    Node n;
    n.name = "input";
    n.kind = OpKind::input;
    return graph.add(std::move(n));
  }

  int conv(int x, const std::string& name, std::int64_t in, std::int64_t out, int k, int stride, int pad) {
    param(name + ".weight", [&] {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(out * k * k)));
      return random_tensor({out, in, k, k}, name + ".weight", dist);
    }, false);
    Node n;
    n.name = name;
    n.kind = OpKind::conv;
    n.inputs = {x};
    n.in_channels = in;
    n.out_channels = out;
    n.kernel = k;
    n.stride = stride;
    n.padding = pad;
    return graph.add(std::move(n));
  }

  int bn(int x, const std::string& name, std::int64_t c) {
    param(name + ".weight", [&] { return Tensor::full({c}, 1.0, opt_.dtype); }, false);
    param(name + ".bias", [&] { return Tensor::zeros({c}, opt_.dtype); }, false);
    param(name + ".running_mean", [&] { return Tensor::zeros({c}, opt_.dtype); }, true);
    param(name + ".running_var", [&] { return Tensor::full({c}, 1.0, opt_.dtype); }, true);
    Node n;
    n.name = name;
    n.kind = OpKind::batch_norm;
    n.inputs = {x};
    n.in_channels = c;
    n.out_channels = c;
    return graph.add(std::move(n));
  }

  int relu(int x, const std::string& name) { return simple(OpKind::relu, name, {x}); }
  int add(int a, int b, const std::string& name) { return simple(OpKind::add, name, {a, b}); }

  int conv_bn(int x, const std::string& name, std::int64_t in, std::int64_t out, int k, int stride, int pad,
              bool with_relu) {
    x = conv(x, name + ".conv", in, out, k, stride, pad);
    x = bn(x, name + ".bn", out);
    return with_relu ? relu(x, name + ".relu") : x;
  }

  int tam(int x, const std::string& name, std::int64_t c, std::int64_t frames) {
    param(name + ".weight", [&] {
      return tam::tam_init(c, spec_.r, opt_.tam_init, derive_seed(opt_.seed, name + ".weight"), opt_.dtype)
          .weights()
          .value();
    }, false);
    Node n;
    n.name = name;
    n.kind = OpKind::tam;
    n.inputs = {x};
    n.in_channels = c;
    n.out_channels = c;
    n.range = spec_.r;
    n.clip_frames = frames;
    return graph.add(std::move(n));
  }

  int select(int x, const std::string& name, std::int64_t clip_frames, std::vector<std::int64_t> pattern,
             bool probe = false) {
    Node n;
    n.name = name;
    n.kind = OpKind::select;
    n.inputs = {x};
    n.clip_frames = clip_frames;
    n.pattern = std::move(pattern);
    n.view = true;
    n.probe = probe;
    return graph.add(std::move(n));
  }

  int resize_like(int x, int ref, const std::string& name) {
    Node n;
    n.name = name;
    n.kind = OpKind::resize;
    n.inputs = {x};
    n.size_ref = ref;
    return graph.add(std::move(n));
  }

  int pool(OpKind kind, int x, const std::string& name, int k, int stride, int pad) {
    Node n;
    n.name = name;
    n.kind = kind;
    n.inputs = {x};
    n.kernel = k;
    n.stride = stride;
    n.padding = pad;
    return graph.add(std::move(n));
  }

  int linear(int x, const std::string& name, std::int64_t in, std::int64_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    param(name + ".weight", [&] { return random_tensor({out, in}, name + ".weight", dist); }, false);
    param(name + ".bias", [&] { return random_tensor({out}, name + ".bias", dist); }, false);
    Node n;
    n.name = name;
    n.kind = OpKind::linear;
    n.inputs = {x};
    n.in_channels = in;
    n.out_channels = out;
    return graph.add(std::move(n));
  }

  int mean_over_time(int x, const std::string& name, std::int64_t frames) {
    Node n;
    n.name = name;
    n.kind = OpKind::mean_over_time;
    n.inputs = {x};
    n.clip_frames = frames;
    return graph.add(std::move(n));
  }

  int global_avg_pool(int x, const std::string& name) { return simple(OpKind::global_avg_pool, name, {x}); }

  enum class Shortcut { avg_pool, strided_conv };

  /// 1x1 -> [TAM] -> 3x3 (stride) -> 1x1 with a projection shortcut when the
  /// shape changes.
  int bottleneck(int x, const std::string& name, std::int64_t in, std::int64_t out, int stride, bool last_relu,
                 bool with_tam, std::int64_t frames, Shortcut shortcut) {
    const std::int64_t mid = out / 4;
    int y = conv_bn(x, name + ".1", in, mid, 1, 1, 0, true);
    if (with_tam) y = tam(y, name + ".tam", mid, frames);
    y = conv_bn(y, name + ".2", mid, mid, 3, stride, 1, true);
    y = conv_bn(y, name + ".3", mid, out, 1, 1, 0, false);
    int skip = x;
    if (shortcut == Shortcut::avg_pool) {
      if (stride != 1) skip = pool(OpKind::avg_pool, skip, name + ".down.pool", 3, 2, 1);
      if (in != out) skip = conv_bn(skip, name + ".down", in, out, 1, 1, 0, false);
    } else if (stride != 1 || in != out) {
      skip = conv_bn(skip, name + ".down", in, out, 1, stride, 0, false);
    }
    y = add(y, skip, name + ".add");
    return last_relu ? relu(y, name + ".relu") : y;
  }

  int make_layer(int x, const std::string& name, std::int64_t in, std::int64_t out, int blocks, int stride,
                 bool last_relu, bool with_tam, std::int64_t frames, Shortcut shortcut) {
    for (int b = 0; b < blocks; ++b) {
      const bool last = b == blocks - 1;
      x = bottleneck(x, name + "." + std::to_string(b), b == 0 ? in : out, out, b == 0 ? stride : 1,
                     last ? last_relu : true, with_tam, frames, shortcut);
    }
    return x;
  }

  /// [TAM] -> Big (stride 2, restored bilinearly) + Little (full resolution,
  /// 1x1 channel alignment) -> ReLU -> shared fusion block.
  int bl_module(int x, const std::string& name, std::int64_t in, std::int64_t out, int blocks, int stride,
                std::int64_t frames) {
    if (spec_.has_tam()) x = tam(x, name + ".tam", in, frames);
    const int big_blocks = std::max(1, blocks - 1);
    const int little_blocks = std::max(1, blocks / spec_.beta - 1);
    int big = make_layer(x, name + ".big", in, out, big_blocks, 2, false, false, frames, Shortcut::avg_pool);
    int little = make_layer(x, name + ".little", in, out / spec_.alpha, little_blocks, 1, true, false, frames,
                            Shortcut::avg_pool);
    little = conv_bn(little, name + ".little_e", out / spec_.alpha, out, 1, 1, 0, false);
    big = resize_like(big, little, name + ".big.upsample");
    int y = relu(add(big, little, name + ".merge"), name + ".merge.relu");
    return make_layer(y, name + ".fusion", out, out, 1, stride, true, false, frames, Shortcut::avg_pool);
  }

  void mark(int node, const std::string& name) { stages.push_back({name, node}); }

 private:
  template <typename Dist>
  Tensor random_tensor(Shape shape, const std::string& name, Dist& dist) {
    Rng rng(derive_seed(opt_.seed, name));
    std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& e : v) e = dist(rng);
    return Tensor::from_values(std::move(shape), v, opt_.dtype);
  }

  int simple(OpKind kind, const std::string& name, std::vector<int> inputs) {
    Node n;
    n.name = name;
    n.kind = kind;
    n.inputs = std::move(inputs);
    return graph.add(std::move(n));
  }

  const ArchSpec& spec_;
  const BuildOptions& opt_;
};

void build_tsn(Builder& b, const ArchSpec& spec) {
  const auto rep = stage_repeats(spec.depth);
  const std::int64_t w = base_width(spec.depth);
  const std::int64_t T = spec.num_frames();
  int x = b.input();
  x = b.conv_bn(x, "conv1", 3, w, 7, 2, 3, true);
  b.mark(x, "conv1");
  x = b.pool(OpKind::max_pool, x, "maxpool", 3, 2, 1);
  std::int64_t in = w;
  for (int s = 0; s < 4; ++s) {
    const std::int64_t out = w * 4 << s;
    x = b.make_layer(x, "layer" + std::to_string(s + 1), in, out, rep[static_cast<std::size_t>(s)], s == 0 ? 1 : 2,
                     true, false, T, Builder::Shortcut::strided_conv);
    b.mark(x, "layer" + std::to_string(s + 1));
    in = out;
  }
  x = b.global_avg_pool(x, "avgpool");
  x = b.linear(x, "fc", in, spec.num_classes);
  b.graph.output = b.mean_over_time(x, "consensus", T);
}

void build_dual(Builder& b, const ArchSpec& spec) {
  const auto rep = stage_repeats(spec.depth);
  const std::int64_t w = base_width(spec.depth);
  const std::int64_t T = spec.num_frames();
  const RoutingPlan plan = route_frames(static_cast<int>(T), spec);
  const auto n = static_cast<std::int64_t>(plan.pairs.size());
  const bool tam = spec.has_tam();

  int x = b.input();
  x = b.conv_bn(x, "conv1", 3, w, 7, 2, 3, true);
  if (tam) x = b.tam(x, "tam1", w, T);
  b.mark(x, "conv1");

  int big_in = x, little_in = x;
  if (spec.pairs_frames()) {
    std::vector<std::int64_t> big_idx, little_idx;
    for (const auto& p : plan.pairs) {
      big_idx.push_back(p.big - 1);
      little_idx.push_back(p.little - 1);
    }
    big_in = b.select(x, "route.big", T, big_idx);
    little_in = b.select(x, "route.little", T, little_idx);
  }
  const std::int64_t lw = w / spec.alpha;
  int big = b.conv_bn(big_in, "stem.big", w, w, 3, 2, 1, true);
  int little = b.conv_bn(little_in, "stem.little.0", w, lw, 3, 1, 1, true);
  little = b.conv_bn(little, "stem.little.1", lw, lw, 3, 2, 1, true);
  little = b.conv_bn(little, "stem.little.2", lw, w, 1, 1, 0, false);
  x = b.relu(b.add(big, little, "stem.merge"), "stem.merge.relu");
  x = b.conv_bn(x, "stem.fusion", w, w, 1, 1, 0, true);

  std::vector<std::int64_t> expand;
  if (spec.pairs_frames()) {
    for (int src : plan.output_source) expand.push_back((src - 1) / 2);
  }
  auto mark = [&](int node, const std::string& name) {
    if (expand.empty()) {
      b.mark(node, name);
    } else {
      b.mark(b.select(node, name + ".frames", n, expand, true), name);
    }
  };
  mark(x, "stem");

  static constexpr int strides[3] = {2, 2, 1};
  std::int64_t in = w;
  for (int s = 0; s < 3; ++s) {
    const std::int64_t out = w * 4 << s;
    const std::string name = "layer" + std::to_string(s + 1);
    x = b.bl_module(x, name, in, out, rep[static_cast<std::size_t>(s)], strides[s], n);
    mark(x, name);
    in = out;
  }
  x = b.make_layer(x, "layer4", in, w * 32, rep[3], 2, true, tam, n, Builder::Shortcut::avg_pool);
  mark(x, "layer4");
  x = b.global_avg_pool(x, "avgpool");
  x = b.linear(x, "fc", w * 32, spec.num_classes);
  b.graph.output = b.mean_over_time(x, "consensus", n);
}

}  // namespace

Network::Network(ArchSpec spec, Graph graph, ParamStore params, std::vector<StageMark> stages, DType dtype,
                 Shape input_shape)
    : spec_(std::move(spec)),
      graph_(std::move(graph)),
      params_(std::move(params)),
      stages_(std::move(stages)),
      dtype_(dtype),
      input_shape_(std::move(input_shape)) {
  infer_shapes(graph_, input_shape_);
}

namespace {

Builder& build_into(Builder& b, const ArchSpec& spec) {
  spec.validate();
  if (spec.dual_path()) {
    build_dual(b, spec);
  } else {
    build_tsn(b, spec);
  }
  return b;
}

}  // namespace

Graph build_graph(const ArchSpec& spec) {
  BuildOptions options;
  options.allocate_params = false;
  Builder b(spec, options);
  build_into(b, spec);
  infer_shapes(b.graph, {spec.num_frames(), 3, spec.input_size, spec.input_size});
  return std::move(b.graph);
}

Network build_network(const ArchSpec& spec, const BuildOptions& options) {
  if (!options.allocate_params) throw ValueError("build_network needs allocated parameters; use build_graph");
  Builder b(spec, options);
  build_into(b, spec);
  Shape input{spec.num_frames(), 3, spec.input_size, spec.input_size};
  return Network(spec, std::move(b.graph), std::move(b.params), std::move(b.stages), options.dtype, std::move(input));
}

Network build_bl_module(const BlModuleSpec& spec, const BuildOptions& options) {
  spec.arch.validate();
  if (spec.in_channels < 1 || spec.out_channels < 4 || spec.out_channels % (4 * spec.arch.alpha) != 0) {
    throw ValueError("bL-module widths must be positive and out_channels divisible by 4*alpha");
  }
  if (spec.blocks < 1 || spec.frames < 1 || spec.size < 2) throw ValueError("invalid bL-module spec");
  Builder b(spec.arch, options);
  int x = b.input();
  x = b.bl_module(x, "module", spec.in_channels, spec.out_channels, spec.blocks, spec.stride, spec.frames);
  b.graph.output = x;
  Shape input{spec.frames, spec.in_channels, spec.size, spec.size};
  return Network(spec.arch, std::move(b.graph), std::move(b.params), {}, options.dtype, std::move(input));
}

namespace {

std::vector<std::int64_t> tile_pattern(const Node& n, std::int64_t leading) {
  const std::int64_t clips = leading / n.clip_frames;
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(clips) * n.pattern.size());
  for (std::int64_t c = 0; c < clips; ++c)
    for (auto p : n.pattern) idx.push_back(c * n.clip_frames + p);
  return idx;
}

}  // namespace

ForwardResult Network::forward(const Var& frames, const ForwardOptions& options) const {
  const Shape& in = input_shape_;
  const Shape& fs = frames.shape();
  if (fs.size() != 4 || fs[1] != in[1] || fs[2] != in[2] || fs[3] != in[3] || fs[0] % in[0] != 0) {
    throw ShapeError(arch_name(spec_) + " expects (B*" + std::to_string(in[0]) + ")x" + std::to_string(in[1]) + "x" +
                     std::to_string(in[2]) + "x" + std::to_string(in[3]) + " input, got " + shape_str(fs));
  }
  if (frames.dtype() != dtype_) throw ValueError("input dtype does not match the network's parameters");

  const auto last = last_uses(graph_);
  std::vector<bool> wanted(graph_.size(), false);
  for (const auto& s : stages_) wanted[static_cast<std::size_t>(s.node)] = true;

  std::vector<Var> values(graph_.size());
  const ops::BatchNormConfig bn_cfg{0.1, 1e-5, options.training};
  for (std::size_t i = 0; i < graph_.size(); ++i) {
    const Node& n = graph_.nodes[i];
    if (n.probe && !options.capture_stages) continue;
    auto arg = [&](std::size_t k) -> const Var& { return values[static_cast<std::size_t>(n.inputs[k])]; };
    auto param = [&](const char* suffix) { return params_.get(n.name + suffix); };
    Var out;
    switch (n.kind) {
      case OpKind::input: out = frames; break;
      case OpKind::conv:
        out = ops::conv2d(arg(0), param(".weight"), n.bias ? param(".bias") : Var(), n.stride, n.padding);
        break;
      case OpKind::batch_norm: {
        Var rm = param(".running_mean"), rv = param(".running_var");
        out = ops::batch_norm(arg(0), param(".weight"), param(".bias"), rm, rv, bn_cfg);
        break;
      }
      case OpKind::relu: out = ops::relu(arg(0)); break;
      case OpKind::add: out = ops::add(arg(0), arg(1)); break;
      case OpKind::tam: out = tam::tam_forward(arg(0), tam::TamParams(param(".weight")), n.clip_frames); break;
      case OpKind::resize: {
        const Shape& ref = values[static_cast<std::size_t>(n.size_ref)].shape();
        out = ops::resize_bilinear(arg(0), ref[2], ref[3]);
        break;
      }
      case OpKind::avg_pool: out = ops::avg_pool2d(arg(0), n.kernel, n.stride, n.padding); break;
      case OpKind::max_pool: out = ops::max_pool2d(arg(0), n.kernel, n.stride, n.padding); break;
      case OpKind::select: {
        const auto idx = tile_pattern(n, arg(0).shape()[0]);
        out = ops::select_frames(arg(0), idx);
        break;
      }
      case OpKind::global_avg_pool: out = ops::global_avg_pool(arg(0)); break;
      case OpKind::linear: out = ops::linear(arg(0), param(".weight"), param(".bias")); break;
      case OpKind::mean_over_time: out = ops::mean_over_time(arg(0), n.clip_frames); break;
    }
    values[i] = std::move(out);
    for (int src : n.inputs) {
      const auto s = static_cast<std::size_t>(src);
      if (last[s] == static_cast<int>(i) && !(options.capture_stages && wanted[s])) values[s] = Var();
    }
  }

  ForwardResult result;
  result.logits = values[static_cast<std::size_t>(graph_.output)];
  if (options.capture_stages) {
    for (const auto& s : stages_) result.stages.emplace_back(s.name, values[static_cast<std::size_t>(s.node)]);
  }
  return result;
}

Tensor forward_video(const Network& net, const Tensor& frames) {
  if (frames.ndim() != 4) throw ShapeError("a video is a T×3×H×W tensor, got " + shape_str(frames.shape()));
  const auto T = frames.dim(0);
  if (net.spec().pairs_frames()) route_frames(static_cast<int>(T), net.spec());
  if (T != net.spec().num_frames()) {
    throw ShapeError(arch_name(net.spec()) + " was built for " + std::to_string(net.spec().num_frames()) +
                     " frames, got " + std::to_string(T));
  }
  const auto result = net.forward(Var(frames.to(net.dtype())));
  return ops::softmax(result.logits.value()).reshape({net.spec().num_classes});
}

void check_pair_duplication(const Network& net, const ForwardResult& result) {
  if (!net.spec().pairs_frames()) return;
  for (const auto& [name, v] : result.stages) {
    if (name == "conv1") continue;
    const Tensor& t = v.value();
    const auto rows = t.dim(0);
    const auto row = t.numel() / rows;
    dispatch(t.dtype(), [&]<typename T>() {
      const auto d = t.data<T>();
      for (std::int64_t k = 0; k + 1 < rows; k += 2) {
        for (std::int64_t i = 0; i < row; ++i) {
          const T a = d[static_cast<std::size_t>(k * row + i)];
          const T b = d[static_cast<std::size_t>((k + 1) * row + i)];
          if (std::memcmp(&a, &b, sizeof(T)) != 0) {
            throw Error("stage " + name + ": output of frame " + std::to_string(k + 2) +
                        " differs from frame " + std::to_string(k + 1));
          }
        }
      }
    });
  }
}

}  // namespace blvnet
