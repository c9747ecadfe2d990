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

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "blvnet/tensor.hpp"

namespace blvnet {

namespace detail {
struct VarNode {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool leaf = true;
};
}  // namespace detail

/// A tensor value plus the gradient that backward() accumulates into it.
///
/// Var is a handle: copies refer to the same node, so a parameter held by a
/// layer and by the optimizer sees the same value and gradient.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  DType dtype() const { return value().dtype(); }
  std::int64_t numel() const { return value().numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool is_leaf() const { return node_ && node_->leaf; }

  /// Accumulated gradient, or zeros when nothing reached this variable.
  Tensor grad() const;
  bool has_grad() const { return node_ && node_->grad.defined(); }
  void zero_grad();

  /// Replaces the value; used for optimizer steps and running statistics.
  void assign(Tensor value);

  bool same_node(const Var& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  friend Var make_result(Tensor, const char*, std::vector<Var>, std::function<std::vector<Tensor>(const Tensor&)>);
  std::shared_ptr<detail::VarNode> node_;
};

/// Maps the gradient of an op's output to one gradient per input. An
/// undefined entry means "no gradient for this input".
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_output)>;

/// Records differentiable ops in creation order and replays them backward.
/// A tape belongs to a single thread.
class Tape {
 public:
  void record(const char* op, std::vector<Var> inputs, const Var& output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and visits every recorded node once, newest
  /// first. Throws TapeError if loss is not a scalar, the tape is empty, or
  /// backward already ran since the last reset().
  void backward(const Var& loss);

  /// Drops recorded nodes so the tape can be reused.
  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  /// Op names in recording order.
  std::vector<std::string> ops() const;

 private:
  struct Node {
    const char* op;
    std::vector<Var> inputs;
    Var output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Tape that ops record onto in the current thread, or nullptr.
Tape* active_tape();

/// Makes a tape active for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Wraps an op result. Records it on the active tape when any input needs a
/// gradient; otherwise returns a constant Var.
Var make_result(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn fn);

/// When enabled (the default) every forward op rejects NaN/Inf outputs with
/// NumericError naming the op.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();
void check_finite(const char* op, const Tensor& t);

}  // namespace blvnet
