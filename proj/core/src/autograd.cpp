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

#include "blvnet/autograd.hpp"

#include <atomic>

namespace blvnet {
namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<bool> g_finite_checks{true};

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape(), a.dtype());
  dispatch(a.dtype(), [&]<typename T>() {
    auto x = a.data<T>();
    auto y = b.data<T>();
    auto o = out.mutable_data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  });
  return out;
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::VarNode>()) {
  if (!value.defined()) throw ValueError("Var needs a defined tensor");
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Tensor& Var::value() const {
  if (!node_) throw ValueError("access to an undefined Var");
  return node_->value;
}

Tensor Var::grad() const {
  if (!node_) throw ValueError("access to an undefined Var");
  if (node_->grad.defined()) return node_->grad;
  return Tensor::zeros(node_->value.shape(), node_->value.dtype());
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

void Var::assign(Tensor value) {
  if (!node_) throw ValueError("assign to an undefined Var");
  if (value.shape() != node_->value.shape()) {
    throw ShapeError("assign: shape " + shape_str(value.shape()) + " does not match " +
                     shape_str(node_->value.shape()));
  }
  node_->value = std::move(value);
}

void Tape::record(const char* op, std::vector<Var> inputs, const Var& output, BackwardFn fn) {
  if (consumed_) throw TapeError("tape already ran backward; call reset() before recording");
  nodes_.push_back(Node{op, std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Var& loss) {
  if (consumed_) throw TapeError("backward() called twice without reset()");
  if (nodes_.empty()) throw TapeError("backward() on an empty tape");
  if (!loss.defined() || loss.numel() != 1) throw TapeError("backward() needs a scalar loss");
  if (!loss.requires_grad()) throw TapeError("loss does not depend on any parameter");
  consumed_ = true;

  loss.node_->grad = Tensor::full(loss.shape(), 1.0, loss.dtype());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& out = *it->output.node_;
    if (!out.grad.defined()) continue;
    std::vector<Tensor> grads = it->backward(out.grad);
    for (std::size_t i = 0; i < it->inputs.size() && i < grads.size(); ++i) {
      auto& in = *it->inputs[i].node_;
      if (!in.requires_grad || !grads[i].defined()) continue;
      if (grads[i].shape() != in.value.shape()) {
        throw TapeError(std::string(it->op) + ": gradient shape " + shape_str(grads[i].shape()) +
                        " does not match input " + shape_str(in.value.shape()));
      }
      in.grad = in.grad.defined() ? add_tensors(in.grad, grads[i]) : grads[i];
    }
    if (!out.leaf) out.grad = Tensor();
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

std::vector<std::string> Tape::ops() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const auto& n : nodes_) names.emplace_back(n.op);
  return names;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Var make_result(Tensor value, const char* op, std::vector<Var> inputs, BackwardFn fn) {
  check_finite(op, value);
  Var out(std::move(value));
  Tape* tape = active_tape();
  if (!tape) return out;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!needs_grad) return out;
  out.node_->requires_grad = true;
  out.node_->leaf = false;
  tape->record(op, std::move(inputs), out, std::move(fn));
  return out;
}

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

void check_finite(const char* op, const Tensor& t) {
  if (g_finite_checks && !t.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

}  // namespace blvnet
