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
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blvnet/autograd.hpp"

/// Central finite-difference verification of backward().
namespace blvnet::gradcheck {

struct Options {
  double step = 1e-6;
  double threshold = 1e-4;
  /// Elements checked per tensor; 0 checks all of them.
  int max_elements = 0;
  /// Random-direction checks per tensor, covering every element at once.
  int directions = 1;
  std::uint64_t seed = 0;
};

/// Step 1e-6; threshold 1e-4 for f64 and 1e-3 for f32.
Options defaults_for(DType dtype);

/// Per-element error |a - n| / max(|a|, |n|, floor) where floor is 1e-3 of
/// the tensor's largest analytic gradient magnitude (plus 1e-12), so
/// entries that are numerically zero relative to their neighbours do not
/// dominate. An entry over the threshold is retried at step/10 and step/100
/// and keeps its smallest error.
struct GroupResult {
  std::string name;
  std::int64_t checked = 0;
  double max_rel_error = 0;
  bool passed = true;
};

struct Report {
  std::string module;
  DType dtype = DType::f64;
  double threshold = 0;
  double seconds = 0;
  std::vector<GroupResult> groups;

  bool passed() const;
  double max_rel_error() const;
};

using LossFn = std::function<Var()>;

/// loss() must rebuild the scalar loss from the current values of vars.
Report check(std::string module, const LossFn& loss, const std::vector<std::pair<std::string, Var>>& vars,
             const Options& options);

/// Analytic gradients of `loss` against central differences of `reference`,
/// which must compute the same function over variables with the same names
/// and shapes (typically an f64 twin of an f32 problem).
Report check_against(std::string module, const LossFn& loss, const std::vector<std::pair<std::string, Var>>& vars,
                     const LossFn& reference, const std::vector<std::pair<std::string, Var>>& reference_vars,
                     const Options& options);

/// Built-in suites: "tam", "bl-module" and "full-tiny". f32 suites check the
/// 32-bit backward pass against f64 central differences of the same inputs.
Report run_suite(std::string_view module, DType dtype, std::uint64_t seed = 0);

std::vector<std::string> suite_names();

}  // namespace blvnet::gradcheck
