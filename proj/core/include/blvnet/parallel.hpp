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

namespace blvnet {

/// Worker count for kernel fan-out. Defaults to BLVNET_NUM_THREADS when set,
/// otherwise the hardware concurrency.
int num_threads();
void set_num_threads(int n);

/// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each.
/// Callers must make chunks write disjoint outputs; results are then
/// independent of the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace blvnet
