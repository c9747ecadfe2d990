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

#include <filesystem>
#include <iosfwd>

#include "blvnet/tensor.hpp"

namespace blvnet {

// Binary tensor file:
//
//   v1 <dtype> <ndim> <d0> <d1> ...\n
//   <product(d) little-endian elements>
//
// dtype is "f32" or "f64".

void write_tensor(std::ostream& os, const Tensor& tensor);
/// Reads one record; throws FormatError on a bad header or a short payload.
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
/// Also rejects trailing bytes after the payload.
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace blvnet
