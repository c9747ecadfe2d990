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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "blvnet/network.hpp"

/// Checkpoint layout: a text manifest
///
///   blvnet-checkpoint v1
///   spec <key=value ...>
///   dtype <f32|f64>
///   entries <count>
///   <param|buffer> <name> <numel>     (one line per entry)
///   end
///
/// followed by one tensor record per entry, in manifest order.
namespace blvnet {

struct CheckpointEntry {
  std::string name;
  std::int64_t numel = 0;
  bool buffer = false;
};

struct CheckpointInfo {
  ArchSpec spec;
  DType dtype = DType::f32;
  std::vector<CheckpointEntry> entries;

  /// Elements across "param" entries only.
  std::int64_t param_elems() const;
};

void save_checkpoint(std::ostream& os, const Network& net);
void save_checkpoint(const std::filesystem::path& path, const Network& net);

/// Reads only the manifest. Throws FormatError when malformed.
CheckpointInfo read_checkpoint_header(std::istream& is);

/// Rebuilds the network from the stored spec and restores every entry.
/// Throws FormatError for malformed or inconsistent files, IoError when the
/// file cannot be opened.
Network load_checkpoint(std::istream& is);
Network load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter and buffer by name; names and shapes must match.
/// Used to move weights to a network built for a different frame count.
void copy_parameters(const Network& from, Network& to);

}  // namespace blvnet
