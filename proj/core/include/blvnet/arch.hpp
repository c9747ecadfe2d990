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

#include <array>
#include <string>
#include <string_view>

namespace blvnet {

enum class Variant {
  tsn,         ///< single-path ResNet, one frame per pipeline instance
  tsn_blnet,   ///< Big-Little backbone, both branches read the same frame
  blvnet,      ///< odd/even frames split across branches (local fusion)
  blvnet_tam,  ///< blvnet plus temporal aggregation layers (global fusion)
};

enum class Depth { d26, d50, d101, tiny };

std::string_view variant_name(Variant v);
std::string_view depth_name(Depth d);

/// Declarative description of one network.
///
/// n_pairs counts pipeline instances: frame pairs for the blvnet variants,
/// single frames for tsn and tsn-blnet.
struct ArchSpec {
  Variant variant = Variant::blvnet_tam;
  Depth depth = Depth::d50;
  int alpha = 2;
  int beta = 4;
  int r = 3;
  int n_pairs = 8;
  int num_classes = 174;
  int input_size = 224;
  /// Even frames feed the Big branch instead of odd ones.
  bool swap_branches = false;

  bool dual_path() const { return variant != Variant::tsn; }
  bool pairs_frames() const { return variant == Variant::blvnet || variant == Variant::blvnet_tam; }
  bool has_tam() const { return variant == Variant::blvnet_tam; }
  int frames_per_instance() const { return pairs_frames() ? 2 : 1; }
  int num_frames() const { return n_pairs * frames_per_instance(); }

  /// Throws ValueError on out-of-range fields.
  void validate() const;
};

/// Bottleneck repeats per stage.
std::array<int, 4> stage_repeats(Depth d);
/// Stem width; stage outputs are 4, 8, 16 and 32 times this.
int base_width(Depth d);

/// "blvnet-tam-50", "tsn-tiny", ... Other fields keep their defaults.
ArchSpec parse_arch(std::string_view name);
std::string arch_name(const ArchSpec& spec);

/// Single-line key=value form used in checkpoints.
std::string serialize_spec(const ArchSpec& spec);
ArchSpec deserialize_spec(std::string_view line);

}  // namespace blvnet
