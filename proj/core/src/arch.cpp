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

#include "blvnet/arch.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "blvnet/error.hpp"

namespace blvnet {
namespace {

constexpr std::array<std::pair<std::string_view, Variant>, 4> kVariants{{
    {"tsn", Variant::tsn},
    {"tsn-blnet", Variant::tsn_blnet},
    {"blvnet", Variant::blvnet},
    {"blvnet-tam", Variant::blvnet_tam},
}};

constexpr std::array<std::pair<std::string_view, Depth>, 4> kDepths{{
    {"26", Depth::d26},
    {"50", Depth::d50},
    {"101", Depth::d101},
    {"tiny", Depth::tiny},
}};

int to_int(std::string_view text, std::string_view key) {
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ValueError("invalid integer for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& [name, value] : kVariants)
    if (value == v) return name;
  return "?";
}

std::string_view depth_name(Depth d) {
  for (const auto& [name, value] : kDepths)
    if (value == d) return name;
  return "?";
}

void ArchSpec::validate() const {
  if (alpha < 1) throw ValueError("alpha must be >= 1");
  if (beta < 1) throw ValueError("beta must be >= 1");
  if (r < 1 || r % 2 == 0) throw ValueError("temporal range r must be an odd positive integer");
  if (n_pairs < 1) throw ValueError("n_pairs must be >= 1");
  if (num_classes < 1) throw ValueError("num_classes must be >= 1");
  if (input_size < 16) throw ValueError("input_size must be >= 16");
  if (dual_path() && base_width(depth) % alpha != 0) throw ValueError("alpha must divide the stem width");
}

std::array<int, 4> stage_repeats(Depth d) {
  switch (d) {
    case Depth::d26: return {2, 2, 2, 2};
    case Depth::d50: return {3, 4, 6, 3};
    case Depth::d101: return {4, 8, 18, 3};
    case Depth::tiny: return {1, 1, 1, 1};
  }
  throw ValueError("unknown depth");
}

int base_width(Depth d) { return d == Depth::tiny ? 16 : 64; }

ArchSpec parse_arch(std::string_view name) {
  const auto dash = name.rfind('-');
  if (dash == std::string_view::npos) {
    throw ValueError("architecture '" + std::string(name) + "' must look like <variant>-<depth>, e.g. blvnet-tam-50");
  }
  const auto vname = name.substr(0, dash);
  const auto dname = name.substr(dash + 1);
  ArchSpec spec;
  bool found = false;
  for (const auto& [n, v] : kVariants)
    if (n == vname) spec.variant = v, found = true;
  if (!found) throw ValueError("unknown variant '" + std::string(vname) + "' (tsn, tsn-blnet, blvnet, blvnet-tam)");
  found = false;
  for (const auto& [n, d] : kDepths)
    if (n == dname) spec.depth = d, found = true;
  if (!found) throw ValueError("unknown depth '" + std::string(dname) + "' (26, 50, 101, tiny)");
  if (spec.depth == Depth::tiny) spec.input_size = 32;
  return spec;
}

std::string arch_name(const ArchSpec& spec) {
  return std::string(variant_name(spec.variant)) + "-" + std::string(depth_name(spec.depth));
}

std::string serialize_spec(const ArchSpec& s) {
  std::ostringstream os;
  os << "arch=" << arch_name(s) << " alpha=" << s.alpha << " beta=" << s.beta << " r=" << s.r
     << " n_pairs=" << s.n_pairs << " classes=" << s.num_classes << " input=" << s.input_size
     << " swap=" << (s.swap_branches ? 1 : 0);
  return os.str();
}

ArchSpec deserialize_spec(std::string_view line) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed spec token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("spec is missing ") + key);
    return it->second;
  };
  try {
    ArchSpec s = parse_arch(need("arch"));
    s.alpha = to_int(need("alpha"), "alpha");
    s.beta = to_int(need("beta"), "beta");
    s.r = to_int(need("r"), "r");
    s.n_pairs = to_int(need("n_pairs"), "n_pairs");
    s.num_classes = to_int(need("classes"), "classes");
    s.input_size = to_int(need("input"), "input");
    s.swap_branches = to_int(need("swap"), "swap") != 0;
    s.validate();
    return s;
  } catch (const FormatError&) {
    throw;
  } catch (const ValueError& e) {
    throw FormatError(std::string("bad spec: ") + e.what());
  }
}

}  // namespace blvnet
