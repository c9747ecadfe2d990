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

#include "blvnet/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "blvnet/error.hpp"
#include "blvnet/tensor_io.hpp"

namespace blvnet {
namespace {

constexpr const char* kMagic = "blvnet-checkpoint v1";

std::string next_line(std::istream& is, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError(std::string("checkpoint truncated before ") + what);
  return line;
}

std::string expect_prefix(const std::string& line, const std::string& key) {
  if (line.rfind(key + " ", 0) != 0) throw FormatError("checkpoint: expected '" + key + "', got '" + line + "'");
  return line.substr(key.size() + 1);
}

}  // namespace

std::int64_t CheckpointInfo::param_elems() const {
  std::int64_t n = 0;
  for (const auto& e : entries)
    if (!e.buffer) n += e.numel;
  return n;
}

void save_checkpoint(std::ostream& os, const Network& net) {
  const auto& entries = net.params().entries();
  os << kMagic << "\n";
  os << "spec " << serialize_spec(net.spec()) << "\n";
  os << "dtype " << dtype_name(net.dtype()) << "\n";
  os << "entries " << entries.size() << "\n";
  for (const auto& e : entries) os << (e.buffer ? "buffer " : "param ") << e.name << " " << e.var.numel() << "\n";
  os << "end\n";
  for (const auto& e : entries) write_tensor(os, e.var.value());
  if (!os) throw IoError("failed to write checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  save_checkpoint(out, net);
}

CheckpointInfo read_checkpoint_header(std::istream& is) {
  if (next_line(is, "magic") != kMagic) throw FormatError("not a blvnet checkpoint (bad magic line)");
  CheckpointInfo info;
  info.spec = deserialize_spec(expect_prefix(next_line(is, "spec"), "spec"));
  try {
    info.dtype = parse_dtype(expect_prefix(next_line(is, "dtype"), "dtype"));
  } catch (const ValueError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  const std::string count_text = expect_prefix(next_line(is, "entry count"), "entries");
  std::size_t count = 0;
  try {
    std::size_t pos = 0;
    count = std::stoul(count_text, &pos);
    if (pos != count_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad entry count '" + count_text + "'");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next_line(is, "entry"));
    std::string kind, name, extra;
    CheckpointEntry e;
    if (!(ls >> kind >> name >> e.numel) || (ls >> extra) || (kind != "param" && kind != "buffer") || e.numel < 1) {
      throw FormatError("checkpoint: malformed entry line " + std::to_string(i + 1));
    }
    e.name = name;
    e.buffer = kind == "buffer";
    info.entries.push_back(std::move(e));
  }
  if (next_line(is, "end") != "end") throw FormatError("checkpoint: missing 'end' after entries");
  return info;
}

Network load_checkpoint(std::istream& is) {
  const CheckpointInfo info = read_checkpoint_header(is);
  BuildOptions opt;
  opt.dtype = info.dtype;
  Network net = build_network(info.spec, opt);
  const auto& expected = net.params().entries();
  if (expected.size() != info.entries.size()) {
    throw FormatError("checkpoint has " + std::to_string(info.entries.size()) + " entries, " +
                      arch_name(info.spec) + " needs " + std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& want = expected[i];
    const auto& got = info.entries[i];
    if (want.name != got.name || want.buffer != got.buffer || want.var.numel() != got.numel) {
      throw FormatError("checkpoint entry " + std::to_string(i + 1) + " (" + got.name + ") does not match " +
                        want.name);
    }
  }
  for (const auto& want : expected) {
    Tensor t = read_tensor(is);
    if (t.shape() != want.var.shape() || t.dtype() != want.var.dtype()) {
      throw FormatError("checkpoint tensor for " + want.name + " has shape " + shape_str(t.shape()) + ", expected " +
                        shape_str(want.var.shape()));
    }
    Var v = want.var;
    v.assign(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return net;
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

void copy_parameters(const Network& from, Network& to) {
  const auto& src = from.params().entries();
  const auto& dst = to.params().entries();
  if (src.size() != dst.size()) throw ValueError("networks have different parameter sets");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].var.shape() != dst[i].var.shape()) {
      throw ValueError("parameter " + src[i].name + " does not match " + dst[i].name);
    }
    Var v = dst[i].var;
    v.assign(src[i].var.value().to(to.dtype()).clone());
  }
}

}  // namespace blvnet
