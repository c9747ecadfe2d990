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

#include "blvnet/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace blvnet {
namespace {

constexpr std::size_t kMaxHeader = 512;
constexpr std::int64_t kMaxDims = 16;

template <typename T>
void byteswap_inplace(std::span<T> values) {
  for (auto& v : values) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(std::begin(bytes), std::end(bytes));
    std::memcpy(&v, bytes, sizeof(T));
  }
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& tensor) {
  if (!tensor.defined()) throw ValueError("cannot write an undefined tensor");
  os << "v1 " << dtype_name(tensor.dtype()) << ' ' << tensor.ndim();
  for (auto d : tensor.shape()) os << ' ' << d;
  os << '\n';
  dispatch(tensor.dtype(), [&]<typename T>() {
    auto data = tensor.data<T>();
    if constexpr (std::endian::native == std::endian::little) {
      os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    } else {
      std::vector<T> copy(data.begin(), data.end());
      byteswap_inplace(std::span<T>(copy));
      os.write(reinterpret_cast<const char*>(copy.data()), static_cast<std::streamsize>(data.size_bytes()));
    }
  });
  if (!os) throw IoError("failed writing tensor payload");
}

Tensor read_tensor(std::istream& is) {
  std::string header;
  char c = 0;
  while (is.get(c) && c != '\n') {
    header.push_back(c);
    if (header.size() > kMaxHeader) throw FormatError("tensor header exceeds " + std::to_string(kMaxHeader) + " bytes");
  }
  if (c != '\n') throw FormatError("truncated tensor header");

  std::istringstream hs(header);
  std::string magic, dtype_token;
  std::int64_t ndim = 0;
  if (!(hs >> magic >> dtype_token >> ndim) || magic != "v1") {
    throw FormatError("bad tensor header '" + header + "'");
  }
  DType dtype;
  try {
    dtype = parse_dtype(dtype_token);
  } catch (const ValueError& e) {
    throw FormatError(e.what());
  }
  if (ndim < 1 || ndim > kMaxDims) throw FormatError("bad tensor rank " + std::to_string(ndim));
  Shape shape(static_cast<std::size_t>(ndim));
  for (auto& d : shape) {
    if (!(hs >> d) || d < 1) throw FormatError("bad tensor dimension in header '" + header + "'");
  }
  std::string extra;
  if (hs >> extra) throw FormatError("trailing tokens in tensor header '" + header + "'");

  Tensor tensor(shape, dtype);
  dispatch(dtype, [&]<typename T>() {
    auto data = tensor.mutable_data<T>();
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (static_cast<std::size_t>(is.gcount()) != data.size_bytes()) {
      throw FormatError("tensor payload too short: header " + shape_str(shape) + " needs " +
                        std::to_string(data.size_bytes()) + " bytes, got " + std::to_string(is.gcount()));
    }
    if constexpr (std::endian::native != std::endian::little) byteswap_inplace(data);
  });
  return tensor;
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, tensor);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Tensor t = read_tensor(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": payload longer than header " + shape_str(t.shape()) + " declares");
  }
  return t;
}

}  // namespace blvnet
