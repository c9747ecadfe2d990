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

#include "blvnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace blvnet {

std::string_view dtype_name(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

DType parse_dtype(std::string_view name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw ValueError("unknown dtype '" + std::string(name) + "' (expected f32 or f64)");
}

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? sizeof(float) : sizeof(double); }

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  if (shape_.empty()) throw ShapeError("tensor needs at least one dimension");
  for (auto d : shape_) {
    if (d < 1) throw ShapeError("all tensor dimensions must be >= 1, got " + shape_str(shape_));
  }
  numel_ = shape_numel(shape_);
  const auto n = static_cast<std::size_t>(numel_);
  if (dtype == DType::f32) {
    storage_ = std::make_shared<Storage>(std::vector<float>(n, 0.0f));
  } else {
    storage_ = std::make_shared<Storage>(std::vector<double>(n, 0.0));
  }
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  dispatch(dtype, [&]<typename T>() {
    auto d = t.mutable_data<T>();
    std::fill(d.begin(), d.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  Tensor t(std::move(shape), dtype);
  if (static_cast<std::int64_t>(values.size()) != t.numel()) {
    throw ShapeError("shape " + shape_str(t.shape()) + " holds " + std::to_string(t.numel()) +
                     " elements, got " + std::to_string(values.size()) + " values");
  }
  dispatch(dtype, [&]<typename T>() {
    auto d = t.mutable_data<T>();
    std::transform(values.begin(), values.end(), d.begin(), [](double v) { return static_cast<T>(v); });
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values, DType dtype) {
  return from_values(std::move(shape), std::span<const double>(values.begin(), values.size()), dtype);
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

double Tensor::item(std::int64_t flat_index) const {
  if (flat_index < 0 || flat_index >= numel_) throw ShapeError("flat index out of range");
  return dispatch(dtype_, [&]<typename T>() { return static_cast<double>(data<T>()[flat_index]); });
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<std::size_t>(numel_));
  dispatch(dtype_, [&]<typename T>() {
    auto d = data<T>();
    std::copy(d.begin(), d.end(), out.begin());
  });
  return out;
}

Tensor Tensor::clone() const { return to(dtype_); }

Tensor Tensor::to(DType dtype) const {
  Tensor out(shape_, dtype);
  dispatch(dtype_, [&]<typename S>() {
    auto src = data<S>();
    dispatch(dtype, [&]<typename D>() {
      auto dst = out.mutable_data<D>();
      std::transform(src.begin(), src.end(), dst.begin(), [](S v) { return static_cast<D>(v); });
    });
  });
  return out;
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel_) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " into " + shape_str(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool Tensor::all_finite() const {
  return dispatch(dtype_, [&]<typename T>() {
    auto d = data<T>();
    return std::all_of(d.begin(), d.end(), [](T v) { return std::isfinite(v); });
  });
}

bool Tensor::identical(const Tensor& other) const {
  if (shape_ != other.shape_ || dtype_ != other.dtype_) return false;
  return dispatch(dtype_, [&]<typename T>() {
    auto a = data<T>();
    auto b = other.data<T>();
    return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
  });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto va = a.to_vector();
  const auto vb = b.to_vector();
  double m = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
  return m;
}

}  // namespace blvnet
