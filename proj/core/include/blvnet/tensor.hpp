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
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "blvnet/error.hpp"

namespace blvnet {

enum class DType { f32, f64 };

std::string_view dtype_name(DType dtype);
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor with shared, logically immutable storage.
///
/// Copies share the element buffer. Kernels that build a fresh tensor fill it
/// through mutable_data() before handing it out; after that point nothing
/// writes to it, so a Tensor may be read from any number of threads.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor. Every dimension must be >= 1.
  Tensor(Shape shape, DType dtype);

  static Tensor zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }
  static Tensor full(Shape shape, double value, DType dtype);
  static Tensor from_values(Shape shape, std::span<const double> values, DType dtype);
  static Tensor from_values(Shape shape, std::initializer_list<double> values, DType dtype);
  static Tensor scalar(double value, DType dtype);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t ndim() const { return shape_.size(); }
  std::int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }

  template <typename T>
  std::span<const T> data() const {
    check_type<T>();
    const auto& vec = std::get<std::vector<T>>(*storage_);
    return {vec.data(), vec.size()};
  }

  /// Only valid while the caller holds the sole reference to the buffer.
  template <typename T>
  std::span<T> mutable_data() {
    check_type<T>();
    auto& vec = std::get<std::vector<T>>(*storage_);
    return {vec.data(), vec.size()};
  }

  /// Element at a flat index, widened to double.
  double item(std::int64_t flat_index = 0) const;
  std::vector<double> to_vector() const;

  /// Deep copy, optionally converting the element type.
  Tensor clone() const;
  Tensor to(DType dtype) const;
  /// Same buffer, new shape with the same element count.
  Tensor reshape(Shape shape) const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  /// Bitwise equality of shape, dtype and payload.
  bool identical(const Tensor& other) const;

 private:
  using Storage = std::variant<std::vector<float>, std::vector<double>>;

  template <typename T>
  void check_type() const {
    if (dtype_of<T>() != dtype_) {
      throw ValueError("tensor dtype is " + std::string(dtype_name(dtype_)) + ", requested " +
                       std::string(dtype_name(dtype_of<T>())));
    }
  }

  Shape shape_;
  std::int64_t numel_ = 0;
  DType dtype_ = DType::f32;
  std::shared_ptr<Storage> storage_;
};

/// Calls fn.template operator()<T>() with T matching the runtime dtype.
template <typename Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
  if (dtype == DType::f32) return fn.template operator()<float>();
  return fn.template operator()<double>();
}

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace blvnet
