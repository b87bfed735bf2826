// Copyright 2026 The lfdcu Authors.
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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lfdcu/errors.hpp"

namespace lfdcu {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// The five axes of a light-field-shaped array, in storage order [u,v,s,t,c].
struct Dims5 {
  std::size_t u = 1, v = 1, s = 1, t = 1, c = 1;

  std::size_t views() const { return u * v; }
  std::size_t positions() const { return u * v * s * t; }
  std::size_t numel() const { return positions() * c; }
  Shape shape() const { return {u, v, s, t, c}; }
  bool operator==(const Dims5&) const = default;
};

/// Dense row-major array of arbitrary rank. Rank 0 holds a single scalar.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T{}) {}
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor payload of " + std::to_string(data_.size()) +
                       " values does not fit shape " + shape_str(shape_));
    }
  }
  explicit Tensor(Dims5 d, T fill = T{}) : Tensor(d.shape(), fill) {}

  static Tensor scalar(T value) {
    Tensor t;
    t.data_[0] = value;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  Dims5 dims5() const {
    if (rank() != 5) {
      throw DimensionError("expected a 5-axis array, got shape " +
                           shape_str(shape_));
    }
    return {shape_[0], shape_[1], shape_[2], shape_[3], shape_[4]};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T item() const { return data_.front(); }

  /// Element access for 5-axis arrays.
  T& at(std::size_t u, std::size_t v, std::size_t s, std::size_t t,
        std::size_t c) {
    return data_[offset5(u, v, s, t, c)];
  }
  const T& at(std::size_t u, std::size_t v, std::size_t s, std::size_t t,
              std::size_t c) const {
    return data_[offset5(u, v, s, t, c)];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T x) { return std::isfinite(x); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset5(std::size_t u, std::size_t v, std::size_t s,
                      std::size_t t, std::size_t c) const {
    return (((u * shape_[1] + v) * shape_[2] + s) * shape_[3] + t) *
               shape_[4] +
           c;
  }

  Shape shape_;
  std::vector<T> data_;
};

inline void require_same_shape(const Shape& a, const Shape& b,
                               const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape " + shape_str(a) +
                     " does not match " + shape_str(b));
  }
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T m{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, static_cast<T>(std::abs(a[i] - b[i])));
  }
  return m;
}

template <typename T>
double mean_of(const Tensor<T>& a) {
  double acc = 0.0;
  for (T x : a.values()) acc += static_cast<double>(x);
  return acc / static_cast<double>(a.size());
}

}  // namespace lfdcu
