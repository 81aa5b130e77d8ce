// Copyright 2026 The melfix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MELFIX_TENSOR_HPP_
#define MELFIX_TENSOR_HPP_

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace melfix {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
  }

  friend bool operator==(const Shape&, const Shape&) = default;
};

// NCHW array. T is float for training and double for verification.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    assert(data_.size() == shape_.size());
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& at(int n, int c, int h, int w) { return data_[Index(n, c, h, w)]; }
  T at(int n, int c, int h, int w) const { return data_[Index(n, c, h, w)]; }

  // Contiguous H*W plane of sample n, channel c.
  std::span<T> plane(int n, int c) {
    return {data_.data() + Index(n, c, 0, 0), shape_.plane()};
  }
  std::span<const T> plane(int n, int c) const {
    return {data_.data() + Index(n, c, 0, 0), shape_.plane()};
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t Index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  std::vector<T> data_;
};

// A named trainable array plus its accumulated gradient.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void ZeroGrad() { std::fill(grad.values().begin(), grad.values().end(), T(0)); }
};

}  // namespace melfix

#endif  // MELFIX_TENSOR_HPP_
