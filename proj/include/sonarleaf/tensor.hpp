// Copyright 2026 The sonarleaf Authors. All Rights Reserved.
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

#ifndef SONARLEAF_TENSOR_HPP
#define SONARLEAF_TENSOR_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace sonarleaf {

/// Dense row-major matrix. Rows are filter channels wherever a
/// time-frequency layout is involved.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0))
      : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::size_t size() const { return data.size(); }
};

/// Channel-major 3-D tensor (channels x height x width).
template <typename T>
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  T& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data[(c * height + i) * width + j];
  }
  const T& operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data[(c * height + i) * width + j];
  }
  std::span<T> plane(std::size_t c) {
    return {data.data() + c * height * width, height * width};
  }
  std::span<const T> plane(std::size_t c) const {
    return {data.data() + c * height * width, height * width};
  }
  std::size_t spatial() const { return height * width; }
  std::size_t size() const { return data.size(); }
};

}  // namespace sonarleaf

#endif  // SONARLEAF_TENSOR_HPP
