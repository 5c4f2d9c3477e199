// Copyright 2026 The idocr authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License. You may
// obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Project: idocr
// File: include/idocr/tensor.hpp
// Purpose: dense row-major tensor of a scalar type

#pragma once

#include <numeric>
#include <vector>

#include "idocr/common.hpp"

namespace idocr {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) { resize(std::move(s)); }

  static i64 count(const std::vector<int>& s) {
    i64 n = 1;
    for (int d : s) {
      if (d < 1) throw Error("tensor dimension must be positive");
      n *= d;
    }
    return n;
  }

  void resize(std::vector<int> s) {
    shape = std::move(s);
    data.assign(static_cast<size_t>(count(shape)), T(0));
  }

  i64 numel() const { return static_cast<i64>(data.size()); }
  bool empty() const { return data.empty(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.reserve(data.size());
    for (T v : data) out.data.push_back(static_cast<U>(v));
    return out;
  }
};

}  // namespace idocr
