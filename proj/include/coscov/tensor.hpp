// Copyright 2026 The CosCov Authors
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

#ifndef COSCOV_TENSOR_H_
#define COSCOV_TENSOR_H_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "coscov/errors.hpp"

namespace coscov {

// Dense row-major n-dimensional array. The scalar type is a template
// parameter: float is the training storage, double is used by the
// finite-difference gradient-check mode.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(NumelOf(shape)), T(0));
  }
  Tensor(std::vector<int64_t> s, std::vector<T> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (NumelOf(shape) != static_cast<int64_t>(data.size())) {
      throw ConfigError("tensor: shape/data size mismatch");
    }
  }

  static int64_t NumelOf(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
  }

  static Tensor Zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

  static Tensor Full(std::vector<int64_t> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  bool SameShape(const Tensor& o) const { return shape == o.shape; }

  bool AllFinite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::string ShapeStr() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << "]";
    return os.str();
  }

  template <typename U>
  Tensor<U> Cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

// Debug-mode finiteness assertion for forward-pass outputs.
#ifndef NDEBUG
template <typename T>
inline void DebugCheckFinite(const Tensor<T>& t, const char* where) {
  if (!t.AllFinite()) {
    throw NumericError(std::string("non-finite values after ") + where);
  }
}
#else
template <typename T>
inline void DebugCheckFinite(const Tensor<T>&, const char*) {}
#endif

}  // namespace coscov

#endif  // COSCOV_TENSOR_H_
