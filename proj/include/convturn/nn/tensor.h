// Copyright 2026 Convturn Authors
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

#ifndef CONVTURN_NN_TENSOR_H_
#define CONVTURN_NN_TENSOR_H_

#include <cassert>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "convturn/common/error.h"

namespace convturn {

// Dense row-major tensor. Real is float in training/inference builds and
// double in oracle/gradient-check paths.
template <typename Real>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(ComputeNumel(shape_)), Real(0));
  }
  Tensor(std::vector<int> shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != ComputeNumel(shape_)) {
      throw ConfigError("tensor data size does not match shape");
    }
  }

  static Tensor Zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  std::size_t Numel() const { return data_.size(); }
  int NumAxes() const { return static_cast<int>(shape_.size()); }
  int Dim(int axis) const {
    assert(axis >= 0 && axis < NumAxes());
    return shape_[axis];
  }
  const std::vector<int>& Shape() const { return shape_; }

  Real* Data() { return data_.data(); }
  const Real* Data() const { return data_.data(); }

  Real& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  Real operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  Real& At(int i, int j) {
    assert(NumAxes() == 2);
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  Real At(int i, int j) const {
    assert(NumAxes() == 2);
    return data_[static_cast<size_t>(i) * shape_[1] + j];
  }
  Real& At(int i, int j, int k) {
    assert(NumAxes() == 3);
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  Real At(int i, int j, int k) const {
    assert(NumAxes() == 3);
    return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }

  void Fill(Real v) { data_.assign(data_.size(), v); }
  void SetZero() { Fill(Real(0)); }

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  bool AllFinite() const {
    for (Real v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  // Index of first non-finite entry, or -1.
  int64_t FirstNonFinite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(data_[i]))) {
        return static_cast<int64_t>(i);
      }
    }
    return -1;
  }

  std::string ShapeString() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  template <typename Other>
  Tensor<Other> Cast() const {
    Tensor<Other> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<Other>(data_[i]);
    }
    return out;
  }

 private:
  static int64_t ComputeNumel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ConfigError("negative tensor extent");
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<Real> data_;
};

}  // namespace convturn

#endif  // CONVTURN_NN_TENSOR_H_
