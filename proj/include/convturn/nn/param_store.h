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

#ifndef CONVTURN_NN_PARAM_STORE_H_
#define CONVTURN_NN_PARAM_STORE_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/nn/rng.h"
#include "convturn/nn/tensor.h"

namespace convturn {

// One named parameter with its gradient accumulator. Frozen parameters
// still hold gradients but never receive optimizer updates.
template <typename Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool frozen = false;
};

// Owns model parameters in creation order; that order defines the
// checkpoint layout.
template <typename Real>
class ParamStore {
 public:
  Param<Real>* Create(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw ConfigError("duplicate parameter: " + name);
    auto p = std::make_unique<Param<Real>>();
    p->name = name;
    p->value = Tensor<Real>(shape);
    p->grad = Tensor<Real>(shape);
    Param<Real>* raw = p.get();
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return raw;
  }

  // Uniform init in +-1/sqrt(fan_in), seeded.
  Param<Real>* CreateInit(const std::string& name, std::vector<int> shape,
                          int fan_in, Rng* rng) {
    Param<Real>* p = Create(name, std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (std::size_t i = 0; i < p->value.Numel(); ++i) {
      p->value[i] = static_cast<Real>(rng->Uniform(-bound, bound));
    }
    return p;
  }

  Param<Real>* Find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Param<Real>* Find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Param<Real>& Get(const std::string& name) {
    Param<Real>* p = Find(name);
    if (!p) throw ConfigError("unknown parameter: " + name);
    return *p;
  }

  void ZeroGrads() {
    for (auto& p : params_) p->grad.SetZero();
  }

  // Freeze/unfreeze every parameter whose name starts with prefix.
  void SetFrozenByPrefix(const std::string& prefix, bool frozen = true) {
    for (auto& p : params_) {
      if (p->name.rfind(prefix, 0) == 0) p->frozen = frozen;
    }
  }
  void SetAllFrozen(bool frozen) {
    for (auto& p : params_) p->frozen = frozen;
  }

  size_t NumParams() const { return params_.size(); }
  Param<Real>& At(size_t i) { return *params_[i]; }
  const Param<Real>& At(size_t i) const { return *params_[i]; }

  int64_t TotalSize() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.Numel();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<Real>>> params_;
  std::map<std::string, size_t> index_;
};

}  // namespace convturn

#endif  // CONVTURN_NN_PARAM_STORE_H_
