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

#include "convturn/nn/adam.h"

#include <cmath>

#include "convturn/common/error.h"

namespace convturn {

template <typename Real>
Adam<Real>::Adam(ParamStore<Real>* store, const AdamOptions& opts)
    : store_(store), opts_(opts) {
  if (opts.lr <= 0.0 || opts.beta1 < 0.0 || opts.beta1 >= 1.0 ||
      opts.beta2 < 0.0 || opts.beta2 >= 1.0 || opts.eps <= 0.0) {
    throw ConfigError("invalid adam options");
  }
  m_.resize(store->NumParams());
  v_.resize(store->NumParams());
  for (std::size_t i = 0; i < store->NumParams(); ++i) {
    const std::size_t n = store->At(i).value.Numel();
    m_[i].assign(n, 0.0);
    v_[i].assign(n, 0.0);
  }
}

template <typename Real>
void Adam<Real>::Step() {
  if (m_.size() != store_->NumParams()) {
    throw ConfigError("param store grew after adam construction");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, double(step_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, double(step_));
  for (std::size_t i = 0; i < store_->NumParams(); ++i) {
    Param<Real>& p = store_->At(i);
    if (p.frozen) {
      p.grad.SetZero();
      continue;
    }
    Real* val = p.value.Data();
    Real* grad = p.grad.Data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const std::size_t n = p.value.Numel();
    for (std::size_t k = 0; k < n; ++k) {
      const double g = double(grad[k]);
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient for " + p.name);
      }
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g;
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      val[k] = Real(double(val[k]) -
                    opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps));
      grad[k] = Real(0);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace convturn
