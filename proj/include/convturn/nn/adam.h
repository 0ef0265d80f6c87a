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

#ifndef CONVTURN_NN_ADAM_H_
#define CONVTURN_NN_ADAM_H_

#include <vector>

#include "convturn/nn/param_store.h"

namespace convturn {

struct AdamOptions {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Frozen parameters are skipped entirely: their
// values, moments and step counts stay untouched, so unfreezing later resumes
// from a cold state for those slots only.
template <typename Real>
class Adam {
 public:
  Adam(ParamStore<Real>* store, const AdamOptions& opts);

  // Applies one update from the accumulated gradients, then clears them.
  void Step();

  std::int64_t NumSteps() const { return step_; }

 private:
  ParamStore<Real>* store_;
  AdamOptions opts_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace convturn

#endif  // CONVTURN_NN_ADAM_H_
