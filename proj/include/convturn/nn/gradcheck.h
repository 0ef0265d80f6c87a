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

#ifndef CONVTURN_NN_GRADCHECK_H_
#define CONVTURN_NN_GRADCHECK_H_

#include <functional>
#include <string>

#include "convturn/nn/param_store.h"

namespace convturn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;

  bool Pass(double tolerance) const { return max_rel_err < tolerance; }
  std::string Summary() const;
};

// Central finite differences against the analytic gradients a loss closure
// accumulates into the store. The closure returns the scalar loss; it must
// add gradients when its argument is true and leave them alone otherwise.
// Runs in 64-bit only: float stores lose too many digits at h=1e-5.
GradCheckReport FiniteDiffCheck(ParamStore<double>* store,
                                const std::function<double(bool)>& loss,
                                double h = 1e-5, int stride = 1);

}  // namespace convturn

#endif  // CONVTURN_NN_GRADCHECK_H_
