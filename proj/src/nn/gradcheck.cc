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

#include "convturn/nn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "convturn/common/error.h"

namespace convturn {

std::string GradCheckReport::Summary() const {
  std::ostringstream os;
  os << "checked " << checked << " entries, max rel err " << max_rel_err;
  if (!worst_param.empty()) {
    os << " at " << worst_param << "[" << worst_index << "]"
       << " analytic=" << worst_analytic << " numeric=" << worst_numeric;
  }
  return os.str();
}

GradCheckReport FiniteDiffCheck(ParamStore<double>* store,
                                const std::function<double(bool)>& loss,
                                double h, int stride) {
  if (h <= 0.0 || stride < 1) {
    throw ConfigError("finite difference check needs h > 0 and stride >= 1");
  }
  store->ZeroGrads();
  loss(true);
  // Snapshot analytic gradients before the probing evaluations overwrite
  // anything.
  std::vector<std::vector<double>> analytic(store->NumParams());
  for (std::size_t i = 0; i < store->NumParams(); ++i) {
    const Param<double>& p = store->At(i);
    analytic[i].assign(p.grad.Data(), p.grad.Data() + p.grad.Numel());
  }
  store->ZeroGrads();

  GradCheckReport report;
  for (std::size_t i = 0; i < store->NumParams(); ++i) {
    Param<double>& p = store->At(i);
    if (p.frozen) continue;
    double* val = p.value.Data();
    for (std::size_t k = 0; k < p.value.Numel();
         k += static_cast<std::size_t>(stride)) {
      const double saved = val[k];
      val[k] = saved + h;
      const double up = loss(false);
      val[k] = saved - h;
      const double down = loss(false);
      val[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][k];
      const double scale = std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      const double rel = std::fabs(a - numeric) / scale;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p.name;
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace convturn
