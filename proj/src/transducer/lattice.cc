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

#include "convturn/transducer/lattice.h"

#include <cmath>
#include <limits>

#include "convturn/common/error.h"
#include "convturn/nn/ops.h"
#include "convturn/transducer/vocab.h"

namespace convturn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LatticeDims {
  int t_len;
  int u_len;  // U+1
  int k;
};

LatticeDims Dims(const TransducerLattice& lattice) {
  if (lattice.logp.NumAxes() != 3) {
    throw ConfigError("lattice tensor must be [T, U+1, K], got " +
                      lattice.logp.ShapeString());
  }
  LatticeDims d{lattice.logp.Dim(0), lattice.logp.Dim(1), lattice.logp.Dim(2)};
  if (d.t_len < 1 || d.u_len < 1 || d.k < 2) {
    throw ConfigError("degenerate lattice " + lattice.logp.ShapeString());
  }
  if (static_cast<int>(lattice.labels.size()) != d.u_len - 1) {
    throw ConfigError("lattice has " + std::to_string(lattice.labels.size()) +
                      " labels but room for " + std::to_string(d.u_len - 1));
  }
  for (int y : lattice.labels) {
    if (y <= Vocab::kBlankId || y >= d.k) {
      throw ConfigError("label id " + std::to_string(y) +
                        " outside 1.." + std::to_string(d.k - 1));
    }
  }
  return d;
}

// Forward scores: alpha[t][u] = log-prob of consuming t frames and emitting
// the first u labels. alpha is (T)x(U+1) flattened.
std::vector<double> Forward(const TransducerLattice& lattice,
                            const LatticeDims& d) {
  std::vector<double> alpha(static_cast<std::size_t>(d.t_len) * d.u_len,
                            kNegInf);
  auto a = [&](int t, int u) -> double& {
    return alpha[static_cast<std::size_t>(t) * d.u_len + u];
  };
  a(0, 0) = 0.0;
  for (int t = 0; t < d.t_len; ++t) {
    for (int u = 0; u < d.u_len; ++u) {
      if (t == 0 && u == 0) continue;
      double v = kNegInf;
      if (t > 0) {
        v = LogAdd(v, a(t - 1, u) +
                          lattice.logp.At(t - 1, u, Vocab::kBlankId));
      }
      if (u > 0) {
        v = LogAdd(v, a(t, u - 1) +
                          lattice.logp.At(t, u - 1, lattice.labels[u - 1]));
      }
      a(t, u) = v;
    }
  }
  return alpha;
}

// Backward scores: beta[t][u] = log-prob of completing the sequence from
// node (t,u), including the mandatory final blank at (T-1, U).
std::vector<double> Backward(const TransducerLattice& lattice,
                             const LatticeDims& d) {
  std::vector<double> beta(static_cast<std::size_t>(d.t_len) * d.u_len,
                           kNegInf);
  auto b = [&](int t, int u) -> double& {
    return beta[static_cast<std::size_t>(t) * d.u_len + u];
  };
  for (int t = d.t_len - 1; t >= 0; --t) {
    for (int u = d.u_len - 1; u >= 0; --u) {
      if (t == d.t_len - 1 && u == d.u_len - 1) {
        b(t, u) = lattice.logp.At(t, u, Vocab::kBlankId);
        continue;
      }
      double v = kNegInf;
      if (t < d.t_len - 1) {
        v = LogAdd(v, lattice.logp.At(t, u, Vocab::kBlankId) + b(t + 1, u));
      }
      if (u < d.u_len - 1) {
        v = LogAdd(v, lattice.logp.At(t, u, lattice.labels[u]) + b(t, u + 1));
      }
      b(t, u) = v;
    }
  }
  return beta;
}

// The lambda scaling only exists in the kFastEmit instantiation, so the
// lambda=0 public entry and the unregularized entry share machine code.
template <bool kFastEmit>
double GradImpl(const TransducerLattice& lattice, double lambda,
                Tensor<double>* dlogits) {
  const LatticeDims d = Dims(lattice);
  const std::vector<double> alpha = Forward(lattice, d);
  const std::vector<double> beta = Backward(lattice, d);
  const double log_lik = beta[0];
  if (!std::isfinite(log_lik)) {
    throw NumericError("lattice log-likelihood is not finite");
  }
  if (dlogits->Shape() != lattice.logp.Shape()) {
    *dlogits = Tensor<double>(lattice.logp.Shape());
  } else {
    dlogits->SetZero();
  }
  auto a = [&](int t, int u) {
    return alpha[static_cast<std::size_t>(t) * d.u_len + u];
  };
  auto b = [&](int t, int u) {
    return beta[static_cast<std::size_t>(t) * d.u_len + u];
  };
  for (int t = 0; t < d.t_len; ++t) {
    for (int u = 0; u < d.u_len; ++u) {
      // Occupancy-weighted transition posteriors out of (t,u).
      double w_blank = 0.0;
      if (u == d.u_len - 1) {
        const double tail = (t == d.t_len - 1) ? 0.0 : b(t + 1, u);
        w_blank = std::exp(a(t, u) + lattice.logp.At(t, u, Vocab::kBlankId) +
                           tail - log_lik);
      } else if (t < d.t_len - 1) {
        w_blank = std::exp(a(t, u) + lattice.logp.At(t, u, Vocab::kBlankId) +
                           b(t + 1, u) - log_lik);
      }
      double w_label = 0.0;
      int label = -1;
      if (u < d.u_len - 1) {
        label = lattice.labels[u];
        w_label = std::exp(a(t, u) + lattice.logp.At(t, u, label) +
                           b(t, u + 1) - log_lik);
        if (kFastEmit) {
          w_label *= 1.0 + lambda;
        }
      }
      const double occupancy = w_blank + w_label;
      if (occupancy == 0.0) continue;
      for (int j = 0; j < d.k; ++j) {
        double g = std::exp(lattice.logp.At(t, u, j)) * occupancy;
        if (j == Vocab::kBlankId) g -= w_blank;
        if (j == label) g -= w_label;
        dlogits->At(t, u, j) = g;
      }
    }
  }
  return -log_lik;
}

}  // namespace

void ValidateLattice(const TransducerLattice& lattice, double tol) {
  const LatticeDims d = Dims(lattice);
  for (int t = 0; t < d.t_len; ++t) {
    for (int u = 0; u < d.u_len; ++u) {
      double total = 0.0;
      for (int j = 0; j < d.k; ++j) {
        total += std::exp(lattice.logp.At(t, u, j));
      }
      if (std::fabs(total - 1.0) > tol) {
        throw NumericError("lattice slice (" + std::to_string(t) + "," +
                           std::to_string(u) + ") exp-sums to " +
                           std::to_string(total));
      }
    }
  }
}

double RnntLogLikelihood(const TransducerLattice& lattice) {
  const LatticeDims d = Dims(lattice);
  const std::vector<double> alpha = Forward(lattice, d);
  return alpha[static_cast<std::size_t>(d.t_len - 1) * d.u_len + d.u_len - 1] +
         lattice.logp.At(d.t_len - 1, d.u_len - 1, Vocab::kBlankId);
}

double RnntGrad(const TransducerLattice& lattice, double fastemit_lambda,
                Tensor<double>* dlogits) {
  if (fastemit_lambda < 0.0) {
    throw ConfigError("negative regularizer weight");
  }
  if (fastemit_lambda == 0.0) {
    return GradImpl<false>(lattice, 0.0, dlogits);
  }
  return GradImpl<true>(lattice, fastemit_lambda, dlogits);
}

double RnntGradUnregularized(const TransducerLattice& lattice,
                             Tensor<double>* dlogits) {
  return GradImpl<false>(lattice, 0.0, dlogits);
}

double BruteForceLogLikelihood(const TransducerLattice& lattice) {
  const LatticeDims d = Dims(lattice);
  const int u_max = d.u_len - 1;
  if (d.t_len > 6 || u_max > 4) {
    throw ConfigError("instance too large for path enumeration");
  }
  // Depth-first over all monotone move orders; every path ends with the
  // mandatory blank at (T-1, U).
  double total = kNegInf;
  struct Frame {
    int t, u;
    double score;
  };
  std::vector<Frame> stack;
  stack.push_back({0, 0, 0.0});
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.t == d.t_len - 1 && f.u == u_max) {
      total = LogAdd(total,
                     f.score + lattice.logp.At(f.t, f.u, Vocab::kBlankId));
      continue;
    }
    if (f.t < d.t_len - 1) {
      stack.push_back({f.t + 1, f.u,
                       f.score + lattice.logp.At(f.t, f.u, Vocab::kBlankId)});
    }
    if (f.u < u_max) {
      stack.push_back(
          {f.t, f.u + 1,
           f.score + lattice.logp.At(f.t, f.u, lattice.labels[f.u])});
    }
  }
  return total;
}

}  // namespace convturn
