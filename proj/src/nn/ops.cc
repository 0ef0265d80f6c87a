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

#include "convturn/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convturn/common/error.h"

namespace convturn {

namespace {

template <typename Real>
void CheckFinite(const Tensor<Real>& t, const char* what) {
  const std::int64_t bad = t.FirstNonFinite();
  if (bad >= 0) {
    throw NumericError(std::string("non-finite value in ") + what +
                       " at flat index " + std::to_string(bad));
  }
}

template <typename Real>
inline Real Sigmoid(Real v) {
  if (v >= Real(0)) {
    Real e = std::exp(-v);
    return Real(1) / (Real(1) + e);
  }
  Real e = std::exp(v);
  return e / (Real(1) + e);
}

}  // namespace

template <typename Real>
Tensor<Real> AffineForward(const Tensor<Real>& w, const Tensor<Real>& b,
                           const Tensor<Real>& x) {
  const int in = w.Dim(0);
  const int out = w.Dim(1);
  if (b.Numel() != static_cast<std::size_t>(out)) {
    throw ConfigError("affine bias length " + std::to_string(b.Numel()) +
                      " does not match output dim " + std::to_string(out));
  }
  const bool batched = x.NumAxes() == 2;
  const int rows = batched ? x.Dim(0) : 1;
  const int cols = batched ? x.Dim(1) : static_cast<int>(x.Numel());
  if (cols != in) {
    throw ConfigError("affine input dim " + std::to_string(cols) +
                      " does not match weight rows " + std::to_string(in));
  }
  Tensor<Real> y(batched ? std::vector<int>{rows, out}
                         : std::vector<int>{out});
  const Real* xp = x.Data();
  const Real* wp = w.Data();
  const Real* bp = b.Data();
  Real* yp = y.Data();
  for (int rix = 0; rix < rows; ++rix) {
    Real* yr = yp + static_cast<std::size_t>(rix) * out;
    std::copy(bp, bp + out, yr);
    const Real* xr = xp + static_cast<std::size_t>(rix) * in;
    for (int i = 0; i < in; ++i) {
      const Real xv = xr[i];
      if (xv == Real(0)) continue;
      const Real* wr = wp + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

template <typename Real>
Tensor<Real> AffineBackward(const Tensor<Real>& w, const Tensor<Real>& x,
                            const Tensor<Real>& dy, Tensor<Real>* dw,
                            Tensor<Real>* db) {
  const int in = w.Dim(0);
  const int out = w.Dim(1);
  const bool batched = x.NumAxes() == 2;
  const int rows = batched ? x.Dim(0) : 1;
  if (dy.Numel() != static_cast<std::size_t>(rows) * out) {
    throw ConfigError("affine backward: dy size " + std::to_string(dy.Numel()) +
                      " does not match " + std::to_string(rows) + "x" +
                      std::to_string(out));
  }
  Tensor<Real> dx(batched ? std::vector<int>{rows, in}
                          : std::vector<int>{in});
  const Real* xp = x.Data();
  const Real* wp = w.Data();
  const Real* dyp = dy.Data();
  Real* dxp = dx.Data();
  Real* dwp = dw ? dw->Data() : nullptr;
  Real* dbp = db ? db->Data() : nullptr;
  for (int rix = 0; rix < rows; ++rix) {
    const Real* xr = xp + static_cast<std::size_t>(rix) * in;
    const Real* dyr = dyp + static_cast<std::size_t>(rix) * out;
    Real* dxr = dxp + static_cast<std::size_t>(rix) * in;
    if (dbp) {
      for (int o = 0; o < out; ++o) dbp[o] += dyr[o];
    }
    for (int i = 0; i < in; ++i) {
      const Real* wr = wp + static_cast<std::size_t>(i) * out;
      Real acc = Real(0);
      for (int o = 0; o < out; ++o) acc += wr[o] * dyr[o];
      dxr[i] = acc;
      if (dwp) {
        const Real xv = xr[i];
        if (xv != Real(0)) {
          Real* dwr = dwp + static_cast<std::size_t>(i) * out;
          for (int o = 0; o < out; ++o) dwr[o] += xv * dyr[o];
        }
      }
    }
  }
  return dx;
}

template <typename Real>
Tensor<Real> GruStepForward(const GruParams<Real>& p, const Tensor<Real>& state,
                            const Tensor<Real>& x, GruCache<Real>* cache) {
  CheckFinite(x, "gru input");
  const int hidden = p.HiddenDim();
  if (state.Numel() != static_cast<std::size_t>(hidden)) {
    throw ConfigError("gru state length " + std::to_string(state.Numel()) +
                      " does not match hidden dim " + std::to_string(hidden));
  }
  Tensor<Real> z = AffineForward(p.wz->value, p.bz->value, x);
  Tensor<Real> r = AffineForward(p.wr->value, p.br->value, x);
  {
    // Recurrent contributions; biases already added above.
    const Real* hp = state.Data();
    const Real* uzp = p.uz->value.Data();
    const Real* urp = p.ur->value.Data();
    Real* zp = z.Data();
    Real* rp = r.Data();
    for (int i = 0; i < hidden; ++i) {
      const Real hv = hp[i];
      if (hv == Real(0)) continue;
      const Real* uzr = uzp + static_cast<std::size_t>(i) * hidden;
      const Real* urr = urp + static_cast<std::size_t>(i) * hidden;
      for (int o = 0; o < hidden; ++o) {
        zp[o] += hv * uzr[o];
        rp[o] += hv * urr[o];
      }
    }
    for (int o = 0; o < hidden; ++o) {
      zp[o] = Sigmoid(zp[o]);
      rp[o] = Sigmoid(rp[o]);
    }
  }
  Tensor<Real> rh({hidden});
  for (int i = 0; i < hidden; ++i) rh[i] = r[i] * state.Data()[i];
  Tensor<Real> c = AffineForward(p.wc->value, p.bc->value, x);
  {
    const Real* rhp = rh.Data();
    const Real* ucp = p.uc->value.Data();
    Real* cp = c.Data();
    for (int i = 0; i < hidden; ++i) {
      const Real hv = rhp[i];
      if (hv == Real(0)) continue;
      const Real* ucr = ucp + static_cast<std::size_t>(i) * hidden;
      for (int o = 0; o < hidden; ++o) cp[o] += hv * ucr[o];
    }
    for (int o = 0; o < hidden; ++o) cp[o] = std::tanh(cp[o]);
  }
  Tensor<Real> h_new({hidden});
  for (int i = 0; i < hidden; ++i) {
    h_new[i] = z[i] * c[i] + (Real(1) - z[i]) * state.Data()[i];
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = state;
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->c = std::move(c);
  }
  return h_new;
}

template <typename Real>
void GruStepBackward(const GruParams<Real>& p, const GruCache<Real>& cache,
                     const Tensor<Real>& dh_new, Tensor<Real>* dx,
                     Tensor<Real>* dh_prev) {
  const int hidden = p.HiddenDim();
  const Tensor<Real>& z = cache.z;
  const Tensor<Real>& r = cache.r;
  const Tensor<Real>& c = cache.c;
  const Tensor<Real>& h = cache.h_prev;

  // h' = z*c + (1-z)*h
  Tensor<Real> dz({hidden});
  Tensor<Real> dc({hidden});
  Tensor<Real> dh({hidden});
  for (int i = 0; i < hidden; ++i) {
    const Real g = dh_new.Data()[i];
    dz[i] = g * (c[i] - h[i]);
    dc[i] = g * z[i];
    dh[i] = g * (Real(1) - z[i]);
  }
  // Through tanh: pre-activation grad.
  Tensor<Real> dc_pre({hidden});
  for (int i = 0; i < hidden; ++i) dc_pre[i] = dc[i] * (Real(1) - c[i] * c[i]);
  // c pre-act = x Wc + (r*h) Uc + bc
  Tensor<Real> rh({hidden});
  for (int i = 0; i < hidden; ++i) rh[i] = r[i] * h[i];
  Tensor<Real> dx_c = AffineBackward(p.wc->value, cache.x, dc_pre,
                                     &p.wc->grad, &p.bc->grad);
  Tensor<Real> drh = AffineBackward<Real>(p.uc->value, rh, dc_pre,
                                          &p.uc->grad, nullptr);
  Tensor<Real> dr({hidden});
  for (int i = 0; i < hidden; ++i) {
    dr[i] = drh[i] * h[i];
    dh[i] += drh[i] * r[i];
  }
  // Through the gate sigmoids.
  Tensor<Real> dz_pre({hidden});
  Tensor<Real> dr_pre({hidden});
  for (int i = 0; i < hidden; ++i) {
    dz_pre[i] = dz[i] * z[i] * (Real(1) - z[i]);
    dr_pre[i] = dr[i] * r[i] * (Real(1) - r[i]);
  }
  Tensor<Real> dx_z = AffineBackward(p.wz->value, cache.x, dz_pre,
                                     &p.wz->grad, &p.bz->grad);
  Tensor<Real> dh_z = AffineBackward<Real>(p.uz->value, h, dz_pre,
                                           &p.uz->grad, nullptr);
  Tensor<Real> dx_r = AffineBackward(p.wr->value, cache.x, dr_pre,
                                     &p.wr->grad, &p.br->grad);
  Tensor<Real> dh_r = AffineBackward<Real>(p.ur->value, h, dr_pre,
                                           &p.ur->grad, nullptr);
  for (int i = 0; i < hidden; ++i) {
    dh[i] += dh_z[i] + dh_r[i];
  }
  if (dx) {
    const int in = p.InputDim();
    if (dx->Numel() != static_cast<std::size_t>(in)) *dx = Tensor<Real>({in});
    for (int i = 0; i < in; ++i) {
      (*dx)[i] = dx_c[i] + dx_z[i] + dx_r[i];
    }
  }
  if (dh_prev) *dh_prev = std::move(dh);
}

template <typename Real>
void LogSoftmaxRow(Real* values, int n) {
  Real max = values[0];
  for (int i = 1; i < n; ++i) max = std::max(max, values[i]);
  double denom = 0.0;
  for (int i = 0; i < n; ++i) denom += std::exp(double(values[i] - max));
  const Real log_denom = Real(std::log(denom)) + max;
  for (int i = 0; i < n; ++i) values[i] -= log_denom;
}

template <typename Real>
Tensor<Real> LogSoftmax(const Tensor<Real>& x, int axis) {
  const int na = x.NumAxes();
  if (axis < 0) axis += na;
  if (axis < 0 || axis >= na) {
    throw ConfigError("log_softmax axis out of range");
  }
  CheckFinite(x, "log_softmax input");
  Tensor<Real> y = x;
  // Iterate over all slices along `axis`.
  std::size_t inner = 1;
  for (int a = axis + 1; a < na; ++a) inner *= x.Dim(a);
  std::size_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= x.Dim(a);
  const int n = x.Dim(axis);
  std::vector<Real> row(n);
  Real* yp = y.Data();
  for (std::size_t ou = 0; ou < outer; ++ou) {
    for (std::size_t in = 0; in < inner; ++in) {
      Real* base = yp + ou * n * inner + in;
      for (int i = 0; i < n; ++i) row[i] = base[i * inner];
      LogSoftmaxRow(row.data(), n);
      for (int i = 0; i < n; ++i) base[i * inner] = row[i];
    }
  }
  return y;
}

template <typename Real>
double CrossEntropyFromLogits(const Tensor<Real>& logits, int target,
                              Tensor<Real>* dlogits) {
  const int n = static_cast<int>(logits.Numel());
  if (target < 0 || target >= n) {
    throw ConfigError("cross-entropy target " + std::to_string(target) +
                      " out of range for " + std::to_string(n) + " logits");
  }
  Tensor<Real> lp = logits;
  LogSoftmaxRow(lp.Data(), n);
  const double loss = -double(lp[target]);
  if (dlogits) {
    if (dlogits->Numel() != static_cast<std::size_t>(n)) {
      *dlogits = Tensor<Real>({n});
    }
    Real* dp = dlogits->Data();
    for (int i = 0; i < n; ++i) dp[i] = std::exp(lp[i]);
    dp[target] -= Real(1);
  }
  return loss;
}

double LogAdd(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

template <typename Real>
double ClipGradNorm(ParamStore<Real>* store, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < store->NumParams(); ++i) {
    Param<Real>& p = store->At(i);
    if (p.frozen) continue;
    const Real* g = p.grad.Data();
    for (std::size_t k = 0; k < p.grad.Numel(); ++k) {
      sq += double(g[k]) * double(g[k]);
    }
  }
  if (!std::isfinite(sq)) {
    throw NumericError("non-finite gradient norm before clipping");
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const Real scale = Real(max_norm / norm);
    for (std::size_t i = 0; i < store->NumParams(); ++i) {
      Param<Real>& p = store->At(i);
      if (p.frozen) continue;
      Real* g = p.grad.Data();
      for (std::size_t k = 0; k < p.grad.Numel(); ++k) g[k] *= scale;
    }
  }
  return norm;
}

#define CONVTURN_INSTANTIATE_OPS(Real)                                        \
  template Tensor<Real> AffineForward(const Tensor<Real>&,                    \
                                      const Tensor<Real>&,                    \
                                      const Tensor<Real>&);                   \
  template Tensor<Real> AffineBackward(const Tensor<Real>&,                   \
                                       const Tensor<Real>&,                   \
                                       const Tensor<Real>&, Tensor<Real>*,    \
                                       Tensor<Real>*);                        \
  template Tensor<Real> GruStepForward(const GruParams<Real>&,                \
                                       const Tensor<Real>&,                   \
                                       const Tensor<Real>&, GruCache<Real>*); \
  template void GruStepBackward(const GruParams<Real>&, const GruCache<Real>&,\
                                const Tensor<Real>&, Tensor<Real>*,           \
                                Tensor<Real>*);                               \
  template Tensor<Real> LogSoftmax(const Tensor<Real>&, int);                 \
  template void LogSoftmaxRow(Real*, int);                                    \
  template double CrossEntropyFromLogits(const Tensor<Real>&, int,            \
                                         Tensor<Real>*);                      \
  template double ClipGradNorm(ParamStore<Real>*, double);

CONVTURN_INSTANTIATE_OPS(float)
CONVTURN_INSTANTIATE_OPS(double)

#undef CONVTURN_INSTANTIATE_OPS

}  // namespace convturn
