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

#ifndef CONVTURN_NN_OPS_H_
#define CONVTURN_NN_OPS_H_

#include <vector>

#include "convturn/nn/param_store.h"
#include "convturn/nn/tensor.h"

namespace convturn {

// ---------------------------------------------------------------------------
// Affine: y = x W + b, with x [B,in] or [in], W [in,out], b [out].
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> AffineForward(const Tensor<Real>& w, const Tensor<Real>& b,
                           const Tensor<Real>& x);

// Accumulates dW, db; returns dx. Any of dw/db may be null to skip.
template <typename Real>
Tensor<Real> AffineBackward(const Tensor<Real>& w, const Tensor<Real>& x,
                            const Tensor<Real>& dy, Tensor<Real>* dw,
                            Tensor<Real>* db);

// Convenience wrappers over a ParamStore pair (weight + bias).
template <typename Real>
Tensor<Real> AffineForward(const Param<Real>& w, const Param<Real>& b,
                           const Tensor<Real>& x) {
  return AffineForward(w.value, b.value, x);
}
template <typename Real>
Tensor<Real> AffineBackward(Param<Real>& w, Param<Real>& b,
                            const Tensor<Real>& x, const Tensor<Real>& dy) {
  return AffineBackward(w.value, x, dy, &w.grad, &b.grad);
}

// ---------------------------------------------------------------------------
// Gated recurrent cell (update + reset gates):
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wc + (r*h) Uc + bc)
//   h' = z*c + (1-z)*h
// ---------------------------------------------------------------------------

template <typename Real>
struct GruParams {
  Param<Real>* wz;
  Param<Real>* wr;
  Param<Real>* wc;
  Param<Real>* uz;
  Param<Real>* ur;
  Param<Real>* uc;
  Param<Real>* bz;
  Param<Real>* br;
  Param<Real>* bc;

  static GruParams Create(ParamStore<Real>* store, const std::string& prefix,
                          int input_dim, int hidden_dim, Rng* rng) {
    GruParams p;
    p.wz = store->CreateInit(prefix + ".wz", {input_dim, hidden_dim}, input_dim, rng);
    p.wr = store->CreateInit(prefix + ".wr", {input_dim, hidden_dim}, input_dim, rng);
    p.wc = store->CreateInit(prefix + ".wc", {input_dim, hidden_dim}, input_dim, rng);
    p.uz = store->CreateInit(prefix + ".uz", {hidden_dim, hidden_dim}, hidden_dim, rng);
    p.ur = store->CreateInit(prefix + ".ur", {hidden_dim, hidden_dim}, hidden_dim, rng);
    p.uc = store->CreateInit(prefix + ".uc", {hidden_dim, hidden_dim}, hidden_dim, rng);
    p.bz = store->Create(prefix + ".bz", {hidden_dim});
    p.br = store->Create(prefix + ".br", {hidden_dim});
    p.bc = store->Create(prefix + ".bc", {hidden_dim});
    return p;
  }

  static GruParams Lookup(ParamStore<Real>* store, const std::string& prefix) {
    GruParams p;
    p.wz = &store->Get(prefix + ".wz");
    p.wr = &store->Get(prefix + ".wr");
    p.wc = &store->Get(prefix + ".wc");
    p.uz = &store->Get(prefix + ".uz");
    p.ur = &store->Get(prefix + ".ur");
    p.uc = &store->Get(prefix + ".uc");
    p.bz = &store->Get(prefix + ".bz");
    p.br = &store->Get(prefix + ".br");
    p.bc = &store->Get(prefix + ".bc");
    return p;
  }

  int InputDim() const { return wz->value.Dim(0); }
  int HiddenDim() const { return wz->value.Dim(1); }
};

// Forward activations kept for the backward pass.
template <typename Real>
struct GruCache {
  Tensor<Real> x;
  Tensor<Real> h_prev;
  Tensor<Real> z;
  Tensor<Real> r;
  Tensor<Real> c;
};

// One step; x [in], state [hidden]. cache may be null for inference.
template <typename Real>
Tensor<Real> GruStepForward(const GruParams<Real>& p, const Tensor<Real>& state,
                            const Tensor<Real>& x,
                            GruCache<Real>* cache = nullptr);

// Accumulates parameter gradients; dx and dh_prev may be null to skip.
template <typename Real>
void GruStepBackward(const GruParams<Real>& p, const GruCache<Real>& cache,
                     const Tensor<Real>& dh_new, Tensor<Real>* dx = nullptr,
                     Tensor<Real>* dh_prev = nullptr);

// ---------------------------------------------------------------------------
// Normalization and losses.
// ---------------------------------------------------------------------------

// Numerically stabilized log-softmax along `axis` (negative counts from the
// end, -1 = last axis).
template <typename Real>
Tensor<Real> LogSoftmax(const Tensor<Real>& x, int axis);

// In-place row variant for hot paths: values[0..n) become log-probabilities.
template <typename Real>
void LogSoftmaxRow(Real* values, int n);

// Softmax CE against a single target index over a 1-D logits vector.
// Returns loss; if dlogits is non-null it is set to softmax - onehot.
template <typename Real>
double CrossEntropyFromLogits(const Tensor<Real>& logits, int target,
                              Tensor<Real>* dlogits = nullptr);

// log(exp(a) + exp(b)) guarded against -inf.
double LogAdd(double a, double b);

// Gradient-norm clipping over all unfrozen parameters; returns the global
// norm before clipping. Throws NumericError on non-finite gradients.
template <typename Real>
double ClipGradNorm(ParamStore<Real>* store, double max_norm);

}  // namespace convturn

#endif  // CONVTURN_NN_OPS_H_
