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

#ifndef CONVTURN_TRANSDUCER_LATTICE_H_
#define CONVTURN_TRANSDUCER_LATTICE_H_

#include <vector>

#include "convturn/nn/tensor.h"

namespace convturn {

// Normalized log-probabilities over joint outputs on the T x (U+1) decision
// grid, plus the label sequence that defines the vertical transitions.
// Lattice math runs in 64-bit regardless of the model's training precision.
struct TransducerLattice {
  Tensor<double> logp;      // [T, U+1, K], each (t,u) slice log-normalized
  std::vector<int> labels;  // length U, ids in 1..K-1
};

// Shape, label range, and per-slice normalization (exp-sum within tol of 1).
void ValidateLattice(const TransducerLattice& lattice, double tol = 1e-5);

// Log of the total probability of the label sequence, summed over all
// monotone blank/label alignments, by the forward recursion.
double RnntLogLikelihood(const TransducerLattice& lattice);

// Gradient of -log P(y|x) with respect to the pre-softmax logits behind
// lattice.logp; returns the loss. fastemit_lambda scales the label-emission
// branch of the occupancy gradient by (1+lambda) to pull emissions earlier;
// 0 recovers the plain gradient.
double RnntGrad(const TransducerLattice& lattice, double fastemit_lambda,
                Tensor<double>* dlogits);

// The regularizer-free path with the scaling code compiled out; the lambda=0
// call above must match this bit for bit.
double RnntGradUnregularized(const TransducerLattice& lattice,
                             Tensor<double>* dlogits);

// Exponential path enumeration oracle; refuses T > 6 or U > 4.
double BruteForceLogLikelihood(const TransducerLattice& lattice);

}  // namespace convturn

#endif  // CONVTURN_TRANSDUCER_LATTICE_H_
