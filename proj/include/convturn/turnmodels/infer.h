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

#ifndef CONVTURN_TURNMODELS_INFER_H_
#define CONVTURN_TURNMODELS_INFER_H_

#include <cstdint>
#include <map>
#include <vector>

#include "convturn/corpus/corpus.h"
#include "convturn/transducer/decode.h"
#include "convturn/turnmodels/model.h"

namespace convturn {

// Decision thresholds are probabilities in [0, 1]: a threshold of 0 fires on
// the first frame, a threshold of 1 never fires.
struct InferOptions {
  double pause_threshold = 0.5;
  double finish_threshold = 0.5;
  int beam_size = 4;
  int max_expansions = 3;
  double frame_rate = 100.0;
  // Same-kind decisions are suppressed this long after one fires.
  double debounce_sec = 0.2;
};

// Throws ConfigError on out-of-range fields.
void ValidateInferOptions(const InferOptions& opts);

struct TurnDecision {
  TurnKind kind = TurnKind::kPause;
  int frame = 0;
  double time = 0.0;  // end of the firing frame, seconds
  double posterior = 0.0;
};

// Full inference output for one utterance. Traces cover every frame whether
// or not anything fired, so operating points can be swept offline; activity
// marks frames with fresh speech evidence and re-arms decisions after a
// Finish ended the segment.
struct StreamResult {
  Hypothesis hypothesis;
  std::vector<TurnDecision> decisions;
  std::vector<double> pause_trace;
  std::vector<double> finish_trace;
  std::vector<uint8_t> activity;
};

// Joint scorer over a model's recognizer joint with memoized prediction
// states (keyed by the trailing token context) and per-frame score rows.
class ModelJointScorer : public JointScorer {
 public:
  ModelJointScorer(const TurnTakingModel& model, const Tensor<float>& features);

  int NumFrames() override { return enc_.Dim(0); }
  int NumEmittable() override { return model_.AsrOutputSize() - 1; }
  std::vector<double> LogProbs(int frame,
                               const std::vector<int>& prefix) override;

  const Tensor<double>& Encoded() const { return enc_; }
  // Cached prediction state for the trailing context of `prefix`.
  const Tensor<double>& PredictionFor(const std::vector<int>& prefix);

 private:
  const TurnTakingModel& model_;
  Tensor<double> enc_;
  std::map<std::vector<int>, Tensor<double>> pred_cache_;
  int memo_frame_ = -1;
  std::map<std::vector<int>, std::vector<double>> frame_memo_;
};

// Frame-synchronous decode plus turn-taking decisions: the recognizer beam
// advances one frame at a time, the variant's pause/finish posteriors are
// evaluated against the current top hypothesis, and decisions fire on upward
// threshold crossings, debounced; a Finish decision ends the segment until
// fresh speech evidence arrives. Throws ConfigError when the variant is not
// trained on this model.
StreamResult StreamInfer(const TurnTakingModel& model,
                         const Tensor<float>& features, Variant variant,
                         const InferOptions& opts);

// Decision extraction from recorded traces; StreamInfer's decisions are
// exactly ReplayDecisions over its own traces, so threshold sweeps reproduce
// the online behavior.
std::vector<TurnDecision> ReplayDecisions(
    const std::vector<double>& pause_trace,
    const std::vector<double>& finish_trace,
    const std::vector<uint8_t>& activity, double pause_threshold,
    double finish_threshold, double frame_rate, double debounce_sec);

}  // namespace convturn

#endif  // CONVTURN_TURNMODELS_INFER_H_
