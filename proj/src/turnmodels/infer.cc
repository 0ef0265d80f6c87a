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

#include "convturn/turnmodels/infer.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "convturn/common/error.h"

namespace convturn {

namespace {

std::vector<int> TrailingContext(const std::vector<int>& prefix, int context) {
  const std::size_t take =
      std::min(prefix.size(), static_cast<std::size_t>(context));
  return std::vector<int>(prefix.end() - static_cast<std::ptrdiff_t>(take),
                          prefix.end());
}

Tensor<double> EncRow(const Tensor<double>& enc, int t) {
  const int dim = enc.Dim(1);
  Tensor<double> row({dim});
  const double* src = enc.Data() + static_cast<std::size_t>(t) * dim;
  std::copy(src, src + dim, row.Data());
  return row;
}

// prev < threshold <= cur; the ceiling threshold never fires because finite
// evidence never reaches probability 1.
bool Crossed(double prev, double cur, double threshold) {
  if (threshold >= 1.0) return false;
  return prev < threshold && cur >= threshold;
}

}  // namespace

void ValidateInferOptions(const InferOptions& opts) {
  if (!(opts.pause_threshold >= 0.0 && opts.pause_threshold <= 1.0) ||
      !(opts.finish_threshold >= 0.0 && opts.finish_threshold <= 1.0)) {
    throw ConfigError("inference options: thresholds must lie in [0, 1]");
  }
  if (opts.beam_size < 1) {
    throw ConfigError("inference options: beam_size must be positive");
  }
  if (opts.max_expansions < 1) {
    throw ConfigError("inference options: max_expansions must be positive");
  }
  if (!(opts.frame_rate > 0.0)) {
    throw ConfigError("inference options: frame_rate must be positive");
  }
  if (!(opts.debounce_sec >= 0.0)) {
    throw ConfigError("inference options: debounce_sec must be >= 0");
  }
}

ModelJointScorer::ModelJointScorer(const TurnTakingModel& model,
                                   const Tensor<float>& features)
    : model_(model), enc_(EncoderOutputs(model, features)) {}

const Tensor<double>& ModelJointScorer::PredictionFor(
    const std::vector<int>& prefix) {
  std::vector<int> key = TrailingContext(prefix, model_.config.pred_context);
  auto it = pred_cache_.find(key);
  if (it == pred_cache_.end()) {
    Tensor<double> state = PredictionState(model_, key);
    it = pred_cache_.emplace(std::move(key), std::move(state)).first;
  }
  return it->second;
}

std::vector<double> ModelJointScorer::LogProbs(int frame,
                                               const std::vector<int>& prefix) {
  if (frame != memo_frame_) {
    frame_memo_.clear();
    memo_frame_ = frame;
  }
  std::vector<int> key = TrailingContext(prefix, model_.config.pred_context);
  auto it = frame_memo_.find(key);
  if (it != frame_memo_.end()) return it->second;
  const Tensor<double>& state = PredictionFor(key);
  Tensor<double> logits =
      JointLogits(model_, JointKind::kAsr, EncRow(enc_, frame), state);
  const int k = static_cast<int>(logits.Numel());
  LogSoftmaxRow(logits.Data(), k);
  std::vector<double> row(logits.Data(), logits.Data() + k);
  frame_memo_.emplace(std::move(key), row);
  return row;
}

std::vector<TurnDecision> ReplayDecisions(
    const std::vector<double>& pause_trace,
    const std::vector<double>& finish_trace,
    const std::vector<uint8_t>& activity, double pause_threshold,
    double finish_threshold, double frame_rate, double debounce_sec) {
  if (pause_trace.size() != finish_trace.size() ||
      pause_trace.size() != activity.size()) {
    throw ConfigError("trace lengths differ");
  }
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
  const int t_len = static_cast<int>(pause_trace.size());
  const int debounce_frames =
      static_cast<int>(std::ceil(debounce_sec * frame_rate - 1e-9));
  std::vector<TurnDecision> out;
  bool alive = true;
  double prev_pause = -1.0;
  double prev_finish = -1.0;
  int last_pause = -(t_len + debounce_frames + 1);
  int last_finish = last_pause;
  for (int t = 0; t < t_len; ++t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    if (!alive && activity[ti]) alive = true;
    const double cur_pause = pause_trace[ti];
    const double cur_finish = finish_trace[ti];
    if (alive) {
      if (Crossed(prev_finish, cur_finish, finish_threshold) &&
          t - last_finish >= debounce_frames) {
        out.push_back({TurnKind::kFinish, t, (t + 1) / frame_rate, cur_finish});
        last_finish = t;
        alive = false;
      } else if (Crossed(prev_pause, cur_pause, pause_threshold) &&
                 t - last_pause >= debounce_frames) {
        out.push_back({TurnKind::kPause, t, (t + 1) / frame_rate, cur_pause});
        last_pause = t;
      }
    }
    prev_pause = cur_pause;
    prev_finish = cur_finish;
  }
  return out;
}

StreamResult StreamInfer(const TurnTakingModel& model,
                         const Tensor<float>& features, Variant variant,
                         const InferOptions& opts) {
  ValidateInferOptions(opts);
  bool ready = false;
  switch (variant) {
    case Variant::kAcoustic:
      ready = model.stage1_trained && model.acoustic_trained;
      break;
    case Variant::kText:
      ready = model.stage1_trained && model.text_trained;
      break;
    case Variant::kDualJoint:
      ready = model.stage1_trained && model.turn_trained;
      break;
    case Variant::kE2eSingle:
      ready = model.stage1_trained && model.expanded_asr;
      break;
  }
  if (!ready) {
    throw ConfigError(std::string("variant ") + VariantName(variant) +
                      " is not trained on this model");
  }

  ModelJointScorer scorer(model, features);
  StreamingDecoder decoder(&scorer, opts.beam_size, opts.max_expansions);
  const int t_len = scorer.NumFrames();
  StreamResult result;
  result.pause_trace.reserve(static_cast<std::size_t>(t_len));
  result.finish_trace.reserve(static_cast<std::size_t>(t_len));
  result.activity.reserve(static_cast<std::size_t>(t_len));
  const int pause_id = model.vocab.PauseId();
  const int finish_id = model.vocab.FinishId();
  std::size_t prev_words = 0;
  for (int t = 0; t < t_len; ++t) {
    decoder.Step(t);
    const Hypothesis& best = decoder.Best();
    double p_pause = 0.0;
    double p_finish = 0.0;
    bool active;
    if (variant == Variant::kAcoustic) {
      Tensor<double> logits = AcousticLogits(model, EncRow(scorer.Encoded(), t));
      LogSoftmaxRow(logits.Data(), kNumFrameClasses);
      p_pause = std::exp(logits[kFramePause]);
      p_finish = std::exp(logits[kFrameFinish]);
      int argmax = 0;
      for (int c = 1; c < kNumFrameClasses; ++c) {
        if (logits[c] > logits[argmax]) argmax = c;
      }
      active = argmax == kFrameTalk;
    } else {
      std::size_t words = 0;
      for (int id : best.tokens) {
        if (model.vocab.IsWord(id)) ++words;
      }
      active = words > prev_words;
      prev_words = words;
      if (variant == Variant::kText) {
        Tensor<double> logits =
            TextLogits(model, scorer.PredictionFor(best.tokens));
        const int rows = static_cast<int>(logits.Numel());
        LogSoftmaxRow(logits.Data(), rows);
        p_pause = std::exp(logits[pause_id - 1]);
        p_finish = std::exp(logits[finish_id - 1]);
      } else if (variant == Variant::kDualJoint) {
        Tensor<double> logits =
            JointLogits(model, JointKind::kTurn, EncRow(scorer.Encoded(), t),
                        scorer.PredictionFor(best.tokens));
        const int rows = static_cast<int>(logits.Numel());
        LogSoftmaxRow(logits.Data(), rows);
        p_pause = std::exp(logits[pause_id]);
        p_finish = std::exp(logits[finish_id]);
      } else {
        const std::vector<double> lp = scorer.LogProbs(t, best.tokens);
        p_pause = std::exp(lp[static_cast<std::size_t>(pause_id)]);
        p_finish = std::exp(lp[static_cast<std::size_t>(finish_id)]);
      }
    }
    result.pause_trace.push_back(p_pause);
    result.finish_trace.push_back(p_finish);
    result.activity.push_back(active ? 1 : 0);
  }
  result.hypothesis = decoder.Best();
  result.decisions = ReplayDecisions(
      result.pause_trace, result.finish_trace, result.activity,
      opts.pause_threshold, opts.finish_threshold, opts.frame_rate,
      opts.debounce_sec);
  return result;
}

}  // namespace convturn
