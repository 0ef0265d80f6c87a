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

#ifndef CONVTURN_TURNMODELS_MODEL_H_
#define CONVTURN_TURNMODELS_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "convturn/nn/ops.h"
#include "convturn/nn/param_store.h"
#include "convturn/nn/tensor.h"
#include "convturn/transducer/vocab.h"

namespace convturn {

// Architecture hyperparameters. The encoder consumes, per frame, the
// `encoder_raw_frames` most recent frames plus `encoder_blocks` means of
// `encoder_block_size` frames each, all strictly at or before the current
// frame, so the receptive field is bounded and causal.
struct ModelConfig {
  int feature_dim = 16;
  int encoder_raw_frames = 4;
  int encoder_blocks = 8;
  int encoder_block_size = 8;
  int encoder_layers = 2;
  int encoder_hidden = 48;
  int encoder_dim = 32;
  // Prediction network: embedding + one recurrent cell over the last
  // `pred_context` non-blank tokens, restarted from the zero state.
  int pred_context = 4;
  int pred_embed = 24;
  int pred_hidden = 32;
  int joint_hidden = 32;
  int vocab_words = 0;
  uint64_t seed = 1;
};

// Throws ConfigError on out-of-range fields.
void ValidateModelConfig(const ModelConfig& config);

enum class Variant { kAcoustic, kText, kDualJoint, kE2eSingle };

const char* VariantName(Variant variant);
Variant VariantFromName(const std::string& name);

enum class JointKind { kAsr, kTurn };

// Acoustic-head class order.
inline constexpr int kFrameTalk = 0;
inline constexpr int kFramePause = 1;
inline constexpr int kFrameFinish = 2;
inline constexpr int kNumFrameClasses = 3;

// The full parameter set for every detector variant: shared encoder and
// prediction network, a recognizer joint, a turn joint over the expanded
// token space, a 3-way acoustic head on the encoder, and a next-token text
// head on the prediction network. Parameters are created in a fixed order
// that defines the checkpoint layout; unused subnetworks stay at their
// initialization. When expanded_asr is set the recognizer joint itself
// covers the expanded space and may emit turn tokens while decoding.
struct TurnTakingModel {
  ModelConfig config;
  Vocab vocab;
  bool expanded_asr = false;
  ParamStore<double> params;

  bool stage1_trained = false;
  bool acoustic_trained = false;
  bool text_trained = false;
  bool turn_trained = false;

  TurnTakingModel(const ModelConfig& config, std::vector<std::string> words,
                  bool expanded_asr = false);
  TurnTakingModel(TurnTakingModel&&) = default;
  TurnTakingModel& operator=(TurnTakingModel&&) = default;

  // Frames of context behind the current frame that can influence its
  // encoder output.
  int ReceptiveField() const;
  int EncoderInputDim() const;
  // Output distribution size of the recognizer joint, blank included.
  int AsrOutputSize() const;
};

// Encoder activations retained for the backward pass.
struct EncoderForward {
  Tensor<double> inputs;                // [T, in_dim]
  std::vector<Tensor<double>> hidden;   // per layer, [T, encoder_hidden]
  Tensor<double> outputs;               // [T, encoder_dim]
};

EncoderForward RunEncoder(const TurnTakingModel& model,
                          const Tensor<float>& features);
// Accumulates parameter gradients from d_outputs [T, encoder_dim].
void EncoderBackward(TurnTakingModel* model, const EncoderForward& fwd,
                     const Tensor<double>& d_outputs);

// Per-frame encoder outputs [T, encoder_dim] without caches.
Tensor<double> EncoderOutputs(const TurnTakingModel& model,
                              const Tensor<float>& features);

// Prediction-network activations over the fed suffix.
struct PredForward {
  std::vector<int> fed;                  // ids consumed, oldest first
  std::vector<Tensor<double>> states;    // h_0 (zero) .. h_n
  std::vector<GruCache<double>> steps;   // one per consumed id
  Tensor<double> state;                  // == states.back()
};

// Runs the recurrence over the last <= pred_context ids of `tokens`. Ids
// must lie in 1..expanded-1; callers decide whether turn tokens appear in
// the history at all.
PredForward RunPrediction(const TurnTakingModel& model,
                          const std::vector<int>& tokens);
void PredictionBackward(TurnTakingModel* model, const PredForward& fwd,
                        const Tensor<double>& d_state);

Tensor<double> PredictionState(const TurnTakingModel& model,
                               const std::vector<int>& tokens);

// Joint activations for one (frame, prefix) pair.
struct JointForward {
  Tensor<double> pre;     // tanh output, [joint_hidden]
  Tensor<double> logits;  // [AsrOutputSize] or [ExpandedSize]
};

JointForward RunJoint(const TurnTakingModel& model, JointKind kind,
                      const Tensor<double>& enc_row,
                      const Tensor<double>& pred_state);
// Accumulates joint parameter gradients; d_enc/d_pred may be null to skip.
void JointBackward(TurnTakingModel* model, JointKind kind,
                   const Tensor<double>& enc_row,
                   const Tensor<double>& pred_state, const JointForward& fwd,
                   const Tensor<double>& d_logits, Tensor<double>* d_enc,
                   Tensor<double>* d_pred);

Tensor<double> JointLogits(const TurnTakingModel& model, JointKind kind,
                           const Tensor<double>& enc_row,
                           const Tensor<double>& pred_state);

// 3-way frame classifier logits (talking / pause / finish).
Tensor<double> AcousticLogits(const TurnTakingModel& model,
                              const Tensor<double>& enc_row);
// Next-token logits over the expanded non-blank tokens; row id-1 scores id.
Tensor<double> TextLogits(const TurnTakingModel& model,
                          const Tensor<double>& pred_state);

// Copies the recognizer joint into the turn joint, widening the output
// layer by the two turn tokens; the added output units start at zero so the
// starting point scores base tokens identically. Requires a base-vocab
// recognizer.
void InitTurnJointFromAsr(TurnTakingModel* model);

// Maps transcript tokens (words, "<pause>", "</s>") to ids; throws
// DataError on tokens outside the vocabulary.
std::vector<int> TranscriptTokenIds(const Vocab& vocab,
                                    const std::vector<std::string>& tokens);

// Checkpoint (stem.ckpt) plus JSON manifest (stem.json) carrying config,
// vocabulary, trained variants, and decision-threshold defaults.
void SaveModel(const TurnTakingModel& model, const std::string& stem,
               double pause_threshold = 0.5, double finish_threshold = 0.5);
TurnTakingModel LoadModel(const std::string& stem);
// Thresholds recorded in the manifest at `stem`.
void LoadModelThresholds(const std::string& stem, double* pause_threshold,
                         double* finish_threshold);

}  // namespace convturn

#endif  // CONVTURN_TURNMODELS_MODEL_H_
