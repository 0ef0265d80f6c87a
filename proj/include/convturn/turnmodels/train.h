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

#ifndef CONVTURN_TURNMODELS_TRAIN_H_
#define CONVTURN_TURNMODELS_TRAIN_H_

#include <cstdint>
#include <vector>

#include "convturn/annotate/annotate.h"
#include "convturn/corpus/corpus.h"
#include "convturn/turnmodels/model.h"

namespace convturn {

struct TrainOptions {
  int epochs = 2;
  double lr = 2e-3;
  double clip_norm = 5.0;
  // Scales the label-emission branch of the transducer gradient to pull
  // emissions earlier; 0 disables.
  double fastemit_lambda = 5e-3;
  uint64_t shuffle_seed = 99;
  // Utterances between progress lines on stderr; 0 silences them.
  int log_every = 0;
};

// Throws ConfigError on out-of-range fields.
void ValidateTrainOptions(const TrainOptions& opts);

struct TrainStats {
  std::vector<double> epoch_mean_loss;  // nats per utterance
  double final_loss = 0.0;              // mean over the last epoch
  std::int64_t steps = 0;
};

// Loss -log P(labels | features) of one utterance through the selected
// joint. With backward set, accumulates parameter gradients (FastEmit scales
// the label-emission branch); without it, runs forward only. Exposed so the
// whole-model gradient can be verified against finite differences.
double TransducerUtteranceGrad(TurnTakingModel* model,
                               const Tensor<float>& features,
                               const std::vector<int>& labels, JointKind kind,
                               bool transparent_pred, double fastemit_lambda,
                               bool backward);

// Per-frame classes for the acoustic head: frames inside words are talking,
// silence frames take the class of the annotation token covering them, and
// leading silence is a pause whether or not it was long enough to annotate.
// Throws DataError on unsorted or overlapping segments, spans outside the
// utterance, or a transcript for a different utterance.
std::vector<int> FrameTargetsFromAlignment(const Utterance& utt,
                                           const AnnotatedTranscript& annotated,
                                           double frame_rate);

// Trains encoder, prediction network, and recognizer joint on the base
// transcripts with the transducer objective. Throws ConfigError on an empty
// corpus, DataError on out-of-vocabulary transcript words.
TurnTakingModel TrainStage1Asr(const Corpus& train, const ModelConfig& config,
                               const TrainOptions& opts,
                               TrainStats* stats = nullptr);

// Trains one recognizer joint over the expanded token space from scratch on
// annotated transcripts; the decoder may then emit turn tokens directly.
TurnTakingModel TrainE2eSingleJoint(
    const Corpus& train, const std::vector<AnnotatedTranscript>& annotations,
    const ModelConfig& config, const TrainOptions& opts,
    TrainStats* stats = nullptr);

// Trains the 3-way frame classifier on top of the frozen encoder.
// Annotations must align one-to-one with corpus utterances.
void TrainAcousticHead(TurnTakingModel* model, const Corpus& corpus,
                       const std::vector<AnnotatedTranscript>& annotations,
                       const TrainOptions& opts, TrainStats* stats = nullptr);

// Trains the next-token head on top of the frozen prediction network with
// cross-entropy over the expanded tokens. Histories contain words only, so
// training matches inference, where histories come from recognizer output.
void TrainTextPredictor(TurnTakingModel* model, const Corpus& corpus,
                        const std::vector<AnnotatedTranscript>& annotations,
                        const TrainOptions& opts, TrainStats* stats = nullptr);

// Initializes the turn joint from the recognizer joint, freezes everything
// else, and trains it on expanded label sequences. Turn tokens are
// transparent to the prediction network here and at inference. Throws
// ConfigError when the model's recognizer already covers the expanded space
// or stage 1 has not run.
void TrainTurnJoint(TurnTakingModel* model, const Corpus& corpus,
                    const std::vector<AnnotatedTranscript>& annotations,
                    const TrainOptions& opts, TrainStats* stats = nullptr);

}  // namespace convturn

#endif  // CONVTURN_TURNMODELS_TRAIN_H_
