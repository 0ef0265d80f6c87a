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

#include "convturn/turnmodels/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "convturn/common/error.h"
#include "convturn/nn/adam.h"
#include "convturn/transducer/lattice.h"

namespace convturn {

namespace {

constexpr double kTimeTol = 1e-6;

void CheckCorpusVocab(const TurnTakingModel& model, const Corpus& corpus) {
  if (model.vocab.Words() != corpus.vocab_words) {
    throw ConfigError("corpus vocabulary does not match the model");
  }
}

void CheckAligned(const Corpus& corpus,
                  const std::vector<AnnotatedTranscript>& annotations) {
  if (annotations.size() != corpus.utterances.size()) {
    throw DataError("got " + std::to_string(annotations.size()) +
                    " annotations for " +
                    std::to_string(corpus.utterances.size()) + " utterances");
  }
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].utt_id != corpus.utterances[i].id) {
      throw DataError("annotation " + std::to_string(i) + " is for " +
                      annotations[i].utt_id + ", expected " +
                      corpus.utterances[i].id);
    }
  }
}

void CheckNotEmpty(const Corpus& corpus) {
  if (corpus.utterances.empty()) {
    throw ConfigError("training corpus is empty");
  }
}

std::vector<int> ShuffledOrder(int n, uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(Rng::Derive(seed, static_cast<uint64_t>(epoch) + 1, 0));
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.UniformInt(0, i))]);
  }
  return order;
}

}  // namespace

// Forward over the full decision grid, lattice gradient, then backward
// through the selected joint and the encoder and prediction network.
double TransducerUtteranceGrad(TurnTakingModel* model,
                               const Tensor<float>& features,
                               const std::vector<int>& labels, JointKind kind,
                               bool transparent_pred, double fastemit_lambda,
                               bool backward) {
  EncoderForward efwd = RunEncoder(*model, features);
  const int t_len = efwd.outputs.Dim(0);
  if (t_len == 0) throw DataError("utterance has no frames");
  const int u_len = static_cast<int>(labels.size());
  const int k = kind == JointKind::kAsr ? model->AsrOutputSize()
                                        : model->vocab.ExpandedSize();
  const int joint = model->config.joint_hidden;
  const int pred_dim = model->config.pred_hidden;

  std::vector<PredForward> pred(static_cast<std::size_t>(u_len) + 1);
  std::vector<int> history;
  for (int u = 0; u <= u_len; ++u) {
    pred[static_cast<std::size_t>(u)] = RunPrediction(*model, history);
    if (u < u_len) {
      const int id = labels[static_cast<std::size_t>(u)];
      if (!transparent_pred || model->vocab.IsWord(id)) history.push_back(id);
    }
  }
  Tensor<double> pstates({u_len + 1, pred_dim});
  for (int u = 0; u <= u_len; ++u) {
    const Tensor<double>& s = pred[static_cast<std::size_t>(u)].state;
    std::copy(s.Data(), s.Data() + pred_dim,
              pstates.Data() + static_cast<std::size_t>(u) * pred_dim);
  }

  const std::string prefix =
      kind == JointKind::kAsr ? "joint.asr" : "joint.turn";
  Param<double>& we = model->params.Get(prefix + ".enc_w");
  Param<double>& wp = model->params.Get(prefix + ".pred_w");
  Param<double>& bj = model->params.Get(prefix + ".b");
  Param<double>& wo = model->params.Get(prefix + ".out_w");
  Param<double>& bo = model->params.Get(prefix + ".out_b");

  const Tensor<double> zero_bias({joint});
  const Tensor<double> et = AffineForward(we.value, zero_bias, efwd.outputs);
  const Tensor<double> pu = AffineForward(wp.value, zero_bias, pstates);

  Tensor<double> a_cache({t_len, u_len + 1, joint});
  TransducerLattice lat;
  lat.logp = Tensor<double>({t_len, u_len + 1, k});
  lat.labels = labels;
  const double* bj_p = bj.value.Data();
  const double* bo_p = bo.value.Data();
  const double* wo_p = wo.value.Data();
  for (int t = 0; t < t_len; ++t) {
    const double* et_row = et.Data() + static_cast<std::size_t>(t) * joint;
    for (int u = 0; u <= u_len; ++u) {
      const double* pu_row = pu.Data() + static_cast<std::size_t>(u) * joint;
      double* a = a_cache.Data() +
                  (static_cast<std::size_t>(t) * (u_len + 1) + u) * joint;
      for (int j = 0; j < joint; ++j) {
        a[j] = std::tanh(et_row[j] + pu_row[j] + bj_p[j]);
      }
      double* lp = lat.logp.Data() +
                   (static_cast<std::size_t>(t) * (u_len + 1) + u) * k;
      std::copy(bo_p, bo_p + k, lp);
      for (int j = 0; j < joint; ++j) {
        const double av = a[j];
        const double* wr = wo_p + static_cast<std::size_t>(j) * k;
        for (int c = 0; c < k; ++c) lp[c] += av * wr[c];
      }
      LogSoftmaxRow(lp, k);
    }
  }

  if (!backward) return RnntLogLikelihood(lat) * -1.0;

  Tensor<double> dlogits;
  const double loss = RnntGrad(lat, fastemit_lambda, &dlogits);

  Tensor<double> d_et({t_len, joint});
  Tensor<double> d_pu({u_len + 1, joint});
  std::vector<double> da(static_cast<std::size_t>(joint));
  double* wo_g = wo.grad.Data();
  double* bo_g = bo.grad.Data();
  double* bj_g = bj.grad.Data();
  for (int t = 0; t < t_len; ++t) {
    double* det_row = d_et.Data() + static_cast<std::size_t>(t) * joint;
    for (int u = 0; u <= u_len; ++u) {
      const double* dl = dlogits.Data() +
                         (static_cast<std::size_t>(t) * (u_len + 1) + u) * k;
      const double* a = a_cache.Data() +
                        (static_cast<std::size_t>(t) * (u_len + 1) + u) * joint;
      for (int c = 0; c < k; ++c) bo_g[c] += dl[c];
      for (int j = 0; j < joint; ++j) {
        const double av = a[j];
        const double* wr = wo_p + static_cast<std::size_t>(j) * k;
        double* gw = wo_g + static_cast<std::size_t>(j) * k;
        double acc = 0.0;
        for (int c = 0; c < k; ++c) {
          gw[c] += av * dl[c];
          acc += wr[c] * dl[c];
        }
        da[static_cast<std::size_t>(j)] = acc;
      }
      double* dpu_row = d_pu.Data() + static_cast<std::size_t>(u) * joint;
      for (int j = 0; j < joint; ++j) {
        const double dz =
            da[static_cast<std::size_t>(j)] * (1.0 - a[j] * a[j]);
        bj_g[j] += dz;
        det_row[j] += dz;
        dpu_row[j] += dz;
      }
    }
  }

  Tensor<double> d_enc =
      AffineBackward<double>(we.value, efwd.outputs, d_et, &we.grad, nullptr);
  Tensor<double> d_pred =
      AffineBackward<double>(wp.value, pstates, d_pu, &wp.grad, nullptr);
  // Frozen subnetworks never receive updates, so their backward work is
  // skipped outright.
  if (!model->params.Get("enc.out.w").frozen) {
    EncoderBackward(model, efwd, d_enc);
  }
  if (!model->params.Get("pred.embed").frozen) {
    Tensor<double> row({pred_dim});
    for (int u = 0; u <= u_len; ++u) {
      const double* src = d_pred.Data() + static_cast<std::size_t>(u) * pred_dim;
      std::copy(src, src + pred_dim, row.Data());
      PredictionBackward(model, pred[static_cast<std::size_t>(u)], row);
    }
  }
  return loss;
}

namespace {

void RunTransducerEpochs(TurnTakingModel* model, const Corpus& corpus,
                         const std::vector<std::vector<int>>& labels,
                         JointKind kind, bool transparent_pred,
                         const TrainOptions& opts, TrainStats* stats,
                         const char* tag) {
  AdamOptions adam_opts;
  adam_opts.lr = opts.lr;
  Adam<double> adam(&model->params, adam_opts);
  const int n = static_cast<int>(corpus.utterances.size());
  TrainStats local;
  TrainStats* st = stats ? stats : &local;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const std::vector<int> order = ShuffledOrder(n, opts.shuffle_seed, epoch);
    double sum = 0.0;
    int done = 0;
    for (int i : order) {
      const Utterance& utt = corpus.utterances[static_cast<std::size_t>(i)];
      sum += TransducerUtteranceGrad(model, utt.features,
                                     labels[static_cast<std::size_t>(i)], kind,
                                     transparent_pred, opts.fastemit_lambda,
                                     true);
      ClipGradNorm(&model->params, opts.clip_norm);
      adam.Step();
      ++st->steps;
      ++done;
      if (opts.log_every > 0 && done % opts.log_every == 0) {
        std::fprintf(stderr, "[train %s] epoch %d utt %d/%d mean loss %.4f\n",
                     tag, epoch + 1, done, n, sum / done);
      }
    }
    st->epoch_mean_loss.push_back(sum / n);
  }
  st->final_loss = st->epoch_mean_loss.back();
}

std::vector<std::vector<int>> BaseLabelSequences(const TurnTakingModel& model,
                                                 const Corpus& corpus) {
  std::vector<std::vector<int>> labels;
  labels.reserve(corpus.utterances.size());
  for (const Utterance& utt : corpus.utterances) {
    std::vector<int> ids = TranscriptTokenIds(model.vocab, utt.transcript);
    for (int id : ids) {
      if (model.vocab.IsTurnToken(id)) {
        throw DataError("transcript of " + utt.id + " contains turn tokens");
      }
    }
    labels.push_back(std::move(ids));
  }
  return labels;
}

std::vector<std::vector<int>> ExpandedLabelSequences(
    const TurnTakingModel& model,
    const std::vector<AnnotatedTranscript>& annotations) {
  std::vector<std::vector<int>> labels;
  labels.reserve(annotations.size());
  for (const AnnotatedTranscript& ann : annotations) {
    labels.push_back(TranscriptTokenIds(model.vocab, ann.tokens));
  }
  return labels;
}

}  // namespace

void ValidateTrainOptions(const TrainOptions& opts) {
  if (opts.epochs < 1) throw ConfigError("train options: epochs must be >= 1");
  if (!(opts.lr > 0.0) || !std::isfinite(opts.lr)) {
    throw ConfigError("train options: lr must be positive");
  }
  if (!(opts.clip_norm > 0.0)) {
    throw ConfigError("train options: clip_norm must be positive");
  }
  if (opts.fastemit_lambda < 0.0 || !std::isfinite(opts.fastemit_lambda)) {
    throw ConfigError("train options: fastemit_lambda must be >= 0");
  }
}

std::vector<int> FrameTargetsFromAlignment(const Utterance& utt,
                                           const AnnotatedTranscript& annotated,
                                           double frame_rate) {
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
  if (annotated.utt_id != utt.id) {
    throw DataError("annotated transcript is for " + annotated.utt_id +
                    ", utterance is " + utt.id);
  }
  double prev_end = 0.0;
  for (const TimedWord& w : utt.words) {
    if (w.start < prev_end - kTimeTol || w.end < w.start - kTimeTol) {
      throw DataError("overlapping or unsorted word segments in " + utt.id);
    }
    if (w.end > utt.duration + kTimeTol) {
      throw DataError("word past utterance end in " + utt.id);
    }
    prev_end = w.end;
  }
  const int t_len = utt.features.Dim(0);
  std::vector<int> targets(static_cast<std::size_t>(t_len), kFrameTalk);
  const auto frames_in = [&](double start, double end, int cls) {
    for (int t = 0; t < t_len; ++t) {
      const double center = (t + 0.5) / frame_rate;
      if (center >= start && center < end) {
        targets[static_cast<std::size_t>(t)] = cls;
      }
    }
  };
  const double lead_end =
      utt.words.empty() ? utt.duration : utt.words.front().start;
  frames_in(0.0, lead_end, kFramePause);
  for (const InsertedToken& tok : annotated.inserted) {
    int cls;
    if (tok.token == Vocab::kPauseText) {
      cls = kFramePause;
    } else if (tok.token == Vocab::kFinishText) {
      cls = kFrameFinish;
    } else {
      throw DataError("inserted token is not a turn token: " + tok.token);
    }
    if (tok.silence_start < -kTimeTol ||
        tok.silence_end > utt.duration + kTimeTol ||
        tok.silence_end < tok.silence_start - kTimeTol) {
      throw DataError("silence span outside utterance in " + utt.id);
    }
    for (const TimedWord& w : utt.words) {
      const double overlap = std::min(tok.silence_end, w.end) -
                             std::max(tok.silence_start, w.start);
      if (overlap > kTimeTol) {
        throw DataError("silence span overlaps word \"" + w.text + "\" in " +
                        utt.id);
      }
    }
    frames_in(tok.silence_start, tok.silence_end, cls);
  }
  return targets;
}

TurnTakingModel TrainStage1Asr(const Corpus& train, const ModelConfig& config,
                               const TrainOptions& opts, TrainStats* stats) {
  ValidateTrainOptions(opts);
  CheckNotEmpty(train);
  ModelConfig cfg = config;
  if (cfg.vocab_words == 0) {
    cfg.vocab_words = static_cast<int>(train.vocab_words.size());
  }
  TurnTakingModel model(cfg, train.vocab_words, false);
  const std::vector<std::vector<int>> labels = BaseLabelSequences(model, train);
  RunTransducerEpochs(&model, train, labels, JointKind::kAsr, false, opts,
                      stats, "asr");
  model.stage1_trained = true;
  return model;
}

TurnTakingModel TrainE2eSingleJoint(
    const Corpus& train, const std::vector<AnnotatedTranscript>& annotations,
    const ModelConfig& config, const TrainOptions& opts, TrainStats* stats) {
  ValidateTrainOptions(opts);
  CheckNotEmpty(train);
  CheckAligned(train, annotations);
  ModelConfig cfg = config;
  if (cfg.vocab_words == 0) {
    cfg.vocab_words = static_cast<int>(train.vocab_words.size());
  }
  TurnTakingModel model(cfg, train.vocab_words, true);
  const std::vector<std::vector<int>> labels =
      ExpandedLabelSequences(model, annotations);
  RunTransducerEpochs(&model, train, labels, JointKind::kAsr, false, opts,
                      stats, "e2e");
  model.stage1_trained = true;
  return model;
}

void TrainAcousticHead(TurnTakingModel* model, const Corpus& corpus,
                       const std::vector<AnnotatedTranscript>& annotations,
                       const TrainOptions& opts, TrainStats* stats) {
  ValidateTrainOptions(opts);
  CheckNotEmpty(corpus);
  CheckCorpusVocab(*model, corpus);
  CheckAligned(corpus, annotations);
  if (!model->stage1_trained) {
    throw ConfigError("stage 1 must be trained before the acoustic head");
  }
  const int n = static_cast<int>(corpus.utterances.size());
  std::vector<std::vector<int>> targets;
  targets.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    targets.push_back(FrameTargetsFromAlignment(
        corpus.utterances[static_cast<std::size_t>(i)],
        annotations[static_cast<std::size_t>(i)], corpus.frame_rate));
  }

  model->params.SetAllFrozen(true);
  model->params.SetFrozenByPrefix("head.acoustic.", false);
  Param<double>& w = model->params.Get("head.acoustic.w");
  Param<double>& b = model->params.Get("head.acoustic.b");
  AdamOptions adam_opts;
  adam_opts.lr = opts.lr;
  Adam<double> adam(&model->params, adam_opts);
  TrainStats local;
  TrainStats* st = stats ? stats : &local;
  const int enc_dim = model->config.encoder_dim;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double sum = 0.0;
    for (int i : ShuffledOrder(n, opts.shuffle_seed, epoch)) {
      const Utterance& utt = corpus.utterances[static_cast<std::size_t>(i)];
      const std::vector<int>& cls = targets[static_cast<std::size_t>(i)];
      const Tensor<double> enc = EncoderOutputs(*model, utt.features);
      const int t_len = enc.Dim(0);
      if (t_len == 0) throw DataError("utterance has no frames");
      Tensor<double> dlogits({t_len, kNumFrameClasses});
      Tensor<double> row({enc_dim});
      Tensor<double> drow({kNumFrameClasses});
      double loss = 0.0;
      for (int t = 0; t < t_len; ++t) {
        const double* src = enc.Data() + static_cast<std::size_t>(t) * enc_dim;
        std::copy(src, src + enc_dim, row.Data());
        const Tensor<double> logits = AffineForward(w.value, b.value, row);
        loss += CrossEntropyFromLogits(logits,
                                       cls[static_cast<std::size_t>(t)], &drow);
        double* dst =
            dlogits.Data() + static_cast<std::size_t>(t) * kNumFrameClasses;
        for (int c = 0; c < kNumFrameClasses; ++c) dst[c] = drow[c] / t_len;
      }
      AffineBackward(w.value, enc, dlogits, &w.grad, &b.grad);
      ClipGradNorm(&model->params, opts.clip_norm);
      adam.Step();
      sum += loss / t_len;
      ++st->steps;
    }
    st->epoch_mean_loss.push_back(sum / n);
  }
  st->final_loss = st->epoch_mean_loss.back();
  model->params.SetAllFrozen(false);
  model->acoustic_trained = true;
}

void TrainTextPredictor(TurnTakingModel* model, const Corpus& corpus,
                        const std::vector<AnnotatedTranscript>& annotations,
                        const TrainOptions& opts, TrainStats* stats) {
  ValidateTrainOptions(opts);
  CheckNotEmpty(corpus);
  CheckCorpusVocab(*model, corpus);
  CheckAligned(corpus, annotations);
  if (!model->stage1_trained) {
    throw ConfigError("stage 1 must be trained before the text head");
  }
  struct Example {
    std::vector<int> history;  // word ids only, at most pred_context
    int target_row;
  };
  const int n = static_cast<int>(corpus.utterances.size());
  const int context = model->config.pred_context;
  std::vector<std::vector<Example>> examples(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::vector<int> ids = TranscriptTokenIds(
        model->vocab, annotations[static_cast<std::size_t>(i)].tokens);
    std::vector<int> words;
    for (int id : ids) {
      Example ex;
      const std::size_t take =
          std::min(words.size(), static_cast<std::size_t>(context));
      ex.history.assign(words.end() - static_cast<std::ptrdiff_t>(take),
                        words.end());
      ex.target_row = id - 1;
      examples[static_cast<std::size_t>(i)].push_back(std::move(ex));
      if (model->vocab.IsWord(id)) words.push_back(id);
    }
  }

  model->params.SetAllFrozen(true);
  model->params.SetFrozenByPrefix("head.text.", false);
  Param<double>& w = model->params.Get("head.text.w");
  Param<double>& b = model->params.Get("head.text.b");
  AdamOptions adam_opts;
  adam_opts.lr = opts.lr;
  Adam<double> adam(&model->params, adam_opts);
  TrainStats local;
  TrainStats* st = stats ? stats : &local;
  // Shared params are frozen, so prediction states are constant and can be
  // memoized across epochs.
  std::map<std::vector<int>, Tensor<double>> state_cache;
  const auto state_of = [&](const std::vector<int>& history) {
    auto it = state_cache.find(history);
    if (it == state_cache.end()) {
      it = state_cache.emplace(history, PredictionState(*model, history)).first;
    }
    return it;
  };
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double sum = 0.0;
    int counted = 0;
    for (int i : ShuffledOrder(n, opts.shuffle_seed, epoch)) {
      const std::vector<Example>& exs = examples[static_cast<std::size_t>(i)];
      if (exs.empty()) continue;
      double loss = 0.0;
      Tensor<double> dl;
      for (const Example& ex : exs) {
        const Tensor<double>& state = state_of(ex.history)->second;
        const Tensor<double> logits = TextLogits(*model, state);
        loss += CrossEntropyFromLogits(logits, ex.target_row, &dl);
        for (std::size_t c = 0; c < dl.Numel(); ++c) {
          dl[static_cast<int64_t>(c)] /= static_cast<double>(exs.size());
        }
        AffineBackward(w.value, state, dl, &w.grad, &b.grad);
      }
      ClipGradNorm(&model->params, opts.clip_norm);
      adam.Step();
      sum += loss / static_cast<double>(exs.size());
      ++counted;
      ++st->steps;
    }
    st->epoch_mean_loss.push_back(counted > 0 ? sum / counted : 0.0);
  }
  st->final_loss = st->epoch_mean_loss.back();
  model->params.SetAllFrozen(false);
  model->text_trained = true;
}

void TrainTurnJoint(TurnTakingModel* model, const Corpus& corpus,
                    const std::vector<AnnotatedTranscript>& annotations,
                    const TrainOptions& opts, TrainStats* stats) {
  ValidateTrainOptions(opts);
  CheckNotEmpty(corpus);
  CheckCorpusVocab(*model, corpus);
  CheckAligned(corpus, annotations);
  if (model->expanded_asr) {
    throw ConfigError(
        "turn joint training requires a base-vocab recognizer joint");
  }
  if (!model->stage1_trained) {
    throw ConfigError("stage 1 must be trained before the turn joint");
  }
  const std::vector<std::vector<int>> labels =
      ExpandedLabelSequences(*model, annotations);
  InitTurnJointFromAsr(model);
  model->params.SetAllFrozen(true);
  model->params.SetFrozenByPrefix("joint.turn.", false);
  RunTransducerEpochs(model, corpus, labels, JointKind::kTurn, true, opts,
                      stats, "turn");
  model->params.SetAllFrozen(false);
  model->turn_trained = true;
}

}  // namespace convturn
