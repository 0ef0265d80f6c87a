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

#include "convturn/turnmodels/model.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "convturn/common/error.h"
#include "convturn/nn/checkpoint.h"
#include "nlohmann/json.hpp"

namespace convturn {

namespace {

using nlohmann::json;

// Stream id for parameter initialization, disjoint from corpus streams.
constexpr uint64_t kParamStream = 4;

void RequirePositive(int value, const char* name) {
  if (value < 1) {
    throw ConfigError(std::string("model config: ") + name +
                      " must be positive");
  }
}

const Param<double>& P(const TurnTakingModel& model, const std::string& name) {
  const Param<double>* p = model.params.Find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return *p;
}

}  // namespace

void ValidateModelConfig(const ModelConfig& config) {
  RequirePositive(config.feature_dim, "feature_dim");
  RequirePositive(config.encoder_raw_frames, "encoder_raw_frames");
  if (config.encoder_blocks < 0) {
    throw ConfigError("model config: encoder_blocks must be non-negative");
  }
  RequirePositive(config.encoder_block_size, "encoder_block_size");
  RequirePositive(config.encoder_layers, "encoder_layers");
  RequirePositive(config.encoder_hidden, "encoder_hidden");
  RequirePositive(config.encoder_dim, "encoder_dim");
  RequirePositive(config.pred_context, "pred_context");
  RequirePositive(config.pred_embed, "pred_embed");
  RequirePositive(config.pred_hidden, "pred_hidden");
  RequirePositive(config.joint_hidden, "joint_hidden");
  RequirePositive(config.vocab_words, "vocab_words");
}

const char* VariantName(Variant variant) {
  switch (variant) {
    case Variant::kAcoustic:
      return "acoustic";
    case Variant::kText:
      return "text";
    case Variant::kDualJoint:
      return "dual_joint";
    case Variant::kE2eSingle:
      return "e2e_single";
  }
  throw ConfigError("unknown variant value");
}

Variant VariantFromName(const std::string& name) {
  if (name == "acoustic") return Variant::kAcoustic;
  if (name == "text") return Variant::kText;
  if (name == "dual_joint") return Variant::kDualJoint;
  if (name == "e2e_single") return Variant::kE2eSingle;
  throw ConfigError("unknown variant: " + name);
}

TurnTakingModel::TurnTakingModel(const ModelConfig& config_in,
                                 std::vector<std::string> words,
                                 bool expanded_asr_in)
    : config(config_in), vocab(std::move(words)), expanded_asr(expanded_asr_in) {
  ValidateModelConfig(config);
  if (vocab.NumWords() != config.vocab_words) {
    throw ConfigError("model config: vocab_words " +
                      std::to_string(config.vocab_words) +
                      " does not match word list size " +
                      std::to_string(vocab.NumWords()));
  }
  Rng rng(Rng::Derive(config.seed, kParamStream, 0));
  const int in_dim = EncoderInputDim();
  const int hid = config.encoder_hidden;
  const int enc = config.encoder_dim;
  const int joint = config.joint_hidden;
  const int k_asr = AsrOutputSize();
  const int k_turn = vocab.ExpandedSize();

  int layer_in = in_dim;
  for (int l = 0; l < config.encoder_layers; ++l) {
    const std::string prefix = "enc.l" + std::to_string(l);
    params.CreateInit(prefix + ".w", {layer_in, hid}, layer_in, &rng);
    params.Create(prefix + ".b", {hid});
    layer_in = hid;
  }
  params.CreateInit("enc.out.w", {hid, enc}, hid, &rng);
  params.Create("enc.out.b", {enc});

  params.CreateInit("pred.embed", {vocab.ExpandedSize(), config.pred_embed},
                    config.pred_embed, &rng);
  GruParams<double>::Create(&params, "pred.gru", config.pred_embed,
                            config.pred_hidden, &rng);

  params.CreateInit("joint.asr.enc_w", {enc, joint}, enc, &rng);
  params.CreateInit("joint.asr.pred_w", {config.pred_hidden, joint},
                    config.pred_hidden, &rng);
  params.Create("joint.asr.b", {joint});
  params.CreateInit("joint.asr.out_w", {joint, k_asr}, joint, &rng);
  params.Create("joint.asr.out_b", {k_asr});

  params.CreateInit("joint.turn.enc_w", {enc, joint}, enc, &rng);
  params.CreateInit("joint.turn.pred_w", {config.pred_hidden, joint},
                    config.pred_hidden, &rng);
  params.Create("joint.turn.b", {joint});
  params.CreateInit("joint.turn.out_w", {joint, k_turn}, joint, &rng);
  params.Create("joint.turn.out_b", {k_turn});

  params.CreateInit("head.acoustic.w", {enc, kNumFrameClasses}, enc, &rng);
  params.Create("head.acoustic.b", {kNumFrameClasses});

  const int text_out = vocab.ExpandedSize() - 1;
  params.CreateInit("head.text.w", {config.pred_hidden, text_out},
                    config.pred_hidden, &rng);
  params.Create("head.text.b", {text_out});
}

int TurnTakingModel::ReceptiveField() const {
  return config.encoder_raw_frames - 1 +
         config.encoder_blocks * config.encoder_block_size;
}

int TurnTakingModel::EncoderInputDim() const {
  return (config.encoder_raw_frames + config.encoder_blocks) *
         config.feature_dim;
}

int TurnTakingModel::AsrOutputSize() const {
  return expanded_asr ? vocab.ExpandedSize() : vocab.BaseSize();
}

EncoderForward RunEncoder(const TurnTakingModel& model,
                          const Tensor<float>& features) {
  const ModelConfig& cfg = model.config;
  if (features.NumAxes() != 2 || features.Dim(1) != cfg.feature_dim) {
    throw DataError("features must be [T, " +
                    std::to_string(cfg.feature_dim) + "], got " +
                    features.ShapeString());
  }
  const int t_len = features.Dim(0);
  const int d = cfg.feature_dim;
  const int raw = cfg.encoder_raw_frames;
  const int blocks = cfg.encoder_blocks;
  const int bs = cfg.encoder_block_size;

  EncoderForward fwd;
  fwd.inputs = Tensor<double>({t_len, model.EncoderInputDim()});
  const float* fp = features.Data();
  double* ip = fwd.inputs.Data();
  const std::size_t in_dim = static_cast<std::size_t>(model.EncoderInputDim());
  for (int t = 0; t < t_len; ++t) {
    double* row = ip + static_cast<std::size_t>(t) * in_dim;
    // Block means first (oldest block leftmost), then raw frames oldest to
    // newest; frames before the start contribute zeros.
    for (int b = 0; b < blocks; ++b) {
      double* slot = row + static_cast<std::size_t>(b) * d;
      const int newest = t - raw - (blocks - 1 - b) * bs;
      for (int k = 0; k < bs; ++k) {
        const int frame = newest - k;
        if (frame < 0) continue;
        const float* src = fp + static_cast<std::size_t>(frame) * d;
        for (int c = 0; c < d; ++c) slot[c] += src[c];
      }
      for (int c = 0; c < d; ++c) slot[c] /= bs;
    }
    double* raw_base = row + static_cast<std::size_t>(blocks) * d;
    for (int r = 0; r < raw; ++r) {
      const int frame = t - (raw - 1) + r;
      if (frame < 0) continue;
      const float* src = fp + static_cast<std::size_t>(frame) * d;
      double* slot = raw_base + static_cast<std::size_t>(r) * d;
      for (int c = 0; c < d; ++c) slot[c] = src[c];
    }
  }

  const Tensor<double>* x = &fwd.inputs;
  fwd.hidden.reserve(static_cast<std::size_t>(cfg.encoder_layers));
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string prefix = "enc.l" + std::to_string(l);
    Tensor<double> h = AffineForward(P(model, prefix + ".w").value,
                                     P(model, prefix + ".b").value, *x);
    for (std::size_t i = 0; i < h.Numel(); ++i) h[static_cast<int64_t>(i)] =
        std::tanh(h[static_cast<int64_t>(i)]);
    fwd.hidden.push_back(std::move(h));
    x = &fwd.hidden.back();
  }
  fwd.outputs = AffineForward(P(model, "enc.out.w").value,
                              P(model, "enc.out.b").value, *x);
  return fwd;
}

void EncoderBackward(TurnTakingModel* model, const EncoderForward& fwd,
                     const Tensor<double>& d_outputs) {
  const ModelConfig& cfg = model->config;
  Param<double>& out_w = model->params.Get("enc.out.w");
  Param<double>& out_b = model->params.Get("enc.out.b");
  const Tensor<double>& last =
      fwd.hidden.empty() ? fwd.inputs : fwd.hidden.back();
  Tensor<double> dh = AffineBackward(out_w.value, last, d_outputs, &out_w.grad,
                                     &out_b.grad);
  for (int l = cfg.encoder_layers - 1; l >= 0; --l) {
    const Tensor<double>& h = fwd.hidden[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < dh.Numel(); ++i) {
      const double hv = h[static_cast<int64_t>(i)];
      dh[static_cast<int64_t>(i)] *= 1.0 - hv * hv;
    }
    const std::string prefix = "enc.l" + std::to_string(l);
    Param<double>& w = model->params.Get(prefix + ".w");
    Param<double>& b = model->params.Get(prefix + ".b");
    const Tensor<double>& x =
        l == 0 ? fwd.inputs : fwd.hidden[static_cast<std::size_t>(l - 1)];
    dh = AffineBackward(w.value, x, dh, &w.grad, &b.grad);
  }
}

Tensor<double> EncoderOutputs(const TurnTakingModel& model,
                              const Tensor<float>& features) {
  return RunEncoder(model, features).outputs;
}

PredForward RunPrediction(const TurnTakingModel& model,
                          const std::vector<int>& tokens) {
  const ModelConfig& cfg = model.config;
  const int max_id = model.vocab.ExpandedSize() - 1;
  PredForward fwd;
  const std::size_t n = std::min<std::size_t>(
      tokens.size(), static_cast<std::size_t>(cfg.pred_context));
  fwd.fed.assign(tokens.end() - static_cast<std::ptrdiff_t>(n), tokens.end());
  fwd.states.push_back(Tensor<double>({cfg.pred_hidden}));
  const GruParams<double> gru = GruParams<double>::Lookup(
      &const_cast<TurnTakingModel&>(model).params, "pred.gru");
  const Tensor<double>& embed = P(model, "pred.embed").value;
  for (int id : fwd.fed) {
    if (id < 1 || id > max_id) {
      throw DataError("token id " + std::to_string(id) +
                      " outside 1.." + std::to_string(max_id));
    }
    Tensor<double> x({cfg.pred_embed});
    const double* row =
        embed.Data() + static_cast<std::size_t>(id) * cfg.pred_embed;
    std::copy(row, row + cfg.pred_embed, x.Data());
    fwd.steps.emplace_back();
    fwd.states.push_back(
        GruStepForward(gru, fwd.states.back(), x, &fwd.steps.back()));
  }
  fwd.state = fwd.states.back();
  return fwd;
}

void PredictionBackward(TurnTakingModel* model, const PredForward& fwd,
                        const Tensor<double>& d_state) {
  const GruParams<double> gru =
      GruParams<double>::Lookup(&model->params, "pred.gru");
  Param<double>& embed = model->params.Get("pred.embed");
  const int embed_dim = model->config.pred_embed;
  Tensor<double> dh = d_state;
  for (std::size_t i = fwd.fed.size(); i-- > 0;) {
    Tensor<double> dx;
    Tensor<double> dh_prev;
    GruStepBackward(gru, fwd.steps[i], dh, &dx, &dh_prev);
    double* grow = embed.grad.Data() +
                   static_cast<std::size_t>(fwd.fed[i]) * embed_dim;
    for (int c = 0; c < embed_dim; ++c) grow[c] += dx[c];
    dh = std::move(dh_prev);
  }
}

Tensor<double> PredictionState(const TurnTakingModel& model,
                               const std::vector<int>& tokens) {
  return RunPrediction(model, tokens).state;
}

namespace {

const char* JointPrefix(JointKind kind) {
  return kind == JointKind::kAsr ? "joint.asr" : "joint.turn";
}

}  // namespace

JointForward RunJoint(const TurnTakingModel& model, JointKind kind,
                      const Tensor<double>& enc_row,
                      const Tensor<double>& pred_state) {
  const std::string prefix = JointPrefix(kind);
  const Tensor<double>& we = P(model, prefix + ".enc_w").value;
  const Tensor<double>& wp = P(model, prefix + ".pred_w").value;
  const Tensor<double>& b = P(model, prefix + ".b").value;
  const int joint = model.config.joint_hidden;
  const int enc = model.config.encoder_dim;
  const int pred = model.config.pred_hidden;
  if (enc_row.Numel() != static_cast<std::size_t>(enc) ||
      pred_state.Numel() != static_cast<std::size_t>(pred)) {
    throw DataError("joint input size mismatch");
  }
  JointForward fwd;
  fwd.pre = Tensor<double>({joint});
  double* z = fwd.pre.Data();
  std::copy(b.Data(), b.Data() + joint, z);
  const double* e = enc_row.Data();
  for (int i = 0; i < enc; ++i) {
    const double v = e[i];
    const double* wr = we.Data() + static_cast<std::size_t>(i) * joint;
    for (int j = 0; j < joint; ++j) z[j] += v * wr[j];
  }
  const double* p = pred_state.Data();
  for (int i = 0; i < pred; ++i) {
    const double v = p[i];
    const double* wr = wp.Data() + static_cast<std::size_t>(i) * joint;
    for (int j = 0; j < joint; ++j) z[j] += v * wr[j];
  }
  for (int j = 0; j < joint; ++j) z[j] = std::tanh(z[j]);
  fwd.logits = AffineForward(P(model, prefix + ".out_w").value,
                             P(model, prefix + ".out_b").value, fwd.pre);
  return fwd;
}

void JointBackward(TurnTakingModel* model, JointKind kind,
                   const Tensor<double>& enc_row,
                   const Tensor<double>& pred_state, const JointForward& fwd,
                   const Tensor<double>& d_logits, Tensor<double>* d_enc,
                   Tensor<double>* d_pred) {
  const std::string prefix = JointPrefix(kind);
  Param<double>& out_w = model->params.Get(prefix + ".out_w");
  Param<double>& out_b = model->params.Get(prefix + ".out_b");
  Tensor<double> da = AffineBackward(out_w.value, fwd.pre, d_logits,
                                     &out_w.grad, &out_b.grad);
  const int joint = model->config.joint_hidden;
  const double* a = fwd.pre.Data();
  double* dz = da.Data();
  for (int j = 0; j < joint; ++j) dz[j] *= 1.0 - a[j] * a[j];

  Param<double>& b = model->params.Get(prefix + ".b");
  for (int j = 0; j < joint; ++j) b.grad[j] += dz[j];

  Param<double>& we = model->params.Get(prefix + ".enc_w");
  const int enc = model->config.encoder_dim;
  const double* e = enc_row.Data();
  for (int i = 0; i < enc; ++i) {
    double* gw = we.grad.Data() + static_cast<std::size_t>(i) * joint;
    const double* wr = we.value.Data() + static_cast<std::size_t>(i) * joint;
    const double v = e[i];
    double acc = 0.0;
    for (int j = 0; j < joint; ++j) {
      gw[j] += v * dz[j];
      acc += wr[j] * dz[j];
    }
    if (d_enc) (*d_enc)[i] += acc;
  }

  Param<double>& wp = model->params.Get(prefix + ".pred_w");
  const int pred = model->config.pred_hidden;
  const double* p = pred_state.Data();
  for (int i = 0; i < pred; ++i) {
    double* gw = wp.grad.Data() + static_cast<std::size_t>(i) * joint;
    const double* wr = wp.value.Data() + static_cast<std::size_t>(i) * joint;
    const double v = p[i];
    double acc = 0.0;
    for (int j = 0; j < joint; ++j) {
      gw[j] += v * dz[j];
      acc += wr[j] * dz[j];
    }
    if (d_pred) (*d_pred)[i] += acc;
  }
}

Tensor<double> JointLogits(const TurnTakingModel& model, JointKind kind,
                           const Tensor<double>& enc_row,
                           const Tensor<double>& pred_state) {
  return RunJoint(model, kind, enc_row, pred_state).logits;
}

Tensor<double> AcousticLogits(const TurnTakingModel& model,
                              const Tensor<double>& enc_row) {
  return AffineForward(P(model, "head.acoustic.w").value,
                       P(model, "head.acoustic.b").value, enc_row);
}

Tensor<double> TextLogits(const TurnTakingModel& model,
                          const Tensor<double>& pred_state) {
  return AffineForward(P(model, "head.text.w").value,
                       P(model, "head.text.b").value, pred_state);
}

void InitTurnJointFromAsr(TurnTakingModel* model) {
  if (model->expanded_asr) {
    throw ConfigError(
        "turn joint initialization requires a base-vocab recognizer joint");
  }
  const int joint = model->config.joint_hidden;
  const int k_asr = model->AsrOutputSize();
  model->params.Get("joint.turn.enc_w").value =
      model->params.Get("joint.asr.enc_w").value;
  model->params.Get("joint.turn.pred_w").value =
      model->params.Get("joint.asr.pred_w").value;
  model->params.Get("joint.turn.b").value =
      model->params.Get("joint.asr.b").value;
  const Tensor<double>& src_w = model->params.Get("joint.asr.out_w").value;
  Tensor<double>& dst_w = model->params.Get("joint.turn.out_w").value;
  dst_w.SetZero();
  for (int j = 0; j < joint; ++j) {
    for (int k = 0; k < k_asr; ++k) {
      dst_w.At(j, k) = src_w.At(j, k);
    }
  }
  const Tensor<double>& src_b = model->params.Get("joint.asr.out_b").value;
  Tensor<double>& dst_b = model->params.Get("joint.turn.out_b").value;
  dst_b.SetZero();
  for (int k = 0; k < k_asr; ++k) dst_b[k] = src_b[k];
}

std::vector<int> TranscriptTokenIds(const Vocab& vocab,
                                    const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    if (tok == Vocab::kPauseText) {
      ids.push_back(vocab.PauseId());
    } else if (tok == Vocab::kFinishText) {
      ids.push_back(vocab.FinishId());
    } else {
      const int id = vocab.WordId(tok);
      if (id == 0) throw DataError("unknown token: " + tok);
      ids.push_back(id);
    }
  }
  return ids;
}

void SaveModel(const TurnTakingModel& model, const std::string& stem,
               double pause_threshold, double finish_threshold) {
  SaveCheckpoint(model.params, stem + ".ckpt");
  json manifest;
  manifest["model_manifest"] = 1;
  json cfg;
  cfg["feature_dim"] = model.config.feature_dim;
  cfg["encoder_raw_frames"] = model.config.encoder_raw_frames;
  cfg["encoder_blocks"] = model.config.encoder_blocks;
  cfg["encoder_block_size"] = model.config.encoder_block_size;
  cfg["encoder_layers"] = model.config.encoder_layers;
  cfg["encoder_hidden"] = model.config.encoder_hidden;
  cfg["encoder_dim"] = model.config.encoder_dim;
  cfg["pred_context"] = model.config.pred_context;
  cfg["pred_embed"] = model.config.pred_embed;
  cfg["pred_hidden"] = model.config.pred_hidden;
  cfg["joint_hidden"] = model.config.joint_hidden;
  cfg["vocab_words"] = model.config.vocab_words;
  cfg["seed"] = model.config.seed;
  manifest["config"] = cfg;
  manifest["words"] = model.vocab.Words();
  manifest["expanded_asr"] = model.expanded_asr;
  manifest["trained"] = {{"stage1", model.stage1_trained},
                         {"acoustic", model.acoustic_trained},
                         {"text", model.text_trained},
                         {"turn", model.turn_trained}};
  manifest["thresholds"] = {{"pause", pause_threshold},
                            {"finish", finish_threshold}};
  std::vector<std::string> variants;
  if (model.expanded_asr && model.stage1_trained) {
    variants.push_back(VariantName(Variant::kE2eSingle));
  }
  if (model.acoustic_trained) variants.push_back(VariantName(Variant::kAcoustic));
  if (model.text_trained) variants.push_back(VariantName(Variant::kText));
  if (model.turn_trained) variants.push_back(VariantName(Variant::kDualJoint));
  manifest["variants"] = variants;

  std::ofstream os(stem + ".json");
  if (!os) throw IoError("cannot open " + stem + ".json for writing");
  os << manifest.dump(2) << "\n";
  os.flush();
  if (!os) throw IoError("failed writing " + stem + ".json");
}

namespace {

json ReadManifest(const std::string& stem) {
  std::ifstream is(stem + ".json");
  if (!is) throw IoError("cannot open " + stem + ".json");
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw IoError("bad model manifest " + stem + ".json: " + e.what());
  }
  if (!manifest.is_object() || manifest.value("model_manifest", 0) != 1) {
    throw IoError(stem + ".json is not a model manifest");
  }
  return manifest;
}

}  // namespace

TurnTakingModel LoadModel(const std::string& stem) {
  const json manifest = ReadManifest(stem);
  try {
    const json& cfg = manifest.at("config");
    ModelConfig config;
    config.feature_dim = cfg.at("feature_dim").get<int>();
    config.encoder_raw_frames = cfg.at("encoder_raw_frames").get<int>();
    config.encoder_blocks = cfg.at("encoder_blocks").get<int>();
    config.encoder_block_size = cfg.at("encoder_block_size").get<int>();
    config.encoder_layers = cfg.at("encoder_layers").get<int>();
    config.encoder_hidden = cfg.at("encoder_hidden").get<int>();
    config.encoder_dim = cfg.at("encoder_dim").get<int>();
    config.pred_context = cfg.at("pred_context").get<int>();
    config.pred_embed = cfg.at("pred_embed").get<int>();
    config.pred_hidden = cfg.at("pred_hidden").get<int>();
    config.joint_hidden = cfg.at("joint_hidden").get<int>();
    config.vocab_words = cfg.at("vocab_words").get<int>();
    config.seed = cfg.at("seed").get<uint64_t>();
    TurnTakingModel model(config,
                          manifest.at("words").get<std::vector<std::string>>(),
                          manifest.at("expanded_asr").get<bool>());
    const json& trained = manifest.at("trained");
    model.stage1_trained = trained.at("stage1").get<bool>();
    model.acoustic_trained = trained.at("acoustic").get<bool>();
    model.text_trained = trained.at("text").get<bool>();
    model.turn_trained = trained.at("turn").get<bool>();
    LoadCheckpoint(&model.params, stem + ".ckpt");
    return model;
  } catch (const json::exception& e) {
    throw IoError("bad model manifest " + stem + ".json: " + e.what());
  }
}

void LoadModelThresholds(const std::string& stem, double* pause_threshold,
                         double* finish_threshold) {
  const json manifest = ReadManifest(stem);
  try {
    const json& thresholds = manifest.at("thresholds");
    if (pause_threshold) *pause_threshold = thresholds.at("pause").get<double>();
    if (finish_threshold) {
      *finish_threshold = thresholds.at("finish").get<double>();
    }
  } catch (const json::exception& e) {
    throw IoError("bad model manifest " + stem + ".json: " + e.what());
  }
}

}  // namespace convturn
