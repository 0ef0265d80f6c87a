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

#include "convturn/cli/run.h"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "convturn/annotate/annotate.h"
#include "convturn/common/error.h"
#include "convturn/corpus/generator.h"
#include "convturn/eval/eval.h"
#include "convturn/transducer/decode.h"
#include "convturn/turnmodels/infer.h"
#include "convturn/turnmodels/model.h"
#include "convturn/turnmodels/train.h"
#include "json.hpp"

namespace convturn {
namespace cli {

namespace {

using nlohmann::json;

// Resolved run configuration. Every key here lands in the emitted manifest,
// defaults included, so a run is reproducible from its manifest alone.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;

  struct GeneratorSection {
    int train_size = 2000;
    int dev_size = 200;
    int eval_size = 200;
    int vocab_size = 60;
    int num_phonemes = 20;
    int feature_dim = 16;
    double frame_rate = 100.0;
    double noise_std = 0.08;
    double rate_random_pause = 0.15;
    double rate_filled_pause = 0.35;
    double rate_lengthening = 0.02;
    double rate_repetition = 0.30;
  } generator;

  AnnotationConfig annotation;
  ModelConfig model;      // vocab_words filled from the corpus, seed global
  TrainOptions training;
  InferOptions inference;  // frame_rate overridden by the corpus at use

  struct EvalSection {
    double window = 1.0;
    double early_allowance = 0.2;
    std::vector<double> sweep_grid;  // defaults to 0.00..1.00 in 0.05 steps
  } evaluation;
};

std::vector<double> DefaultSweepGrid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

// Strict section reader: every key must be known and well-typed.
class SectionReader {
 public:
  SectionReader(const json& node, std::string prefix)
      : node_(node), prefix_(std::move(prefix)) {
    if (!node_.is_object()) {
      throw ConfigError("config section " + prefix_ + " must be an object");
    }
  }

  void Int(const char* key, int* slot) {
    const json* v = Take(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) TypeError(key, "an integer");
    *slot = v->get<int>();
  }

  void U64(const char* key, std::uint64_t* slot) {
    const json* v = Take(key);
    if (v == nullptr) return;
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
      TypeError(key, "a non-negative integer");
    }
    *slot = v->get<std::uint64_t>();
  }

  void Num(const char* key, double* slot) {
    const json* v = Take(key);
    if (v == nullptr) return;
    if (!v->is_number()) TypeError(key, "a number");
    *slot = v->get<double>();
  }

  void Str(const char* key, std::string* slot) {
    const json* v = Take(key);
    if (v == nullptr) return;
    if (!v->is_string()) TypeError(key, "a string");
    *slot = v->get<std::string>();
  }

  void NumList(const char* key, std::vector<double>* slot) {
    const json* v = Take(key);
    if (v == nullptr) return;
    if (!v->is_array()) TypeError(key, "an array of numbers");
    std::vector<double> values;
    for (const json& item : *v) {
      if (!item.is_number()) TypeError(key, "an array of numbers");
      values.push_back(item.get<double>());
    }
    *slot = std::move(values);
  }

  // Returns the unparsed subtree for a nested section, if present.
  const json* Section(const char* key) { return Take(key); }

  void Finish() {
    for (const auto& item : node_.items()) {
      if (consumed_.count(item.key()) == 0) {
        throw ConfigError("unknown config key: " + prefix_ + item.key());
      }
    }
  }

 private:
  const json* Take(const char* key) {
    consumed_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  [[noreturn]] void TypeError(const char* key, const char* expected) {
    throw ConfigError("config key " + prefix_ + key + ": expected " +
                      expected);
  }

  const json& node_;
  std::string prefix_;
  std::set<std::string> consumed_;
};

RunConfig ParseRunConfig(const json& tree) {
  RunConfig cfg;
  cfg.evaluation.sweep_grid = DefaultSweepGrid();
  SectionReader top(tree, "");
  top.U64("seed", &cfg.seed);
  top.Str("out_dir", &cfg.out_dir);
  top.Int("threads", &cfg.threads);

  if (const json* node = top.Section("generator")) {
    SectionReader s(*node, "generator.");
    auto& g = cfg.generator;
    s.Int("train_size", &g.train_size);
    s.Int("dev_size", &g.dev_size);
    s.Int("eval_size", &g.eval_size);
    s.Int("vocab_size", &g.vocab_size);
    s.Int("num_phonemes", &g.num_phonemes);
    s.Int("feature_dim", &g.feature_dim);
    s.Num("frame_rate", &g.frame_rate);
    s.Num("noise_std", &g.noise_std);
    s.Num("rate_random_pause", &g.rate_random_pause);
    s.Num("rate_filled_pause", &g.rate_filled_pause);
    s.Num("rate_lengthening", &g.rate_lengthening);
    s.Num("rate_repetition", &g.rate_repetition);
    s.Finish();
  }
  if (const json* node = top.Section("annotation")) {
    SectionReader s(*node, "annotation.");
    s.Num("long_silence", &cfg.annotation.long_silence);
    s.Num("short_silence", &cfg.annotation.short_silence);
    s.Num("lengthen_z", &cfg.annotation.lengthen_z);
    s.Finish();
  }
  if (const json* node = top.Section("model")) {
    SectionReader s(*node, "model.");
    auto& m = cfg.model;
    s.Int("feature_dim", &m.feature_dim);
    s.Int("encoder_raw_frames", &m.encoder_raw_frames);
    s.Int("encoder_blocks", &m.encoder_blocks);
    s.Int("encoder_block_size", &m.encoder_block_size);
    s.Int("encoder_layers", &m.encoder_layers);
    s.Int("encoder_hidden", &m.encoder_hidden);
    s.Int("encoder_dim", &m.encoder_dim);
    s.Int("pred_context", &m.pred_context);
    s.Int("pred_embed", &m.pred_embed);
    s.Int("pred_hidden", &m.pred_hidden);
    s.Int("joint_hidden", &m.joint_hidden);
    s.Finish();
  }
  if (const json* node = top.Section("training")) {
    SectionReader s(*node, "training.");
    auto& t = cfg.training;
    s.Int("epochs", &t.epochs);
    s.Num("learning_rate", &t.lr);
    s.Num("clip_norm", &t.clip_norm);
    s.Num("fastemit_lambda", &t.fastemit_lambda);
    s.U64("shuffle_seed", &t.shuffle_seed);
    s.Int("log_every", &t.log_every);
    s.Finish();
  }
  if (const json* node = top.Section("inference")) {
    SectionReader s(*node, "inference.");
    auto& i = cfg.inference;
    s.Num("pause_threshold", &i.pause_threshold);
    s.Num("finish_threshold", &i.finish_threshold);
    s.Int("beam_size", &i.beam_size);
    s.Int("max_expansions", &i.max_expansions);
    s.Num("debounce_sec", &i.debounce_sec);
    s.Finish();
  }
  if (const json* node = top.Section("evaluation")) {
    SectionReader s(*node, "evaluation.");
    s.Num("window", &cfg.evaluation.window);
    s.Num("early_allowance", &cfg.evaluation.early_allowance);
    s.NumList("sweep_grid", &cfg.evaluation.sweep_grid);
    s.Finish();
  }
  top.Finish();

  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
  cfg.model.seed = cfg.seed;
  return cfg;
}

json ConfigJson(const RunConfig& cfg) {
  return json{
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"threads", cfg.threads},
      {"generator",
       {{"train_size", cfg.generator.train_size},
        {"dev_size", cfg.generator.dev_size},
        {"eval_size", cfg.generator.eval_size},
        {"vocab_size", cfg.generator.vocab_size},
        {"num_phonemes", cfg.generator.num_phonemes},
        {"feature_dim", cfg.generator.feature_dim},
        {"frame_rate", cfg.generator.frame_rate},
        {"noise_std", cfg.generator.noise_std},
        {"rate_random_pause", cfg.generator.rate_random_pause},
        {"rate_filled_pause", cfg.generator.rate_filled_pause},
        {"rate_lengthening", cfg.generator.rate_lengthening},
        {"rate_repetition", cfg.generator.rate_repetition}}},
      {"annotation",
       {{"long_silence", cfg.annotation.long_silence},
        {"short_silence", cfg.annotation.short_silence},
        {"lengthen_z", cfg.annotation.lengthen_z}}},
      {"model",
       {{"feature_dim", cfg.model.feature_dim},
        {"encoder_raw_frames", cfg.model.encoder_raw_frames},
        {"encoder_blocks", cfg.model.encoder_blocks},
        {"encoder_block_size", cfg.model.encoder_block_size},
        {"encoder_layers", cfg.model.encoder_layers},
        {"encoder_hidden", cfg.model.encoder_hidden},
        {"encoder_dim", cfg.model.encoder_dim},
        {"pred_context", cfg.model.pred_context},
        {"pred_embed", cfg.model.pred_embed},
        {"pred_hidden", cfg.model.pred_hidden},
        {"joint_hidden", cfg.model.joint_hidden}}},
      {"training",
       {{"epochs", cfg.training.epochs},
        {"learning_rate", cfg.training.lr},
        {"clip_norm", cfg.training.clip_norm},
        {"fastemit_lambda", cfg.training.fastemit_lambda},
        {"shuffle_seed", cfg.training.shuffle_seed},
        {"log_every", cfg.training.log_every}}},
      {"inference",
       {{"pause_threshold", cfg.inference.pause_threshold},
        {"finish_threshold", cfg.inference.finish_threshold},
        {"beam_size", cfg.inference.beam_size},
        {"max_expansions", cfg.inference.max_expansions},
        {"debounce_sec", cfg.inference.debounce_sec}}},
      {"evaluation",
       {{"window", cfg.evaluation.window},
        {"early_allowance", cfg.evaluation.early_allowance},
        {"sweep_grid", cfg.evaluation.sweep_grid}}}};
}

std::string Fnv64Hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

json LoadJsonFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config file: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

RunConfig LoadRunConfig(const std::string& path) {
  if (path.empty()) return ParseRunConfig(json::object());
  json tree = LoadJsonFile(path);
  // A run manifest embeds the resolved config; accept it directly so any
  // run can be replayed from its manifest.
  if (tree.is_object() && tree.contains("config_hash") &&
      tree.contains("config")) {
    tree = tree.at("config");
  }
  return ParseRunConfig(tree);
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void EnsureParentDir(const std::string& path) {
  const std::filesystem::path parent =
      std::filesystem::path(path).parent_path();
  if (!parent.empty()) EnsureDir(parent.string());
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open file for writing: " + path);
  os << text;
  if (!os) throw IoError("failed writing file: " + path);
}

void WriteManifest(const RunConfig& cfg, const std::string& command,
                   json extras) {
  const json config = ConfigJson(cfg);
  // The hash identifies the computation, so keys that only say where output
  // lands or how many workers ran are left out of it.
  json hashed = config;
  hashed.erase("out_dir");
  hashed.erase("threads");
  json manifest{{"run_manifest", 1},
                {"command", command},
                {"seed", cfg.seed},
                {"config_hash", Fnv64Hex(hashed.dump())},
                {"config", config}};
  for (auto& item : extras.items()) {
    manifest[item.key()] = std::move(item.value());
  }
  EnsureDir(cfg.out_dir);
  WriteTextFile(cfg.out_dir + "/" + command + "_manifest.json",
                manifest.dump(2) + "\n");
}

GeneratorConfig ToGeneratorConfig(const RunConfig& cfg) {
  GeneratorConfig g;
  g.seed = cfg.seed;
  g.vocab_size = cfg.generator.vocab_size;
  g.num_phonemes = cfg.generator.num_phonemes;
  g.feature_dim = cfg.generator.feature_dim;
  g.frame_rate = cfg.generator.frame_rate;
  g.noise_std = cfg.generator.noise_std;
  g.rate_random_pause = cfg.generator.rate_random_pause;
  g.rate_filled_pause = cfg.generator.rate_filled_pause;
  g.rate_lengthening = cfg.generator.rate_lengthening;
  g.rate_repetition = cfg.generator.rate_repetition;
  return g;
}

std::string TokenText(const Vocab& vocab, int id) {
  if (vocab.IsWord(id)) return vocab.Words()[static_cast<std::size_t>(id - 1)];
  if (id == vocab.PauseId()) return Vocab::kPauseText;
  if (id == vocab.FinishId()) return Vocab::kFinishText;
  throw DataError("token id out of range: " + std::to_string(id));
}

std::vector<AnnotatedTranscript> AnnotateCorpus(const Corpus& corpus,
                                                const AnnotationConfig& config,
                                                const std::vector<DisfluencySpan>* spans,
                                                AnnotationCounts* counts) {
  const PhonemeStats stats = ComputePhonemeStats(corpus);
  std::vector<AnnotatedTranscript> out;
  out.reserve(corpus.utterances.size());
  for (const Utterance& utt : corpus.utterances) {
    std::vector<DisfluencySpan> local;
    if (spans == nullptr) {
      local = DetectRepetitions(utt.id, utt.transcript);
    }
    out.push_back(LabelSilences(utt, stats, config,
                                spans == nullptr ? local : *spans, counts));
  }
  return out;
}

int CmdGenerate(const RunConfig& cfg, std::ostream& out) {
  const GeneratorConfig gen = ToGeneratorConfig(cfg);
  const GeneratedCorpora corpora =
      GenerateCorpus(gen, cfg.generator.train_size, cfg.generator.dev_size,
                     cfg.generator.eval_size);
  EnsureDir(cfg.out_dir);
  WriteCorpus(corpora.train, cfg.out_dir + "/train");
  WriteCorpus(corpora.dev, cfg.out_dir + "/dev");
  WriteCorpus(corpora.eval, cfg.out_dir + "/eval");
  WriteManifest(cfg, "generate",
                json{{"splits",
                      {{"train", corpora.train.utterances.size()},
                       {"dev", corpora.dev.utterances.size()},
                       {"eval", corpora.eval.utterances.size()}}}});
  out << "generate: train=" << corpora.train.utterances.size()
      << " dev=" << corpora.dev.utterances.size()
      << " eval=" << corpora.eval.utterances.size() << " -> " << cfg.out_dir
      << "\n";
  return 0;
}

int CmdAnnotate(const RunConfig& cfg, const std::string& corpus_stem,
                const std::string& spans_path, const std::string& out_path,
                std::ostream& out) {
  const Corpus corpus = ReadCorpus(corpus_stem);
  AnnotationCounts counts;
  std::vector<AnnotatedTranscript> annotations;
  if (spans_path.empty()) {
    annotations = AnnotateCorpus(corpus, cfg.annotation, nullptr, &counts);
  } else {
    const std::vector<DisfluencySpan> spans = ReadSpans(spans_path);
    annotations = AnnotateCorpus(corpus, cfg.annotation, &spans, &counts);
  }
  EnsureParentDir(out_path);
  WriteAnnotations(annotations, out_path);
  const json count_json{{"finish", counts.finish},
                        {"pause", counts.pause},
                        {"relabel_lengthened", counts.relabel_lengthened},
                        {"relabel_filler", counts.relabel_filler},
                        {"relabel_disfluency", counts.relabel_disfluency},
                        {"dropped_short", counts.dropped_short}};
  WriteManifest(cfg, "annotate",
                json{{"corpus", corpus_stem},
                     {"annotations", out_path},
                     {"counts", count_json}});
  out << "annotate: utterances=" << annotations.size()
      << " finish=" << counts.finish << " pause=" << counts.pause
      << " relabel_lengthened=" << counts.relabel_lengthened
      << " relabel_filler=" << counts.relabel_filler
      << " relabel_disfluency=" << counts.relabel_disfluency
      << " dropped_short=" << counts.dropped_short << "\n";
  return 0;
}

std::vector<AnnotatedTranscript> LoadAnnotationsFor(
    const std::string& stage, const std::string& path) {
  if (path.empty()) {
    throw ConfigError("train stage " + stage +
                      " requires --annotations (run annotate first)");
  }
  return ReadAnnotations(path);
}

TurnTakingModel LoadStage1For(const std::string& stage,
                              const std::string& init_stem) {
  if (init_stem.empty()) {
    throw ConfigError("train stage " + stage +
                      " requires a stage-1 checkpoint; run train --stage asr "
                      "first and pass it with --init");
  }
  return LoadModel(init_stem);
}

int CmdTrain(const RunConfig& cfg, const std::string& stage,
             const std::string& corpus_stem, const std::string& ann_path,
             const std::string& init_stem, const std::string& out_stem,
             std::ostream& out) {
  const Corpus corpus = ReadCorpus(corpus_stem);
  TrainStats stats;
  TurnTakingModel model = [&]() -> TurnTakingModel {
    if (stage == "asr") {
      return TrainStage1Asr(corpus, cfg.model, cfg.training, &stats);
    }
    if (stage == "e2e_single") {
      const auto annotations = LoadAnnotationsFor(stage, ann_path);
      return TrainE2eSingleJoint(corpus, annotations, cfg.model, cfg.training,
                                 &stats);
    }
    if (stage == "acoustic" || stage == "text" || stage == "turn_joint") {
      const auto annotations = LoadAnnotationsFor(stage, ann_path);
      TurnTakingModel loaded = LoadStage1For(stage, init_stem);
      if (stage == "acoustic") {
        TrainAcousticHead(&loaded, corpus, annotations, cfg.training, &stats);
      } else if (stage == "text") {
        TrainTextPredictor(&loaded, corpus, annotations, cfg.training, &stats);
      } else {
        TrainTurnJoint(&loaded, corpus, annotations, cfg.training, &stats);
      }
      return loaded;
    }
    throw ConfigError(
        "unknown train stage: " + stage +
        " (expected asr, acoustic, text, e2e_single, or turn_joint)");
  }();
  EnsureParentDir(out_stem);
  SaveModel(model, out_stem, cfg.inference.pause_threshold,
            cfg.inference.finish_threshold);
  WriteManifest(cfg, "train",
                json{{"stage", stage},
                     {"corpus", corpus_stem},
                     {"checkpoint", out_stem},
                     {"final_loss", stats.final_loss},
                     {"steps", stats.steps},
                     {"epoch_mean_loss", stats.epoch_mean_loss}});
  out << "train[" << stage << "]: steps=" << stats.steps
      << " final_loss=" << stats.final_loss << " -> " << out_stem << "\n";
  return 0;
}

int CmdInfer(const RunConfig& cfg, const std::string& model_stem,
             const std::string& corpus_stem, const std::string& variant_name,
             const std::string& out_path, std::ostream& out) {
  const TurnTakingModel model = LoadModel(model_stem);
  const Corpus corpus = ReadCorpus(corpus_stem);
  const Variant variant = VariantFromName(variant_name);
  InferOptions opts = cfg.inference;
  opts.frame_rate = corpus.frame_rate;
  EnsureParentDir(out_path);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw IoError("cannot open decision file for writing: " + out_path);
  std::size_t total_decisions = 0;
  for (const Utterance& utt : corpus.utterances) {
    const StreamResult result =
        StreamInfer(model, utt.features, variant, opts);
    json hyp = json::array();
    for (const int id : result.hypothesis.tokens) {
      hyp.push_back(TokenText(model.vocab, id));
    }
    json decisions = json::array();
    for (const TurnDecision& d : result.decisions) {
      decisions.push_back(json{{"kind", TurnKindName(d.kind)},
                               {"frame", d.frame},
                               {"time", d.time},
                               {"posterior", d.posterior}});
    }
    total_decisions += result.decisions.size();
    os << json{{"utt_id", utt.id},
               {"hypothesis", std::move(hyp)},
               {"decisions", std::move(decisions)}}
              .dump()
       << "\n";
  }
  if (!os) throw IoError("failed writing decision file: " + out_path);
  WriteManifest(cfg, "infer",
                json{{"model", model_stem},
                     {"corpus", corpus_stem},
                     {"variant", variant_name},
                     {"decisions", out_path}});
  out << "infer[" << variant_name
      << "]: utterances=" << corpus.utterances.size()
      << " decisions=" << total_decisions << " -> " << out_path << "\n";
  return 0;
}

int CmdEvaluate(const RunConfig& cfg, const std::string& model_stem,
                const std::string& corpus_stem,
                const std::string& variant_name, bool sweep,
                std::ostream& out) {
  const TurnTakingModel model = LoadModel(model_stem);
  const Corpus corpus = ReadCorpus(corpus_stem);
  if (corpus.utterances.empty()) {
    throw DataError("evaluation corpus is empty: " + corpus_stem);
  }
  const Variant variant = VariantFromName(variant_name);
  InferOptions opts = cfg.inference;
  opts.frame_rate = corpus.frame_rate;
  PairingConfig pairing;
  pairing.window = cfg.evaluation.window;
  pairing.early_allowance = cfg.evaluation.early_allowance;
  ValidatePairingConfig(pairing);

  std::vector<EventMatchResult> results;
  std::vector<TraceSet> traces;
  std::vector<std::vector<TurnEvent>> truths;
  std::int64_t total_edits = 0;
  std::int64_t total_ref = 0;
  for (const Utterance& utt : corpus.utterances) {
    const StreamResult result =
        StreamInfer(model, utt.features, variant, opts);
    std::vector<std::string> hyp;
    std::vector<double> hyp_times;
    for (std::size_t i = 0; i < result.hypothesis.tokens.size(); ++i) {
      const int id = result.hypothesis.tokens[i];
      if (!model.vocab.IsWord(id)) continue;  // e2e decodes turn tokens too
      hyp.push_back(TokenText(model.vocab, id));
      hyp_times.push_back((result.hypothesis.frames[i] + 1) /
                          corpus.frame_rate);
    }
    if (utt.words.size() != utt.transcript.size()) {
      throw DataError("utterance " + utt.id +
                      ": timed words and transcript disagree");
    }
    std::vector<double> ref_times;
    for (const TimedWord& w : utt.words) ref_times.push_back(w.end);
    const TokenAlignment alignment =
        AlignTokens(hyp, utt.transcript, hyp_times, ref_times);
    const EditCounts edits = CountEdits(alignment);
    total_edits += edits.substitutions + edits.deletions + edits.insertions;
    total_ref += edits.ref_len;
    results.push_back(
        PairEvents(alignment, result.decisions, utt.events, pairing));
    TraceSet trace;
    trace.pause_trace = result.pause_trace;
    trace.finish_trace = result.finish_trace;
    trace.activity = result.activity;
    traces.push_back(std::move(trace));
    truths.push_back(utt.events);
  }
  if (total_ref == 0) {
    throw DataError("evaluation corpus has an empty reference transcript");
  }

  EvalReport report = PrecisionRecallLatency(results);
  report.wer = static_cast<double>(total_edits) / total_ref;
  EnsureDir(cfg.out_dir);
  if (sweep) {
    SweepConfig sweep_cfg;
    sweep_cfg.grid = cfg.evaluation.sweep_grid;
    sweep_cfg.base_pause_threshold = cfg.inference.pause_threshold;
    sweep_cfg.base_finish_threshold = cfg.inference.finish_threshold;
    sweep_cfg.frame_rate = corpus.frame_rate;
    sweep_cfg.debounce_sec = cfg.inference.debounce_sec;
    sweep_cfg.pairing = pairing;
    report.pr_points = PrSweep(traces, truths, sweep_cfg);
    WritePrCsv(report.pr_points, cfg.out_dir + "/pr.csv");
  }
  WriteTextFile(cfg.out_dir + "/report.json", EvalReportJson(report) + "\n");
  WriteManifest(cfg, "evaluate",
                json{{"model", model_stem},
                     {"corpus", corpus_stem},
                     {"variant", variant_name},
                     {"sweep", sweep}});
  out << "evaluate[" << variant_name << "]: wer=" << report.wer
      << " finish_p=" << report.finish.precision
      << " finish_r=" << report.finish.recall
      << " finish_p50=" << report.finish.latency_p50
      << " pause_p=" << report.pause.precision
      << " pause_r=" << report.pause.recall << " -> " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  if (args.empty()) {
    err << "E:CONFIG no subcommand given\n";
    return 2;
  }

  CLI::App app{"Streaming turn-taking prediction pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir_flag;
  std::string seed_flag;
  int threads_flag = -1;
  for (CLI::App* sub :
       {app.add_subcommand("generate", "Synthesize corpus splits"),
        app.add_subcommand("annotate", "Insert turn tokens into transcripts"),
        app.add_subcommand("train", "Train a pipeline stage"),
        app.add_subcommand("infer", "Stream decisions over a corpus"),
        app.add_subcommand("evaluate", "Score a variant on a corpus")}) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out-dir", out_dir_flag, "Output directory override");
    sub->add_option("--seed", seed_flag, "Seed override");
    sub->add_option("--threads", threads_flag,
                    "Worker cap (this build is single-threaded)");
  }

  CLI::App* generate = app.get_subcommand("generate");
  int train_size_flag = -1;
  int dev_size_flag = -1;
  int eval_size_flag = -1;
  generate->add_option("--train-size", train_size_flag, "Training utterances");
  generate->add_option("--dev-size", dev_size_flag, "Dev utterances");
  generate->add_option("--eval-size", eval_size_flag, "Eval utterances");

  CLI::App* annotate = app.get_subcommand("annotate");
  std::string corpus_stem;
  std::string spans_path;
  std::string out_path;
  annotate->add_option("--corpus", corpus_stem, "Corpus stem")->required();
  annotate->add_option("--spans", spans_path, "Disfluency span file");
  annotate->add_option("--out", out_path, "Annotation output file")
      ->required();

  CLI::App* train = app.get_subcommand("train");
  std::string stage;
  std::string ann_path;
  std::string init_stem;
  std::string ckpt_stem;
  double lr_flag = -1.0;
  int epochs_flag = -1;
  train->add_option("--stage", stage, "asr|acoustic|text|e2e_single|turn_joint")
      ->required();
  train->add_option("--corpus", corpus_stem, "Corpus stem")->required();
  train->add_option("--annotations", ann_path, "Annotated transcripts");
  train->add_option("--init", init_stem, "Stage-1 checkpoint stem");
  train->add_option("--out", ckpt_stem, "Checkpoint output stem")->required();
  train->add_option("--epochs", epochs_flag, "Epoch override");
  train->add_option("--lr", lr_flag, "Learning-rate override");

  CLI::App* infer = app.get_subcommand("infer");
  std::string model_stem;
  std::string variant_name;
  infer->add_option("--model", model_stem, "Checkpoint stem")->required();
  infer->add_option("--corpus", corpus_stem, "Corpus stem")->required();
  infer->add_option("--variant", variant_name,
                    "acoustic|text|dual_joint|e2e_single")
      ->required();
  infer->add_option("--out", out_path, "Decision JSONL output")->required();

  CLI::App* evaluate = app.get_subcommand("evaluate");
  bool sweep = false;
  double pause_thr_flag = -1.0;
  double finish_thr_flag = -1.0;
  evaluate->add_option("--model", model_stem, "Checkpoint stem")->required();
  evaluate->add_option("--corpus", corpus_stem, "Corpus stem")->required();
  evaluate->add_option("--variant", variant_name,
                       "acoustic|text|dual_joint|e2e_single")
      ->required();
  evaluate->add_flag("--sweep", sweep, "Emit a PR-curve CSV");
  evaluate->add_option("--pause-threshold", pause_thr_flag,
                       "Pause threshold override");
  evaluate->add_option("--finish-threshold", finish_thr_flag,
                       "Finish threshold override");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));

    RunConfig cfg = LoadRunConfig(config_path);
    if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
    if (!seed_flag.empty()) {
      try {
        cfg.seed = std::stoull(seed_flag);
      } catch (const std::exception&) {
        throw ConfigError("--seed must be a non-negative integer");
      }
      cfg.model.seed = cfg.seed;
    }
    if (threads_flag >= 0) cfg.threads = threads_flag;
    if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    if (train_size_flag >= 0) cfg.generator.train_size = train_size_flag;
    if (dev_size_flag >= 0) cfg.generator.dev_size = dev_size_flag;
    if (eval_size_flag >= 0) cfg.generator.eval_size = eval_size_flag;
    if (epochs_flag >= 0) cfg.training.epochs = epochs_flag;
    if (lr_flag >= 0.0) cfg.training.lr = lr_flag;
    if (pause_thr_flag >= 0.0) cfg.inference.pause_threshold = pause_thr_flag;
    if (finish_thr_flag >= 0.0) {
      cfg.inference.finish_threshold = finish_thr_flag;
    }

    if (app.got_subcommand(generate)) return CmdGenerate(cfg, out);
    if (app.got_subcommand(annotate)) {
      return CmdAnnotate(cfg, corpus_stem, spans_path, out_path, out);
    }
    if (app.got_subcommand(train)) {
      return CmdTrain(cfg, stage, corpus_stem, ann_path, init_stem, ckpt_stem,
                      out);
    }
    if (app.got_subcommand(infer)) {
      return CmdInfer(cfg, model_stem, corpus_stem, variant_name, out_path,
                      out);
    }
    return CmdEvaluate(cfg, model_stem, corpus_stem, variant_name, sweep, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "E:CONFIG " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "E:CONFIG " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "E:DATA " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "E:IO " << e.what() << "\n";
    return 4;
  } catch (const NumericError& e) {
    err << "E:NUMERIC " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    err << "E:INTERNAL " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cli
}  // namespace convturn
