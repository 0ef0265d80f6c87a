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

#include "convturn/corpus/generator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/nn/rng.h"

namespace convturn {
namespace {

// Shared-stream indices under Rng::Derive(seed, 0, *). Per-utterance streams
// use Derive(seed, split, index) with split 1=train, 2=dev, 3=eval.
constexpr std::uint64_t kSubPrototypes = 1;
constexpr std::uint64_t kSubVocab = 2;
constexpr std::uint64_t kSubDurations = 3;

const char* const kConsonants[] = {"p", "t", "k", "b", "d", "g", "m",
                                   "n", "s", "z", "l", "r", "f", "h"};
const char* const kVowels[] = {"a", "e", "i", "o", "u", "aa"};
constexpr int kMaxConsonants = 14;
constexpr int kMaxVowels = 6;

const std::vector<std::string>& FunctionWords() {
  static const std::vector<std::string> kWords = {
      "a", "the", "to", "for", "my", "on", "in", "at", "please"};
  return kWords;
}

// Command templates. "V" draws a verb, "N" draws a noun, anything else is a
// function word used literally. Several templates are prefixes of longer
// ones, so a transcript alone does not always reveal where a query ends.
const std::vector<std::vector<const char*>>& Templates() {
  static const std::vector<std::vector<const char*>> kTemplates = {
      {"V", "N"},
      {"V", "the", "N"},
      {"V", "my", "N"},
      {"V", "N", "please"},
      {"V", "the", "N", "please"},
      {"V", "N", "for", "N"},
      {"V", "the", "N", "on", "N"},
      {"V", "N", "at", "N"},
      {"V", "to", "N"},
      {"V", "the", "N", "for", "N"},
  };
  return kTemplates;
}

void RequireRange(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("generator config: ") + what);
}

struct VocabPlan {
  std::vector<std::string> words;       // fillers, function words, content
  std::vector<std::vector<int>> prons;  // phoneme ids per word
  int first_content = 0;
  int num_verbs = 0;
  std::unordered_map<std::string, int> index;
};

int NumVowelsFor(int num_phonemes) {
  int nv = num_phonemes * 3 / 10;
  return std::max(1, std::min(kMaxVowels, nv));
}

VocabPlan BuildVocab(const GeneratorConfig& cfg, Rng* rng) {
  const int np = cfg.num_phonemes;
  const int nv = NumVowelsFor(np);
  const int nc = np - nv;

  VocabPlan plan;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& text, std::vector<int> pron) {
    plan.index[text] = static_cast<int>(plan.words.size());
    plan.words.push_back(text);
    plan.prons.push_back(std::move(pron));
    seen.insert(text);
  };

  // Fillers and function words keep their spelling; pronunciations are
  // arbitrary phoneme strings since features only need per-word consistency.
  auto random_pron = [&]() {
    int len = rng->UniformInt(2, 4);
    std::vector<int> pron(len);
    for (int i = 0; i < len; ++i) pron[i] = rng->UniformInt(0, np - 1);
    return pron;
  };
  for (const std::string& f : FillerWords()) add(f, random_pron());
  for (const std::string& f : FunctionWords()) add(f, random_pron());

  plan.first_content = static_cast<int>(plan.words.size());
  const int content = cfg.vocab_size - plan.first_content;
  for (int w = 0; w < content; ++w) {
    std::vector<int> pron;
    std::string text;
    for (int attempt = 0;; ++attempt) {
      int syllables = rng->UniformInt(1, 3);
      if (attempt >= 64) syllables = 3 + attempt - 64;  // force growth
      pron.clear();
      text.clear();
      for (int s = 0; s < syllables; ++s) {
        int c = rng->UniformInt(0, nc - 1);
        int v = nc + rng->UniformInt(0, nv - 1);
        pron.push_back(c);
        pron.push_back(v);
        text += kConsonants[c];
        text += kVowels[v - nc];
      }
      if (seen.find(text) == seen.end()) break;
    }
    add(text, std::move(pron));
  }
  plan.num_verbs = std::max(2, std::min(10, content / 4));
  return plan;
}

struct DraftWord {
  int word = 0;            // index into VocabPlan::words
  double lengthen_z = 0;   // >0 stretches the final phoneme
  double sil_after = 0;    // >0 inserts a silence carrying one event
  TurnKind sil_kind = TurnKind::kPause;
};

bool IsFillerIndex(int word) {
  return word < static_cast<int>(FillerWords().size());
}

// One spoken command plus injected disfluencies. The returned sequence never
// ends with a pending silence; the caller appends the query-final silence.
std::vector<DraftWord> BuildQuery(const VocabPlan& plan,
                                  const GeneratorConfig& cfg, Rng* rng) {
  const auto& tmpl = Templates()[static_cast<std::size_t>(
      rng->UniformInt(0, static_cast<int>(Templates().size()) - 1))];
  const int content = static_cast<int>(plan.words.size()) - plan.first_content;
  std::vector<DraftWord> q;
  for (const char* slot : tmpl) {
    DraftWord w;
    if (std::string(slot) == "V") {
      w.word = plan.first_content + rng->UniformInt(0, plan.num_verbs - 1);
    } else if (std::string(slot) == "N") {
      w.word =
          plan.first_content + rng->UniformInt(plan.num_verbs, content - 1);
    } else {
      w.word = plan.index.at(slot);
    }
    q.push_back(w);
  }

  // Filled pause: a filler word with its own trailing silence, never in
  // query-final position.
  if (rng->Bernoulli(cfg.rate_filled_pause) && q.size() >= 2) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      int i = rng->UniformInt(0, static_cast<int>(q.size()) - 2);
      if (q[static_cast<std::size_t>(i)].sil_after > 0) continue;
      DraftWord f;
      f.word = rng->UniformInt(0, static_cast<int>(FillerWords().size()) - 1);
      f.sil_after = rng->Uniform(cfg.filled_pause_lo, cfg.filled_pause_hi);
      q.insert(q.begin() + i + 1, f);
      break;
    }
  }

  // Repetition: duplicate an n-gram in place and leave a gap silence after
  // the first occurrence.
  if (rng->Bernoulli(cfg.rate_repetition) && !q.empty()) {
    int n = rng->UniformInt(1, std::min<int>(3, static_cast<int>(q.size())));
    int s = rng->UniformInt(0, static_cast<int>(q.size()) - n);
    std::vector<DraftWord> copy(q.begin() + s, q.begin() + s + n);
    q.insert(q.begin() + s + n, copy.begin(), copy.end());
    auto& gap = q[static_cast<std::size_t>(s + n - 1)];
    gap.sil_after = rng->Uniform(cfg.repeat_gap_lo, cfg.repeat_gap_hi);
    gap.sil_kind = TurnKind::kPause;
  }

  // Lengthening: stretch the final phoneme of a non-filler word and follow
  // it with a silence.
  if (rng->Bernoulli(cfg.rate_lengthening) && q.size() >= 2) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      int i = rng->UniformInt(0, static_cast<int>(q.size()) - 2);
      auto& w = q[static_cast<std::size_t>(i)];
      if (w.sil_after > 0 || IsFillerIndex(w.word)) continue;
      w.lengthen_z = rng->Uniform(cfg.lengthen_z_lo, cfg.lengthen_z_hi);
      w.sil_after = rng->Uniform(cfg.lengthen_pause_lo, cfg.lengthen_pause_hi);
      break;
    }
  }

  // Plain hesitation with no lexical cue.
  if (rng->Bernoulli(cfg.rate_random_pause) && q.size() >= 2) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      int i = rng->UniformInt(0, static_cast<int>(q.size()) - 2);
      auto& w = q[static_cast<std::size_t>(i)];
      if (w.sil_after > 0 || IsFillerIndex(w.word)) continue;
      w.sil_after = rng->Uniform(cfg.medial_pause_lo, cfg.medial_pause_hi);
      break;
    }
  }

  // The query-final silence belongs to the caller; adjacent silences would
  // otherwise merge into one stretch carrying two events.
  q.back().sil_after = 0;
  q.back().lengthen_z = 0;
  return q;
}

double ClampedNormal(Rng* rng, double mean, double std, double lo, double hi) {
  return std::min(hi, std::max(lo, rng->Normal(mean, std)));
}

Utterance BuildUtterance(const VocabPlan& plan, const GeneratorTruth& truth,
                         const GeneratorConfig& cfg, const std::string& id,
                         int num_queries, Rng* rng) {
  Utterance utt;
  utt.id = id;
  double t = rng->Uniform(cfg.lead_sil_lo, cfg.lead_sil_hi);

  for (int query = 0; query < num_queries; ++query) {
    std::vector<DraftWord> draft = BuildQuery(plan, cfg, rng);
    for (std::size_t wi = 0; wi < draft.size(); ++wi) {
      const DraftWord& dw = draft[wi];
      TimedWord word;
      word.text = plan.words[static_cast<std::size_t>(dw.word)];
      word.start = t;
      const std::vector<int>& pron =
          plan.prons[static_cast<std::size_t>(dw.word)];
      for (std::size_t pi = 0; pi < pron.size(); ++pi) {
        int p = pron[pi];
        double mean = truth.phoneme_mean[static_cast<std::size_t>(p)];
        double std = truth.phoneme_std[static_cast<std::size_t>(p)];
        double dur;
        if (pi + 1 == pron.size() && dw.lengthen_z > 0) {
          dur = mean + dw.lengthen_z * std;
        } else {
          dur = std::max(cfg.min_phoneme_dur, rng->Normal(mean, std));
        }
        PhonemeSegment seg;
        seg.phoneme = p;
        seg.start = t;
        seg.end = t + dur;
        word.phonemes.push_back(seg);
        t = seg.end;
      }
      word.end = t;
      utt.words.push_back(word);
      utt.transcript.push_back(word.text);
      if (dw.sil_after > 0) {
        TurnEvent ev;
        ev.kind = dw.sil_kind;
        ev.time = t;
        ev.end = t + dw.sil_after;
        utt.events.push_back(ev);
        t = ev.end;
      }
    }
    double fsil = ClampedNormal(rng, cfg.final_sil_mean, cfg.final_sil_std,
                                cfg.final_sil_lo, cfg.final_sil_hi);
    TurnEvent ev;
    ev.kind = TurnKind::kFinish;
    ev.time = t;
    ev.end = t + fsil;
    utt.events.push_back(ev);
    t = ev.end;
  }

  utt.duration = t;
  utt.features = SynthesizeFeatures(utt.words, utt.duration, truth, cfg, rng);
  return utt;
}

std::string UttId(const char* split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05d", split, index);
  return buf;
}

}  // namespace

const std::vector<std::string>& FillerWords() {
  static const std::vector<std::string> kFillers = {"uh", "um", "er", "hmm",
                                                    "mm"};
  return kFillers;
}

void ValidateGeneratorConfig(const GeneratorConfig& cfg) {
  const int reserved =
      static_cast<int>(FillerWords().size() + FunctionWords().size());
  RequireRange(cfg.vocab_size >= reserved + 6, "vocab_size must be >= 20");
  RequireRange(cfg.num_phonemes >= 4 && cfg.num_phonemes <= 20,
               "num_phonemes must be in [4, 20]");
  RequireRange(cfg.frame_rate > 0, "frame_rate must be positive");
  RequireRange(cfg.feature_dim >= 1, "feature_dim must be >= 1");
  RequireRange(cfg.phoneme_mean_lo > 0 &&
                   cfg.phoneme_mean_hi >= cfg.phoneme_mean_lo,
               "phoneme mean range is invalid");
  RequireRange(cfg.phoneme_rel_std >= 0, "phoneme_rel_std must be >= 0");
  RequireRange(cfg.min_phoneme_dur > 0, "min_phoneme_dur must be positive");
  RequireRange(cfg.lead_sil_lo >= 0 && cfg.lead_sil_hi >= cfg.lead_sil_lo,
               "lead silence range is invalid");
  RequireRange(cfg.lead_sil_hi < 0.06,
               "lead_sil_hi must stay below the 0.06 s annotation minimum");
  RequireRange(cfg.medial_pause_lo > 0 &&
                   cfg.medial_pause_hi >= cfg.medial_pause_lo,
               "medial pause range is invalid");
  RequireRange(cfg.filled_pause_lo > 0 &&
                   cfg.filled_pause_hi >= cfg.filled_pause_lo,
               "filled pause range is invalid");
  RequireRange(cfg.lengthen_pause_lo > 0 &&
                   cfg.lengthen_pause_hi >= cfg.lengthen_pause_lo,
               "lengthening pause range is invalid");
  RequireRange(cfg.repeat_gap_lo > 0 && cfg.repeat_gap_hi >= cfg.repeat_gap_lo,
               "repetition gap range is invalid");
  RequireRange(cfg.final_sil_std >= 0 && cfg.final_sil_lo > 0 &&
                   cfg.final_sil_hi >= cfg.final_sil_lo,
               "final silence range is invalid");
  RequireRange(cfg.rate_random_pause >= 0 && cfg.rate_random_pause <= 1,
               "rate_random_pause must be in [0, 1]");
  RequireRange(cfg.rate_filled_pause >= 0 && cfg.rate_filled_pause <= 1,
               "rate_filled_pause must be in [0, 1]");
  RequireRange(cfg.rate_lengthening >= 0 && cfg.rate_lengthening <= 1,
               "rate_lengthening must be in [0, 1]");
  RequireRange(cfg.rate_repetition >= 0 && cfg.rate_repetition <= 1,
               "rate_repetition must be in [0, 1]");
  RequireRange(cfg.lengthen_z_lo > 0 && cfg.lengthen_z_hi >= cfg.lengthen_z_lo,
               "lengthening z range is invalid");
  RequireRange(cfg.noise_std >= 0, "noise_std must be >= 0");
  RequireRange(cfg.min_prototype_dist > 0,
               "min_prototype_dist must be positive");
}

Tensor<float> SynthesizeFeatures(const std::vector<TimedWord>& words,
                                 double duration, const GeneratorTruth& truth,
                                 const GeneratorConfig& config, Rng* rng) {
  const int num_phonemes = static_cast<int>(truth.phonemes.size());
  std::vector<PhonemeSegment> segments;
  for (const TimedWord& w : words) {
    for (const PhonemeSegment& seg : w.phonemes) {
      if (seg.phoneme < 0 || seg.phoneme >= num_phonemes) {
        throw DataError("feature synthesis: unknown phoneme id " +
                        std::to_string(seg.phoneme));
      }
      segments.push_back(seg);
    }
  }

  const int T = static_cast<int>(
      std::ceil(duration * config.frame_rate - 1e-9));
  const int D = config.feature_dim;
  Tensor<float> feats({std::max(0, T), D});
  std::size_t cursor = 0;
  for (int i = 0; i < T; ++i) {
    double center = (i + 0.5) / config.frame_rate;
    while (cursor < segments.size() && segments[cursor].end <= center) {
      ++cursor;
    }
    int row = num_phonemes;  // silence prototype
    if (cursor < segments.size() && segments[cursor].start <= center &&
        center < segments[cursor].end) {
      row = segments[cursor].phoneme;
    }
    for (int d = 0; d < D; ++d) {
      double v = truth.prototypes.At(row, d) + rng->Normal(0.0, config.noise_std);
      feats.At(i, d) = static_cast<float>(v);
    }
  }
  return feats;
}

GeneratedCorpora GenerateCorpus(const GeneratorConfig& config, int train_size,
                                int dev_size, int eval_size) {
  ValidateGeneratorConfig(config);
  if (train_size < 0 || dev_size < 0 || eval_size < 0) {
    throw ConfigError("generator: split sizes must be non-negative");
  }

  GeneratedCorpora out;
  GeneratorTruth& truth = out.truth;

  {
    Rng rng(Rng::Derive(config.seed, 0, kSubVocab));
    VocabPlan plan = BuildVocab(config, &rng);
    truth.words = plan.words;
    const int nv = NumVowelsFor(config.num_phonemes);
    const int nc = config.num_phonemes - nv;
    for (int i = 0; i < nc; ++i) truth.phonemes.push_back(kConsonants[i]);
    for (int i = 0; i < nv; ++i) truth.phonemes.push_back(kVowels[i]);

    Rng drng(Rng::Derive(config.seed, 0, kSubDurations));
    for (int p = 0; p < config.num_phonemes; ++p) {
      double mean = drng.Uniform(config.phoneme_mean_lo, config.phoneme_mean_hi);
      truth.phoneme_mean.push_back(mean);
      truth.phoneme_std.push_back(config.phoneme_rel_std * mean);
    }

    Rng prng(Rng::Derive(config.seed, 0, kSubPrototypes));
    const int rows = config.num_phonemes + 1;
    const double dmin =
        std::max(config.min_prototype_dist, 2.0 * config.noise_std);
    truth.prototypes = Tensor<float>({rows, config.feature_dim});
    for (int r = 0; r < rows; ++r) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        for (int d = 0; d < config.feature_dim; ++d) {
          truth.prototypes.At(r, d) = prng.Uniform(-1.0, 1.0);
        }
        placed = true;
        for (int o = 0; o < r && placed; ++o) {
          double sq = 0;
          for (int d = 0; d < config.feature_dim; ++d) {
            double diff = truth.prototypes.At(r, d) - truth.prototypes.At(o, d);
            sq += diff * diff;
          }
          if (std::sqrt(sq) < dmin) placed = false;
        }
      }
      if (!placed) {
        throw NumericError(
            "prototype placement failed; min_prototype_dist too large for "
            "feature_dim");
      }
    }

    auto fill_split = [&](Corpus* corpus, const char* name,
                          std::uint64_t stream, int size, bool is_eval) {
      corpus->vocab_words = truth.words;
      corpus->phonemes = truth.phonemes;
      corpus->frame_rate = config.frame_rate;
      corpus->feature_dim = config.feature_dim;
      for (int i = 0; i < size; ++i) {
        Rng urng(Rng::Derive(config.seed, stream, static_cast<std::uint64_t>(i)));
        int queries;
        if (is_eval) {
          queries = urng.UniformInt(2, 4);
        } else {
          queries = urng.UniformUnit() < 0.6 ? 1 : urng.UniformInt(2, 3);
        }
        corpus->utterances.push_back(BuildUtterance(
            plan, truth, config, UttId(name, i), queries, &urng));
      }
    };
    fill_split(&out.train, "train", 1, train_size, false);
    fill_split(&out.dev, "dev", 2, dev_size, false);
    fill_split(&out.eval, "eval", 3, eval_size, true);
  }

  return out;
}

}  // namespace convturn
