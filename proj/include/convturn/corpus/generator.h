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

#ifndef CONVTURN_CORPUS_GENERATOR_H_
#define CONVTURN_CORPUS_GENERATOR_H_

#include <cstdint>
#include <string>
#include <vector>

#include "convturn/corpus/corpus.h"
#include "convturn/nn/rng.h"
#include "convturn/nn/tensor.h"

namespace convturn {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  int vocab_size = 60;  // fillers + function words + synthesized content words
  int num_phonemes = 20;
  double frame_rate = 100.0;
  int feature_dim = 16;

  // Per-phoneme duration model: mean drawn uniformly per phoneme, std
  // proportional to that mean, samples clamped below.
  double phoneme_mean_lo = 0.055;
  double phoneme_mean_hi = 0.115;
  double phoneme_rel_std = 0.075;
  double min_phoneme_dur = 0.02;

  // Silence durations (seconds). The lead-in stays below the annotation
  // short-minimum so it carries no turn event.
  double lead_sil_lo = 0.00;
  double lead_sil_hi = 0.05;
  double medial_pause_lo = 0.30;
  double medial_pause_hi = 1.50;
  double filled_pause_lo = 0.20;
  double filled_pause_hi = 1.00;
  double lengthen_pause_lo = 0.30;
  double lengthen_pause_hi = 1.20;
  double repeat_gap_lo = 0.20;
  double repeat_gap_hi = 0.80;
  double final_sil_mean = 1.00;
  double final_sil_std = 0.15;
  double final_sil_lo = 0.60;
  double final_sil_hi = 1.40;

  // Per-query injection rates for the four disfluency types.
  double rate_random_pause = 0.15;
  double rate_filled_pause = 0.35;
  double rate_lengthening = 0.02;
  double rate_repetition = 0.30;

  // Injected lengthenings land this many stds above the phoneme mean.
  double lengthen_z_lo = 25.0;
  double lengthen_z_hi = 35.0;

  double noise_std = 0.08;
  double min_prototype_dist = 0.60;  // raised to 2x noise_std if smaller
};

void ValidateGeneratorConfig(const GeneratorConfig& config);

// Everything the generator knows that the corpus files do not carry:
// the true phoneme duration distribution and the feature prototypes.
struct GeneratorTruth {
  std::vector<std::string> words;
  std::vector<std::string> phonemes;
  std::vector<double> phoneme_mean;
  std::vector<double> phoneme_std;
  Tensor<float> prototypes;  // [num_phonemes + 1, D]; last row is silence
};

struct GeneratedCorpora {
  GeneratorTruth truth;
  Corpus train;
  Corpus dev;
  Corpus eval;
};

// Deterministic in config.seed: per-utterance generation draws from derived
// streams, so the output is independent of generation order. Train and dev
// mix single- and 2-3-query utterances; the eval split concatenates 2-4
// queries per utterance.
GeneratedCorpora GenerateCorpus(const GeneratorConfig& config, int train_size,
                                int dev_size, int eval_size);

// Frame synthesis for one utterance: phoneme frames take their prototype
// plus Gaussian noise, frames outside every phoneme segment take the silence
// prototype. Frame membership is decided at the frame center.
Tensor<float> SynthesizeFeatures(const std::vector<TimedWord>& words,
                                 double duration, const GeneratorTruth& truth,
                                 const GeneratorConfig& config, Rng* rng);

// The filler lexicon is shared with the annotation defaults.
const std::vector<std::string>& FillerWords();

}  // namespace convturn

#endif  // CONVTURN_CORPUS_GENERATOR_H_
