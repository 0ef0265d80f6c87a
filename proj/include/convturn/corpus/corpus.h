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

#ifndef CONVTURN_CORPUS_CORPUS_H_
#define CONVTURN_CORPUS_CORPUS_H_

#include <string>
#include <vector>

#include "convturn/nn/tensor.h"

namespace convturn {

struct PhonemeSegment {
  int phoneme = 0;
  double start = 0.0;
  double end = 0.0;
};

struct TimedWord {
  std::string text;
  double start = 0.0;
  double end = 0.0;
  std::vector<PhonemeSegment> phonemes;  // tile [start, end)
};

enum class TurnKind { kPause, kFinish };

const char* TurnKindName(TurnKind kind);
TurnKind TurnKindFromName(const std::string& name);

// Ground-truth turn event. `time` is the onset of the silence that carries
// the event; `end` closes that silence.
struct TurnEvent {
  TurnKind kind = TurnKind::kPause;
  double time = 0.0;
  double end = 0.0;
};

struct Utterance {
  std::string id;
  std::vector<TimedWord> words;
  std::vector<TurnEvent> events;
  std::vector<std::string> transcript;  // spoken words, in order
  double duration = 0.0;
  Tensor<float> features;  // [T, D], T == ceil(duration * frame_rate)
};

struct Corpus {
  std::vector<std::string> vocab_words;
  std::vector<std::string> phonemes;
  double frame_rate = 100.0;
  int feature_dim = 16;
  std::vector<Utterance> utterances;
};

// Two files per corpus: <stem>.jsonl carries a header line plus one metadata
// line per utterance; <stem>.twf concatenates per-utterance feature records
// ("TWF1" magic, u32 T, u32 D little-endian, then T*D little-endian float32
// row-major) in the same order.
void WriteCorpus(const Corpus& corpus, const std::string& stem);
Corpus ReadCorpus(const std::string& stem);

}  // namespace convturn

#endif  // CONVTURN_CORPUS_CORPUS_H_
