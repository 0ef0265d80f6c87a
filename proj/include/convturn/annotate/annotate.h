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
//
// Transcript labeling: turn silences between aligned words into `</s>` and
// `<pause>` tokens. Long silences between words close a turn; shorter ones
// mark hesitation; silences after lengthened words, filler words, or
// disfluent phrases are never turn ends, whatever their length.

#ifndef CONVTURN_ANNOTATE_ANNOTATE_H_
#define CONVTURN_ANNOTATE_ANNOTATE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "convturn/corpus/corpus.h"

namespace convturn {

// Per-phoneme duration statistics from a training corpus. Indexed by
// phoneme id; `count` 0 means the phoneme never occurred.
struct PhonemeStats {
  std::vector<std::string> names;  // may be shorter than mean if ids exceed it
  std::vector<double> mean;
  std::vector<double> std;         // unbiased; 0 when count < 2
  std::vector<std::int64_t> count;
};

struct AnnotationConfig {
  double long_silence = 0.5;   // at or above: speaker finished
  double short_silence = 0.06; // at or above: hesitation; below: dropped
  double lengthen_z = 10.0;
  std::vector<std::string> fillers = {"uh", "um", "er", "hmm", "mm"};
};

void ValidateAnnotationConfig(const AnnotationConfig& config);

enum class SpanKind { kReparandum, kInterregnum };

const char* SpanKindName(SpanKind kind);
SpanKind SpanKindFromName(const std::string& name);

// Word-index range [begin, end) within one utterance's transcript.
struct DisfluencySpan {
  std::string utt_id;
  int begin = 0;
  int end = 0;
  SpanKind kind = SpanKind::kReparandum;
};

struct InsertedToken {
  int index = 0;  // position within AnnotatedTranscript::tokens
  std::string token;
  double silence_start = 0.0;
  double silence_end = 0.0;
};

struct AnnotatedTranscript {
  std::string utt_id;
  std::vector<std::string> tokens;  // words interleaved with turn tokens
  std::vector<InsertedToken> inserted;
};

// How each silence was decided, for reporting. Relabels count only actual
// finish-to-pause conversions.
struct AnnotationCounts {
  std::int64_t finish = 0;
  std::int64_t pause = 0;
  std::int64_t relabel_lengthened = 0;
  std::int64_t relabel_filler = 0;
  std::int64_t relabel_disfluency = 0;
  std::int64_t dropped_short = 0;
};

// Unbiased per-phoneme duration stats over every aligned segment in the
// corpus. A corpus without a single phoneme segment is an error.
PhonemeStats ComputePhonemeStats(const Corpus& corpus);

// True iff the word's final phoneme runs longer than mean + z * std
// (strictly; zero-variance phonemes compare against the mean alone).
bool DetectLengthening(const TimedWord& word, const PhonemeStats& stats,
                       double z);

// Applies the silence rules to one utterance. `spans` may cover many
// utterances; only entries matching utt.id apply. Counts are accumulated
// into *counts when given.
AnnotatedTranscript LabelSilences(const Utterance& utt,
                                  const PhonemeStats& stats,
                                  const AnnotationConfig& config,
                                  const std::vector<DisfluencySpan>& spans,
                                  AnnotationCounts* counts = nullptr);

// Fallback span source when no external detector output is supplied: flags
// maximal immediately repeated n-grams (n <= 3), first occurrence marked
// reparandum.
std::vector<DisfluencySpan> DetectRepetitions(
    const std::string& utt_id, const std::vector<std::string>& tokens);

// Words only, in order: the transcript with inserted tokens removed.
std::vector<std::string> StripAnnotations(const AnnotatedTranscript& ann);

// Span files are JSON lines {utt_id, start_word, end_word, kind}.
void WriteSpans(const std::vector<DisfluencySpan>& spans,
                const std::string& path);
std::vector<DisfluencySpan> ReadSpans(const std::string& path);

// Annotated transcripts are JSON lines
// {utt_id, tokens: [...], inserted: [{index, token, silence_start,
// silence_end}]}.
void WriteAnnotations(const std::vector<AnnotatedTranscript>& annotations,
                      const std::string& path);
std::vector<AnnotatedTranscript> ReadAnnotations(const std::string& path);

}  // namespace convturn

#endif  // CONVTURN_ANNOTATE_ANNOTATE_H_
