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

#include "convturn/annotate/annotate.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/transducer/vocab.h"
#include "json.hpp"

namespace convturn {
namespace {

using nlohmann::json;

std::string PhonemeLabel(const PhonemeStats& stats, int id) {
  if (id >= 0 && id < static_cast<int>(stats.names.size())) {
    return stats.names[static_cast<std::size_t>(id)];
  }
  return "#" + std::to_string(id);
}

// One silence stretch and the word it follows (-1 for the lead-in).
struct SilenceGap {
  int after_word = -1;
  double start = 0.0;
  double end = 0.0;
};

std::vector<SilenceGap> CollectGaps(const Utterance& utt) {
  std::vector<SilenceGap> gaps;
  double t = 0.0;
  for (std::size_t i = 0; i < utt.words.size(); ++i) {
    const TimedWord& w = utt.words[i];
    if (w.end < w.start || w.start + 1e-9 < t) {
      throw DataError("utterance " + utt.id +
                      ": word segments overlap or are unsorted");
    }
    if (w.start > t + 1e-9) {
      gaps.push_back({static_cast<int>(i) - 1, t, w.start});
    }
    t = w.end;
  }
  if (utt.duration + 1e-9 < t) {
    throw DataError("utterance " + utt.id + ": words run past the duration");
  }
  if (utt.duration > t + 1e-9) {
    gaps.push_back({static_cast<int>(utt.words.size()) - 1, t, utt.duration});
  }
  return gaps;
}

template <typename Fn>
void ForEachLine(const std::string& path, const char* what, Fn fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(std::string("cannot open ") + what + ": " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(std::string("malformed ") + what + " line in " + path +
                    ": " + e.what());
    }
  }
}

}  // namespace

void ValidateAnnotationConfig(const AnnotationConfig& config) {
  if (!(config.short_silence > 0) ||
      !(config.long_silence > config.short_silence)) {
    throw ConfigError(
        "annotation thresholds must satisfy long > short minimum > 0");
  }
  if (!(config.lengthen_z > 0)) {
    throw ConfigError("annotation lengthening z-score must be positive");
  }
}

const char* SpanKindName(SpanKind kind) {
  return kind == SpanKind::kReparandum ? "reparandum" : "interregnum";
}

SpanKind SpanKindFromName(const std::string& name) {
  if (name == "reparandum") return SpanKind::kReparandum;
  if (name == "interregnum") return SpanKind::kInterregnum;
  throw DataError("unknown disfluency span kind: " + name);
}

PhonemeStats ComputePhonemeStats(const Corpus& corpus) {
  PhonemeStats stats;
  stats.names = corpus.phonemes;
  std::vector<double> m2;  // Welford accumulators
  auto grow = [&](int id) {
    std::size_t need = static_cast<std::size_t>(id) + 1;
    if (stats.mean.size() < need) {
      stats.mean.resize(need, 0.0);
      stats.std.resize(need, 0.0);
      stats.count.resize(need, 0);
      m2.resize(need, 0.0);
    }
  };

  std::int64_t total = 0;
  for (const Utterance& utt : corpus.utterances) {
    for (const TimedWord& w : utt.words) {
      for (const PhonemeSegment& seg : w.phonemes) {
        if (seg.phoneme < 0) {
          throw DataError("utterance " + utt.id + ": negative phoneme id");
        }
        grow(seg.phoneme);
        std::size_t p = static_cast<std::size_t>(seg.phoneme);
        double dur = seg.end - seg.start;
        stats.count[p] += 1;
        double delta = dur - stats.mean[p];
        stats.mean[p] += delta / static_cast<double>(stats.count[p]);
        m2[p] += delta * (dur - stats.mean[p]);
        ++total;
      }
    }
  }
  if (total == 0) {
    throw DataError("cannot compute phoneme stats: corpus has no aligned "
                    "phoneme segments");
  }
  for (std::size_t p = 0; p < stats.mean.size(); ++p) {
    if (stats.count[p] >= 2) {
      stats.std[p] = std::sqrt(m2[p] / static_cast<double>(stats.count[p] - 1));
    }
  }
  return stats;
}

bool DetectLengthening(const TimedWord& word, const PhonemeStats& stats,
                       double z) {
  if (word.phonemes.empty()) {
    throw DataError("word '" + word.text + "' has no phoneme alignment");
  }
  const PhonemeSegment& last = word.phonemes.back();
  int id = last.phoneme;
  if (id < 0 || id >= static_cast<int>(stats.mean.size()) ||
      stats.count[static_cast<std::size_t>(id)] == 0) {
    throw DataError("no duration statistics for phoneme " +
                    PhonemeLabel(stats, id));
  }
  std::size_t p = static_cast<std::size_t>(id);
  double dur = last.end - last.start;
  return dur > stats.mean[p] + z * stats.std[p];
}

AnnotatedTranscript LabelSilences(const Utterance& utt,
                                  const PhonemeStats& stats,
                                  const AnnotationConfig& config,
                                  const std::vector<DisfluencySpan>& spans,
                                  AnnotationCounts* counts) {
  ValidateAnnotationConfig(config);
  std::unordered_set<std::string> fillers(config.fillers.begin(),
                                          config.fillers.end());
  std::unordered_set<int> span_last_word;
  for (const DisfluencySpan& s : spans) {
    if (s.utt_id != utt.id) continue;
    if (s.begin < 0 || s.end <= s.begin ||
        s.end > static_cast<int>(utt.words.size())) {
      throw DataError("utterance " + utt.id +
                      ": disfluency span out of range");
    }
    span_last_word.insert(s.end - 1);
  }

  AnnotationCounts local;
  AnnotationCounts* c = counts ? counts : &local;

  // token decided for the silence after each gap; empty = none
  std::vector<SilenceGap> gaps = CollectGaps(utt);
  std::vector<std::string> gap_token(gaps.size());
  const int last_word = static_cast<int>(utt.words.size()) - 1;
  for (std::size_t g = 0; g < gaps.size(); ++g) {
    double dur = gaps[g].end - gaps[g].start;
    int after = gaps[g].after_word;
    if (dur < config.short_silence) {
      c->dropped_short += 1;
      continue;
    }
    bool finish;
    if (after < 0) {
      finish = false;  // nothing was said yet, so nothing can have finished
    } else if (after == last_word) {
      finish = true;   // silence following the last word
    } else {
      finish = dur >= config.long_silence;
    }
    if (finish) {
      // Relabel exceptions: hesitation cues win over silence length.
      if (DetectLengthening(utt.words[static_cast<std::size_t>(after)], stats,
                            config.lengthen_z)) {
        c->relabel_lengthened += 1;
        finish = false;
      } else if (fillers.count(utt.words[static_cast<std::size_t>(after)].text) >
                 0) {
        c->relabel_filler += 1;
        finish = false;
      } else if (span_last_word.count(after) > 0) {
        c->relabel_disfluency += 1;
        finish = false;
      }
    }
    if (finish) {
      c->finish += 1;
      gap_token[g] = Vocab::kFinishText;
    } else {
      c->pause += 1;
      gap_token[g] = Vocab::kPauseText;
    }
  }

  AnnotatedTranscript out;
  out.utt_id = utt.id;
  std::size_t g = 0;
  auto emit_gap = [&](int after_word) {
    if (g < gaps.size() && gaps[g].after_word == after_word) {
      if (!gap_token[g].empty()) {
        InsertedToken tok;
        tok.index = static_cast<int>(out.tokens.size());
        tok.token = gap_token[g];
        tok.silence_start = gaps[g].start;
        tok.silence_end = gaps[g].end;
        out.tokens.push_back(tok.token);
        out.inserted.push_back(tok);
      }
      ++g;
    }
  };
  emit_gap(-1);
  for (std::size_t i = 0; i < utt.words.size(); ++i) {
    out.tokens.push_back(utt.words[i].text);
    emit_gap(static_cast<int>(i));
  }
  return out;
}

std::vector<DisfluencySpan> DetectRepetitions(
    const std::string& utt_id, const std::vector<std::string>& tokens) {
  std::vector<DisfluencySpan> spans;
  const int len = static_cast<int>(tokens.size());
  int i = 0;
  while (i < len) {
    int matched = 0;
    for (int n = 3; n >= 1; --n) {
      if (i + 2 * n > len) continue;
      if (std::equal(tokens.begin() + i, tokens.begin() + i + n,
                     tokens.begin() + i + n)) {
        DisfluencySpan s;
        s.utt_id = utt_id;
        s.begin = i;
        s.end = i + n;
        s.kind = SpanKind::kReparandum;
        spans.push_back(s);
        matched = n;
        break;
      }
    }
    i += matched > 0 ? matched : 1;
  }
  return spans;
}

std::vector<std::string> StripAnnotations(const AnnotatedTranscript& ann) {
  std::vector<bool> turn_token(ann.tokens.size(), false);
  for (const InsertedToken& tok : ann.inserted) {
    if (tok.index < 0 || tok.index >= static_cast<int>(ann.tokens.size())) {
      throw DataError("annotated transcript " + ann.utt_id +
                      ": inserted token index out of range");
    }
    turn_token[static_cast<std::size_t>(tok.index)] = true;
  }
  std::vector<std::string> words;
  for (std::size_t i = 0; i < ann.tokens.size(); ++i) {
    if (!turn_token[i]) words.push_back(ann.tokens[i]);
  }
  return words;
}

void WriteSpans(const std::vector<DisfluencySpan>& spans,
                const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open span file for writing: " + path);
  for (const DisfluencySpan& s : spans) {
    json j = {{"utt_id", s.utt_id},
              {"start_word", s.begin},
              {"end_word", s.end},
              {"kind", SpanKindName(s.kind)}};
    os << j.dump() << "\n";
  }
  os.flush();
  if (!os) throw IoError("span file write failed: " + path);
}

std::vector<DisfluencySpan> ReadSpans(const std::string& path) {
  std::vector<DisfluencySpan> spans;
  ForEachLine(path, "span file", [&](const json& j) {
    DisfluencySpan s;
    s.utt_id = j.at("utt_id").get<std::string>();
    s.begin = j.at("start_word").get<int>();
    s.end = j.at("end_word").get<int>();
    s.kind = SpanKindFromName(j.at("kind").get<std::string>());
    spans.push_back(std::move(s));
  });
  return spans;
}

void WriteAnnotations(const std::vector<AnnotatedTranscript>& annotations,
                      const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open annotation file for writing: " + path);
  for (const AnnotatedTranscript& ann : annotations) {
    json inserted = json::array();
    for (const InsertedToken& tok : ann.inserted) {
      inserted.push_back({{"index", tok.index},
                          {"token", tok.token},
                          {"silence_start", tok.silence_start},
                          {"silence_end", tok.silence_end}});
    }
    json j = {{"utt_id", ann.utt_id},
              {"tokens", ann.tokens},
              {"inserted", inserted}};
    os << j.dump() << "\n";
  }
  os.flush();
  if (!os) throw IoError("annotation file write failed: " + path);
}

std::vector<AnnotatedTranscript> ReadAnnotations(const std::string& path) {
  std::vector<AnnotatedTranscript> out;
  ForEachLine(path, "annotation file", [&](const json& j) {
    AnnotatedTranscript ann;
    ann.utt_id = j.at("utt_id").get<std::string>();
    ann.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const json& tj : j.at("inserted")) {
      InsertedToken tok;
      tok.index = tj.at("index").get<int>();
      tok.token = tj.at("token").get<std::string>();
      tok.silence_start = tj.at("silence_start").get<double>();
      tok.silence_end = tj.at("silence_end").get<double>();
      ann.inserted.push_back(std::move(tok));
    }
    out.push_back(std::move(ann));
  });
  return out;
}

}  // namespace convturn
