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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/corpus/corpus.h"
#include "json.hpp"

namespace convturn {
namespace {

using nlohmann::json;

constexpr char kFeatureMagic[4] = {'T', 'W', 'F', '1'};

void PutU32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t GetU32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("feature file truncated reading " + what);
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

json WordToJson(const TimedWord& w) {
  json ph = json::array();
  for (const PhonemeSegment& seg : w.phonemes) {
    ph.push_back({{"p", seg.phoneme}, {"s", seg.start}, {"e", seg.end}});
  }
  return {{"w", w.text}, {"s", w.start}, {"e", w.end}, {"ph", ph}};
}

TimedWord WordFromJson(const json& j) {
  TimedWord w;
  w.text = j.at("w").get<std::string>();
  w.start = j.at("s").get<double>();
  w.end = j.at("e").get<double>();
  for (const json& pj : j.at("ph")) {
    PhonemeSegment seg;
    seg.phoneme = pj.at("p").get<int>();
    seg.start = pj.at("s").get<double>();
    seg.end = pj.at("e").get<double>();
    w.phonemes.push_back(seg);
  }
  return w;
}

}  // namespace

const char* TurnKindName(TurnKind kind) {
  return kind == TurnKind::kPause ? "pause" : "finish";
}

TurnKind TurnKindFromName(const std::string& name) {
  if (name == "pause") return TurnKind::kPause;
  if (name == "finish") return TurnKind::kFinish;
  throw DataError("unknown turn event kind: " + name);
}

void WriteCorpus(const Corpus& corpus, const std::string& stem) {
  std::ofstream meta(stem + ".jsonl", std::ios::binary);
  std::ofstream feat(stem + ".twf", std::ios::binary);
  if (!meta || !feat) {
    throw IoError("cannot open corpus files for writing: " + stem);
  }

  json header = {{"corpus_header", 1},
                 {"vocab", corpus.vocab_words},
                 {"phonemes", corpus.phonemes},
                 {"frame_rate", corpus.frame_rate},
                 {"feature_dim", corpus.feature_dim},
                 {"num_utterances", corpus.utterances.size()}};
  meta << header.dump() << "\n";

  for (const Utterance& utt : corpus.utterances) {
    if (utt.features.NumAxes() != 2 ||
        utt.features.Dim(1) != corpus.feature_dim) {
      throw DataError("utterance " + utt.id +
                      ": feature shape does not match corpus feature_dim");
    }
    json words = json::array();
    for (const TimedWord& w : utt.words) words.push_back(WordToJson(w));
    json events = json::array();
    for (const TurnEvent& ev : utt.events) {
      events.push_back(
          {{"kind", TurnKindName(ev.kind)}, {"t", ev.time}, {"end", ev.end}});
    }
    json line = {{"id", utt.id},
                 {"dur", utt.duration},
                 {"transcript", utt.transcript},
                 {"words", words},
                 {"events", events}};
    meta << line.dump() << "\n";

    const int T = utt.features.Dim(0);
    const int D = utt.features.Dim(1);
    feat.write(kFeatureMagic, 4);
    PutU32(feat, static_cast<std::uint32_t>(T));
    PutU32(feat, static_cast<std::uint32_t>(D));
    std::vector<unsigned char> buf(static_cast<std::size_t>(T * D) * 4);
    const float* src = utt.features.Data();
    for (std::size_t i = 0; i < static_cast<std::size_t>(T * D); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, &src[i], 4);
      buf[i * 4 + 0] = static_cast<unsigned char>(bits & 0xff);
      buf[i * 4 + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
      buf[i * 4 + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
      buf[i * 4 + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
    }
    feat.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size()));
  }

  meta.flush();
  feat.flush();
  if (!meta || !feat) throw IoError("corpus write failed: " + stem);
}

Corpus ReadCorpus(const std::string& stem) {
  std::ifstream meta(stem + ".jsonl", std::ios::binary);
  if (!meta) throw IoError("cannot open " + stem + ".jsonl");
  std::ifstream feat(stem + ".twf", std::ios::binary);
  if (!feat) throw IoError("cannot open " + stem + ".twf");

  Corpus corpus;
  std::size_t expected = 0;
  std::string line;
  try {
    if (!std::getline(meta, line)) {
      throw IoError("corpus metadata is empty: " + stem);
    }
    json header = json::parse(line);
    if (header.value("corpus_header", 0) != 1) {
      throw IoError("corpus header missing or unsupported: " + stem);
    }
    corpus.vocab_words = header.at("vocab").get<std::vector<std::string>>();
    corpus.phonemes = header.at("phonemes").get<std::vector<std::string>>();
    corpus.frame_rate = header.at("frame_rate").get<double>();
    corpus.feature_dim = header.at("feature_dim").get<int>();
    expected = header.at("num_utterances").get<std::size_t>();

    while (std::getline(meta, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      Utterance utt;
      utt.id = j.at("id").get<std::string>();
      utt.duration = j.at("dur").get<double>();
      utt.transcript = j.at("transcript").get<std::vector<std::string>>();
      for (const json& wj : j.at("words")) utt.words.push_back(WordFromJson(wj));
      for (const json& ej : j.at("events")) {
        TurnEvent ev;
        ev.kind = TurnKindFromName(ej.at("kind").get<std::string>());
        ev.time = ej.at("t").get<double>();
        ev.end = ej.at("end").get<double>();
        utt.events.push_back(ev);
      }
      corpus.utterances.push_back(std::move(utt));
    }
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("corpus metadata parse failed (" + stem +
                  "): " + e.what());
  }
  if (corpus.utterances.size() != expected) {
    throw IoError("corpus metadata line count mismatch: header says " +
                  std::to_string(expected) + ", found " +
                  std::to_string(corpus.utterances.size()));
  }

  for (Utterance& utt : corpus.utterances) {
    char magic[4];
    if (!feat.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
      throw IoError("bad feature record magic for utterance " + utt.id);
    }
    const std::uint32_t T = GetU32(feat, "frame count");
    const std::uint32_t D = GetU32(feat, "feature dim");
    if (static_cast<int>(D) != corpus.feature_dim) {
      throw IoError("feature dim mismatch for utterance " + utt.id);
    }
    utt.features =
        Tensor<float>({static_cast<int>(T), static_cast<int>(D)});
    const std::size_t n = static_cast<std::size_t>(T) * D;
    std::vector<unsigned char> buf(n * 4);
    if (!feat.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size()))) {
      throw IoError("feature file truncated for utterance " + utt.id);
    }
    float* dst = utt.features.Data();
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(buf[i * 4 + 0]) |
                           (static_cast<std::uint32_t>(buf[i * 4 + 1]) << 8) |
                           (static_cast<std::uint32_t>(buf[i * 4 + 2]) << 16) |
                           (static_cast<std::uint32_t>(buf[i * 4 + 3]) << 24);
      std::memcpy(&dst[i], &bits, 4);
    }
  }
  if (feat.peek() != std::ifstream::traits_type::eof()) {
    throw IoError("trailing data in feature file: " + stem + ".twf");
  }
  return corpus;
}

}  // namespace convturn
