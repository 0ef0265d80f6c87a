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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/corpus/corpus.h"
#include "convturn/corpus/generator.h"
#include "convturn/nn/rng.h"

namespace convturn {
namespace {

std::filesystem::path TempDir() {
  auto dir = std::filesystem::temp_directory_path() / "convturn_corpus_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<char> SlurpFile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return std::vector<char>(std::istreambuf_iterator<char>(is),
                           std::istreambuf_iterator<char>());
}

// Silence stretches implied by word timing: the lead-in, every inter-word
// gap, and the tail up to the utterance end.
struct Silence {
  double start = 0.0;
  double end = 0.0;
};

std::vector<Silence> SilencesOf(const Utterance& utt) {
  std::vector<Silence> out;
  double t = 0.0;
  for (const TimedWord& w : utt.words) {
    if (w.start > t + 1e-12) out.push_back({t, w.start});
    t = w.end;
  }
  if (utt.duration > t + 1e-12) out.push_back({t, utt.duration});
  return out;
}

int NearestPrototype(const Tensor<float>& protos, const float* frame, int d) {
  int best = -1;
  double best_sq = 0;
  for (int r = 0; r < protos.Dim(0); ++r) {
    double sq = 0;
    for (int i = 0; i < d; ++i) {
      double diff = protos.At(r, i) - frame[i];
      sq += diff * diff;
    }
    if (best < 0 || sq < best_sq) {
      best = r;
      best_sq = sq;
    }
  }
  return best;
}

// Ground-truth prototype row for a frame center, from the word timing.
int TrueRow(const Utterance& utt, double center, int silence_row) {
  for (const TimedWord& w : utt.words) {
    for (const PhonemeSegment& seg : w.phonemes) {
      if (seg.start <= center && center < seg.end) return seg.phoneme;
    }
  }
  return silence_row;
}

TEST_CASE("generation is deterministic in the seed") {
  GeneratorConfig cfg;
  cfg.seed = 11;
  GeneratedCorpora a = GenerateCorpus(cfg, 3, 2, 2);
  GeneratedCorpora b = GenerateCorpus(cfg, 3, 2, 2);

  auto dir = TempDir();
  WriteCorpus(a.train, (dir / "det_a").string());
  WriteCorpus(b.train, (dir / "det_b").string());
  CHECK(SlurpFile(dir / "det_a.jsonl") == SlurpFile(dir / "det_b.jsonl"));
  CHECK(SlurpFile(dir / "det_a.twf") == SlurpFile(dir / "det_b.twf"));

  cfg.seed = 12;
  GeneratedCorpora c = GenerateCorpus(cfg, 3, 2, 2);
  CHECK(c.train.utterances[0].transcript != a.train.utterances[0].transcript);
}

TEST_CASE("zero disfluency rates produce only finish events") {
  GeneratorConfig cfg;
  cfg.seed = 5;
  cfg.rate_random_pause = 0;
  cfg.rate_filled_pause = 0;
  cfg.rate_lengthening = 0;
  cfg.rate_repetition = 0;
  GeneratedCorpora g = GenerateCorpus(cfg, 20, 0, 0);
  REQUIRE(g.train.utterances.size() == 20);
  for (const Utterance& utt : g.train.utterances) {
    CHECK(!utt.events.empty());
    for (const TurnEvent& ev : utt.events) {
      CHECK(ev.kind == TurnKind::kFinish);
    }
  }
}

TEST_CASE("every long enough silence carries exactly one event") {
  GeneratorConfig cfg;
  cfg.seed = 21;
  GeneratedCorpora g = GenerateCorpus(cfg, 30, 0, 10);
  std::vector<const Utterance*> utts;
  for (const Utterance& u : g.train.utterances) utts.push_back(&u);
  for (const Utterance& u : g.eval.utterances) utts.push_back(&u);

  int pauses = 0;
  int finishes = 0;
  for (const Utterance* utt : utts) {
    std::vector<Silence> sils = SilencesOf(*utt);
    std::vector<Silence> long_sils;
    for (const Silence& s : sils) {
      if (s.end - s.start >= 0.06) long_sils.push_back(s);
    }
    REQUIRE(utt->events.size() == long_sils.size());
    for (std::size_t i = 0; i < long_sils.size(); ++i) {
      const TurnEvent& ev = utt->events[i];
      CHECK(ev.time == doctest::Approx(long_sils[i].start).epsilon(1e-12));
      CHECK(ev.end == doctest::Approx(long_sils[i].end).epsilon(1e-12));
      if (i + 1 < utt->events.size()) {
        CHECK(ev.time < utt->events[i + 1].time);
      }
      if (ev.kind == TurnKind::kPause) {
        ++pauses;
      } else {
        ++finishes;
      }
    }
    // The last silence of an utterance always closes a query.
    REQUIRE(!utt->events.empty());
    CHECK(utt->events.back().kind == TurnKind::kFinish);
    CHECK(utt->events.back().end == doctest::Approx(utt->duration));
  }
  CHECK(pauses > 0);
  CHECK(finishes > 0);
}

TEST_CASE("phoneme segments tile each word") {
  GeneratorConfig cfg;
  cfg.seed = 31;
  GeneratedCorpora g = GenerateCorpus(cfg, 10, 0, 0);
  for (const Utterance& utt : g.train.utterances) {
    REQUIRE(!utt.words.empty());
    CHECK(utt.transcript.size() == utt.words.size());
    for (std::size_t wi = 0; wi < utt.words.size(); ++wi) {
      const TimedWord& w = utt.words[wi];
      CHECK(utt.transcript[wi] == w.text);
      REQUIRE(!w.phonemes.empty());
      CHECK(w.phonemes.front().start == doctest::Approx(w.start));
      CHECK(w.phonemes.back().end == doctest::Approx(w.end));
      for (std::size_t pi = 0; pi + 1 < w.phonemes.size(); ++pi) {
        CHECK(w.phonemes[pi].end ==
              doctest::Approx(w.phonemes[pi + 1].start));
        CHECK(w.phonemes[pi].end > w.phonemes[pi].start);
      }
      if (wi + 1 < utt.words.size()) {
        CHECK(w.end <= utt.words[wi + 1].start + 1e-12);
      }
    }
  }
}

TEST_CASE("noise-free features reproduce the prototypes exactly") {
  GeneratorConfig cfg;
  cfg.seed = 41;
  cfg.noise_std = 0.0;
  GeneratedCorpora g = GenerateCorpus(cfg, 2, 0, 0);
  const int silence_row = static_cast<int>(g.truth.phonemes.size());
  for (const Utterance& utt : g.train.utterances) {
    const int T = utt.features.Dim(0);
    const int D = utt.features.Dim(1);
    CHECK(T == static_cast<int>(std::ceil(utt.duration * cfg.frame_rate - 1e-9)));
    for (int t = 0; t < T; ++t) {
      double center = (t + 0.5) / cfg.frame_rate;
      int row = TrueRow(utt, center, silence_row);
      for (int d = 0; d < D; ++d) {
        CHECK(utt.features.At(t, d) == g.truth.prototypes.At(row, d));
      }
    }
  }
}

TEST_CASE("noisy frames still classify to the correct prototype") {
  GeneratorConfig cfg;
  cfg.seed = 43;
  GeneratedCorpora g = GenerateCorpus(cfg, 6, 0, 0);
  const int silence_row = static_cast<int>(g.truth.phonemes.size());
  int total = 0;
  int correct = 0;
  for (const Utterance& utt : g.train.utterances) {
    const int T = utt.features.Dim(0);
    const int D = utt.features.Dim(1);
    for (int t = 0; t < T; ++t) {
      double center = (t + 0.5) / cfg.frame_rate;
      int row = TrueRow(utt, center, silence_row);
      int got = NearestPrototype(g.truth.prototypes,
                                 utt.features.Data() + t * D, D);
      ++total;
      if (got == row) ++correct;
    }
  }
  REQUIRE(total > 1000);
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("a one second silent utterance spans one hundred frames") {
  GeneratorConfig cfg;
  cfg.noise_std = 0.0;
  GeneratorTruth truth;
  truth.phonemes = {"p", "a"};
  truth.prototypes = Tensor<float>({3, cfg.feature_dim});
  for (int d = 0; d < cfg.feature_dim; ++d) truth.prototypes.At(2, d) = 0.5f;
  Rng rng(1);
  Tensor<float> feats = SynthesizeFeatures({}, 1.0, truth, cfg, &rng);
  REQUIRE(feats.Dim(0) == 100);
  for (int t = 0; t < 100; ++t) {
    CHECK(feats.At(t, 0) == 0.5f);
  }

  // An out-of-range phoneme id in the timing is rejected.
  TimedWord w;
  w.text = "x";
  w.start = 0.0;
  w.end = 0.2;
  w.phonemes.push_back({7, 0.0, 0.2});
  CHECK_THROWS_AS(SynthesizeFeatures({w}, 1.0, truth, cfg, &rng), DataError);
}

TEST_CASE("vocabulary starts with fillers and contains no duplicates") {
  GeneratorConfig cfg;
  cfg.seed = 51;
  GeneratedCorpora g = GenerateCorpus(cfg, 1, 0, 0);
  const std::vector<std::string>& words = g.truth.words;
  REQUIRE(static_cast<int>(words.size()) == cfg.vocab_size);
  const std::vector<std::string>& fillers = FillerWords();
  for (std::size_t i = 0; i < fillers.size(); ++i) {
    CHECK(words[i] == fillers[i]);
  }
  std::set<std::string> uniq(words.begin(), words.end());
  CHECK(uniq.size() == words.size());
  CHECK(std::count(words.begin(), words.end(), "the") == 1);
  CHECK(std::count(words.begin(), words.end(), "please") == 1);
}

TEST_CASE("eval utterances end queries and usually hesitate") {
  GeneratorConfig cfg;
  cfg.seed = 61;
  GeneratedCorpora g = GenerateCorpus(cfg, 0, 0, 40);
  int with_pause = 0;
  for (const Utterance& utt : g.eval.utterances) {
    int finishes = 0;
    bool pause = false;
    for (const TurnEvent& ev : utt.events) {
      if (ev.kind == TurnKind::kFinish) ++finishes;
      if (ev.kind == TurnKind::kPause) pause = true;
    }
    CHECK(finishes >= 2);  // eval utterances concatenate at least two queries
    if (pause) ++with_pause;
  }
  CHECK(with_pause >= 28);  // 70 percent of 40
}

TEST_CASE("empirical phoneme durations match the sampling distribution") {
  GeneratorConfig cfg;
  cfg.seed = 71;
  cfg.rate_random_pause = 0;
  cfg.rate_filled_pause = 0;
  cfg.rate_lengthening = 0;
  cfg.rate_repetition = 0;
  GeneratedCorpora g = GenerateCorpus(cfg, 250, 0, 0);

  std::vector<std::vector<double>> durs(g.truth.phonemes.size());
  for (const Utterance& utt : g.train.utterances) {
    for (const TimedWord& w : utt.words) {
      for (const PhonemeSegment& seg : w.phonemes) {
        durs[static_cast<std::size_t>(seg.phoneme)].push_back(seg.end -
                                                              seg.start);
      }
    }
  }
  for (std::size_t p = 0; p < durs.size(); ++p) {
    REQUIRE(durs[p].size() >= 30);
    double sum = 0;
    for (double d : durs[p]) sum += d;
    double mean = sum / static_cast<double>(durs[p].size());
    double se = g.truth.phoneme_std[p] /
                std::sqrt(static_cast<double>(durs[p].size()));
    CHECK(std::abs(mean - g.truth.phoneme_mean[p]) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("corpus round trip is exact") {
  GeneratorConfig cfg;
  cfg.seed = 81;
  GeneratedCorpora g = GenerateCorpus(cfg, 4, 0, 0);
  auto dir = TempDir();
  const std::string stem = (dir / "roundtrip").string();
  WriteCorpus(g.train, stem);
  Corpus back = ReadCorpus(stem);

  REQUIRE(back.utterances.size() == g.train.utterances.size());
  CHECK(back.vocab_words == g.train.vocab_words);
  CHECK(back.phonemes == g.train.phonemes);
  CHECK(back.frame_rate == g.train.frame_rate);
  CHECK(back.feature_dim == g.train.feature_dim);
  for (std::size_t i = 0; i < back.utterances.size(); ++i) {
    const Utterance& a = g.train.utterances[i];
    const Utterance& b = back.utterances[i];
    CHECK(a.id == b.id);
    CHECK(a.duration == b.duration);
    CHECK(a.transcript == b.transcript);
    REQUIRE(a.words.size() == b.words.size());
    for (std::size_t wi = 0; wi < a.words.size(); ++wi) {
      CHECK(a.words[wi].text == b.words[wi].text);
      CHECK(a.words[wi].start == b.words[wi].start);
      CHECK(a.words[wi].end == b.words[wi].end);
      REQUIRE(a.words[wi].phonemes.size() == b.words[wi].phonemes.size());
      for (std::size_t pi = 0; pi < a.words[wi].phonemes.size(); ++pi) {
        CHECK(a.words[wi].phonemes[pi].phoneme ==
              b.words[wi].phonemes[pi].phoneme);
        CHECK(a.words[wi].phonemes[pi].start == b.words[wi].phonemes[pi].start);
        CHECK(a.words[wi].phonemes[pi].end == b.words[wi].phonemes[pi].end);
      }
    }
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t ei = 0; ei < a.events.size(); ++ei) {
      CHECK(a.events[ei].kind == b.events[ei].kind);
      CHECK(a.events[ei].time == b.events[ei].time);
      CHECK(a.events[ei].end == b.events[ei].end);
    }
    REQUIRE(a.features.Dim(0) == b.features.Dim(0));
    REQUIRE(a.features.Dim(1) == b.features.Dim(1));
    CHECK(std::memcmp(a.features.Data(), b.features.Data(),
                      a.features.Numel() * sizeof(float)) == 0);
  }

  // A rewrite of what was read is byte identical.
  const std::string stem2 = (dir / "roundtrip2").string();
  WriteCorpus(back, stem2);
  CHECK(SlurpFile(dir / "roundtrip.jsonl") ==
        SlurpFile(dir / "roundtrip2.jsonl"));
  CHECK(SlurpFile(dir / "roundtrip.twf") == SlurpFile(dir / "roundtrip2.twf"));
}

TEST_CASE("an empty corpus round trips") {
  Corpus empty;
  empty.vocab_words = {"uh", "go"};
  empty.phonemes = {"g", "o"};
  auto dir = TempDir();
  const std::string stem = (dir / "empty").string();
  WriteCorpus(empty, stem);
  Corpus back = ReadCorpus(stem);
  CHECK(back.utterances.empty());
  CHECK(back.vocab_words == empty.vocab_words);
}

TEST_CASE("corrupt corpus files are rejected") {
  GeneratorConfig cfg;
  cfg.seed = 91;
  GeneratedCorpora g = GenerateCorpus(cfg, 2, 0, 0);
  auto dir = TempDir();

  SUBCASE("missing files") {
    CHECK_THROWS_AS(ReadCorpus((dir / "no_such_stem").string()), IoError);
  }

  SUBCASE("bad header") {
    const std::string stem = (dir / "badheader").string();
    WriteCorpus(g.train, stem);
    std::ofstream meta(stem + ".jsonl", std::ios::binary);
    meta << "{\"something\": 2}\n";
    meta.close();
    CHECK_THROWS_AS(ReadCorpus(stem), IoError);
  }

  SUBCASE("metadata is not json") {
    const std::string stem = (dir / "notjson").string();
    WriteCorpus(g.train, stem);
    std::ofstream meta(stem + ".jsonl", std::ios::binary | std::ios::app);
    meta << "this is not a metadata line\n";
    meta.close();
    CHECK_THROWS_AS(ReadCorpus(stem), IoError);
  }

  SUBCASE("truncated features") {
    const std::string stem = (dir / "trunc").string();
    WriteCorpus(g.train, stem);
    auto bytes = SlurpFile(stem + ".twf");
    std::ofstream feat(stem + ".twf", std::ios::binary);
    feat.write(bytes.data(),
               static_cast<std::streamsize>(bytes.size() - 64));
    feat.close();
    CHECK_THROWS_AS(ReadCorpus(stem), IoError);
  }

  SUBCASE("trailing bytes after the last feature record") {
    const std::string stem = (dir / "trailing").string();
    WriteCorpus(g.train, stem);
    std::ofstream feat(stem + ".twf", std::ios::binary | std::ios::app);
    feat << "XX";
    feat.close();
    CHECK_THROWS_AS(ReadCorpus(stem), IoError);
  }

  SUBCASE("wrong magic") {
    const std::string stem = (dir / "magic").string();
    WriteCorpus(g.train, stem);
    auto bytes = SlurpFile(stem + ".twf");
    bytes[0] = 'Z';
    std::ofstream feat(stem + ".twf", std::ios::binary);
    feat.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    feat.close();
    CHECK_THROWS_AS(ReadCorpus(stem), IoError);
  }
}

TEST_CASE("generator config validation rejects bad ranges") {
  GeneratorConfig cfg;
  cfg.vocab_size = 10;
  CHECK_THROWS_AS(ValidateGeneratorConfig(cfg), ConfigError);

  cfg = GeneratorConfig();
  cfg.num_phonemes = 25;
  CHECK_THROWS_AS(ValidateGeneratorConfig(cfg), ConfigError);

  cfg = GeneratorConfig();
  cfg.lead_sil_hi = 0.2;  // would collide with the annotation minimum
  CHECK_THROWS_AS(ValidateGeneratorConfig(cfg), ConfigError);

  cfg = GeneratorConfig();
  cfg.rate_filled_pause = 1.5;
  CHECK_THROWS_AS(ValidateGeneratorConfig(cfg), ConfigError);

  cfg = GeneratorConfig();
  CHECK_NOTHROW(ValidateGeneratorConfig(cfg));
  CHECK_THROWS_AS(GenerateCorpus(cfg, -1, 0, 0), ConfigError);
}

TEST_CASE("turn kind names round trip") {
  CHECK(std::string(TurnKindName(TurnKind::kPause)) == "pause");
  CHECK(std::string(TurnKindName(TurnKind::kFinish)) == "finish");
  CHECK(TurnKindFromName("pause") == TurnKind::kPause);
  CHECK(TurnKindFromName("finish") == TurnKind::kFinish);
  CHECK_THROWS_AS(TurnKindFromName("maybe"), DataError);
}

}  // namespace
}  // namespace convturn
