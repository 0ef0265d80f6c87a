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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "convturn/cli/run.h"
#include "convturn/corpus/corpus.h"
#include "convturn/transducer/decode.h"
#include "convturn/turnmodels/infer.h"
#include "convturn/turnmodels/model.h"
#include "json.hpp"

namespace convturn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int rc = -1;
  std::string out;
  std::string err;
};

CliResult RunCli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult result;
  result.rc = cli::Run(args, out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("convturn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  REQUIRE(os.good());
  os << text;
  REQUIRE(os.good());
}

std::string Slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json ReadJsonFile(const fs::path& path) { return json::parse(Slurp(path)); }

std::vector<json> ReadJsonl(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::vector<json> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) lines.push_back(json::parse(line));
  }
  return lines;
}

// Small enough to train in seconds, large enough to exercise every stage.
json TinyConfig(const std::string& out_dir) {
  return json{
      {"seed", 11},
      {"out_dir", out_dir},
      {"generator",
       {{"train_size", 6},
        {"dev_size", 2},
        {"eval_size", 2},
        {"vocab_size", 20},
        {"num_phonemes", 6},
        {"feature_dim", 8}}},
      {"model",
       {{"feature_dim", 8},
        {"encoder_raw_frames", 3},
        {"encoder_blocks", 2},
        {"encoder_block_size", 4},
        {"encoder_layers", 1},
        {"encoder_hidden", 16},
        {"encoder_dim", 12},
        {"pred_context", 3},
        {"pred_embed", 10},
        {"pred_hidden", 12},
        {"joint_hidden", 12}}},
      {"training", {{"epochs", 3}, {"fastemit_lambda", 0.0}}}};
}

// One corpus plus recognizer and dual-joint checkpoints, built through the
// CLI exactly once and reused read-only by the cases below. Each command
// gets its own out-dir so no manifest overwrites another.
struct SharedCli {
  fs::path root;
  fs::path cfg;
  fs::path gen;        // corpus splits + generate manifest
  fs::path ann_file;   // annotated training transcripts
  fs::path asr_dir;    // recognizer train manifest
  fs::path stage1;     // recognizer checkpoint stem
  fs::path dual;       // dual-joint checkpoint stem
};

const SharedCli& Shared() {
  static const SharedCli shared = [] {
    SharedCli s;
    s.root = FreshDir("shared");
    s.cfg = s.root / "cfg.json";
    s.gen = s.root / "gen";
    s.ann_file = s.root / "train_ann.jsonl";
    s.asr_dir = s.root / "train_asr";
    s.stage1 = s.root / "stage1";
    s.dual = s.root / "dual";
    WriteText(s.cfg, TinyConfig((s.root / "out").string()).dump());

    auto run = [](std::vector<std::string> args) {
      const CliResult r = RunCli(args);
      INFO(r.err);
      REQUIRE(r.rc == 0);
    };
    run({"generate", "--config", s.cfg.string(), "--out-dir",
         s.gen.string()});
    run({"annotate", "--config", s.cfg.string(), "--out-dir",
         (s.root / "ann").string(), "--corpus", (s.gen / "train").string(),
         "--out", s.ann_file.string()});
    run({"train", "--config", s.cfg.string(), "--out-dir",
         s.asr_dir.string(), "--stage", "asr", "--corpus",
         (s.gen / "train").string(), "--out", s.stage1.string()});
    run({"train", "--config", s.cfg.string(), "--out-dir",
         (s.root / "train_turn").string(), "--stage", "turn_joint",
         "--corpus", (s.gen / "train").string(), "--annotations",
         s.ann_file.string(), "--init", s.stage1.string(), "--out",
         s.dual.string(), "--epochs", "1"});
    return s;
  }();
  return shared;
}

TEST_CASE("bare invocation and help") {
  const CliResult bare = RunCli({});
  CHECK(bare.rc == 2);
  CHECK(bare.err == "E:CONFIG no subcommand given\n");
  CHECK(bare.out.empty());

  const CliResult help = RunCli({"generate", "--help"});
  CHECK(help.rc == 0);
  CHECK(help.out.find("--config") != std::string::npos);
  CHECK(help.err.empty());

  const CliResult bogus = RunCli({"frobnicate"});
  CHECK(bogus.rc == 2);
  CHECK(bogus.err.rfind("E:CONFIG", 0) == 0);
}

TEST_CASE("seeded generation reproduces bit-identically and echoes sizes") {
  const fs::path dir = FreshDir("gen_repro");
  const fs::path cfg = dir / "cfg.json";
  WriteText(cfg, TinyConfig((dir / "unused").string()).dump());

  const CliResult a = RunCli({"generate", "--config", cfg.string(),
                              "--out-dir", (dir / "a").string()});
  INFO(a.err);
  REQUIRE(a.rc == 0);
  CHECK(a.out.find("train=6 dev=2 eval=2") != std::string::npos);

  const CliResult b = RunCli({"generate", "--config", cfg.string(),
                              "--out-dir", (dir / "b").string()});
  REQUIRE(b.rc == 0);
  for (const char* name :
       {"train.jsonl", "train.twf", "dev.jsonl", "dev.twf", "eval.jsonl",
        "eval.twf"}) {
    CHECK(Slurp(dir / "a" / name) == Slurp(dir / "b" / name));
  }

  // A different seed must change the data.
  const CliResult c = RunCli({"generate", "--config", cfg.string(),
                              "--out-dir", (dir / "c").string(), "--seed",
                              "12"});
  REQUIRE(c.rc == 0);
  CHECK(Slurp(dir / "a" / "train.jsonl") != Slurp(dir / "c" / "train.jsonl"));

  const json manifest = ReadJsonFile(dir / "a" / "generate_manifest.json");
  CHECK(manifest.at("command") == "generate");
  CHECK(manifest.at("splits").at("train") == 6);
  CHECK(manifest.at("splits").at("dev") == 2);
  CHECK(manifest.at("splits").at("eval") == 2);
  CHECK(manifest.at("config").at("generator").at("train_size") == 6);
}

TEST_CASE("generation replays from its own manifest") {
  const SharedCli& s = Shared();
  const fs::path dir = FreshDir("gen_replay");
  const CliResult r =
      RunCli({"generate", "--config",
              (s.gen / "generate_manifest.json").string(), "--out-dir",
              dir.string()});
  INFO(r.err);
  REQUIRE(r.rc == 0);
  for (const char* name : {"train.jsonl", "train.twf", "eval.jsonl"}) {
    CHECK(Slurp(s.gen / name) == Slurp(dir / name));
  }
  // Replay resolves to the same configuration, so the hash is stable.
  const json first = ReadJsonFile(s.gen / "generate_manifest.json");
  const json second = ReadJsonFile(dir / "generate_manifest.json");
  CHECK(first.at("config_hash") == second.at("config_hash"));
}

TEST_CASE("flag overrides take precedence over the config file") {
  const fs::path dir = FreshDir("gen_flags");
  const fs::path cfg = dir / "cfg.json";
  WriteText(cfg, TinyConfig((dir / "out").string()).dump());
  const CliResult r = RunCli({"generate", "--config", cfg.string(),
                              "--out-dir", (dir / "out").string(),
                              "--train-size", "3", "--eval-size", "1"});
  INFO(r.err);
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("train=3") != std::string::npos);
  const json manifest = ReadJsonFile(dir / "out" / "generate_manifest.json");
  CHECK(manifest.at("splits").at("train") == 3);
  CHECK(manifest.at("splits").at("eval") == 1);
  CHECK(ReadCorpus((dir / "out" / "train").string()).utterances.size() == 3);
}

TEST_CASE("malformed configuration is rejected with the offending key") {
  const fs::path dir = FreshDir("bad_cfg");

  SUBCASE("unknown nested key") {
    WriteText(dir / "c.json", R"({"generator": {"train_sizes": 5}})");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("unknown config key: generator.train_sizes") !=
          std::string::npos);
  }
  SUBCASE("unknown top-level key") {
    WriteText(dir / "c.json", R"({"generater": {}})");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("unknown config key: generater") != std::string::npos);
  }
  SUBCASE("wrong type") {
    WriteText(dir / "c.json", R"({"seed": "eleven"})");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("config key seed") != std::string::npos);
  }
  SUBCASE("integer key given a float") {
    WriteText(dir / "c.json", R"({"generator": {"train_size": 2.5}})");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("generator.train_size") != std::string::npos);
  }
  SUBCASE("threads floor") {
    WriteText(dir / "c.json", R"({"threads": 0})");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("threads") != std::string::npos);
  }
  SUBCASE("unparseable json") {
    WriteText(dir / "c.json", "{nope");
    const CliResult r =
        RunCli({"generate", "--config", (dir / "c.json").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("config parse error") != std::string::npos);
  }
  SUBCASE("missing file") {
    const CliResult r =
        RunCli({"generate", "--config", (dir / "absent.json").string()});
    CHECK(r.rc == 4);
    CHECK(r.err.rfind("E:IO", 0) == 0);
  }
}

TEST_CASE("annotation without disfluencies emits finishes only") {
  const fs::path dir = FreshDir("ann_clean");
  json cfg = TinyConfig((dir / "out").string());
  cfg["generator"]["train_size"] = 10;
  cfg["generator"]["dev_size"] = 0;
  cfg["generator"]["eval_size"] = 0;
  cfg["generator"]["rate_random_pause"] = 0.0;
  cfg["generator"]["rate_filled_pause"] = 0.0;
  cfg["generator"]["rate_lengthening"] = 0.0;
  cfg["generator"]["rate_repetition"] = 0.0;
  WriteText(dir / "cfg.json", cfg.dump());

  REQUIRE(RunCli({"generate", "--config", (dir / "cfg.json").string(),
                  "--out-dir", (dir / "out").string()})
              .rc == 0);
  const CliResult ann =
      RunCli({"annotate", "--config", (dir / "cfg.json").string(),
              "--out-dir", (dir / "out").string(), "--corpus",
              (dir / "out" / "train").string(), "--out",
              (dir / "out" / "ann.jsonl").string()});
  INFO(ann.err);
  REQUIRE(ann.rc == 0);

  // Utterances hold several spoken queries, each closed by a long silence,
  // so with every disfluency source off the only insertions are finishes.
  const json counts =
      ReadJsonFile(dir / "out" / "annotate_manifest.json").at("counts");
  CHECK(counts.at("finish").get<int>() >= 10);
  CHECK(counts.at("pause") == 0);
  CHECK(counts.at("relabel_lengthened") == 0);
  CHECK(counts.at("relabel_filler") == 0);
  CHECK(counts.at("relabel_disfluency") == 0);

  std::size_t inserted = 0;
  for (const json& line : ReadJsonl(dir / "out" / "ann.jsonl")) {
    REQUIRE(line.at("inserted").size() >= 1);
    for (const json& tok : line.at("inserted")) {
      CHECK(tok.at("token") == "</s>");
    }
    inserted += line.at("inserted").size();
  }
  CHECK(counts.at("finish").get<std::size_t>() == inserted);
}

TEST_CASE("annotation counts sum to the inserted tokens") {
  const SharedCli& s = Shared();
  const json counts =
      ReadJsonFile(s.root / "ann" / "annotate_manifest.json").at("counts");
  std::size_t inserted = 0;
  std::size_t pauses = 0;
  for (const json& line : ReadJsonl(s.ann_file)) {
    inserted += line.at("inserted").size();
    for (const json& tok : line.at("inserted")) {
      if (tok.at("token") == "<pause>") ++pauses;
    }
  }
  CHECK(counts.at("finish").get<std::size_t>() +
            counts.at("pause").get<std::size_t>() ==
        inserted);
  CHECK(counts.at("pause").get<std::size_t>() == pauses);
}

TEST_CASE("train stages validate their prerequisites") {
  const SharedCli& s = Shared();
  const fs::path dir = FreshDir("train_errs");

  SUBCASE("turn joint needs a recognizer checkpoint") {
    const CliResult r =
        RunCli({"train", "--config", s.cfg.string(), "--out-dir",
                dir.string(), "--stage", "turn_joint", "--corpus",
                (s.gen / "train").string(), "--annotations",
                s.ann_file.string(), "--out", (dir / "x").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("--stage asr") != std::string::npos);
  }
  SUBCASE("head stages need annotations") {
    const CliResult r =
        RunCli({"train", "--config", s.cfg.string(), "--out-dir",
                dir.string(), "--stage", "acoustic", "--corpus",
                (s.gen / "train").string(), "--init", s.stage1.string(),
                "--out", (dir / "x").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("--annotations") != std::string::npos);
  }
  SUBCASE("unknown stage") {
    const CliResult r = RunCli({"train", "--config", s.cfg.string(),
                                "--out-dir", dir.string(), "--stage",
                                "decoder", "--corpus",
                                (s.gen / "train").string(), "--out",
                                (dir / "x").string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("unknown train stage") != std::string::npos);
  }
}

TEST_CASE("epoch losses fall during recognizer training") {
  const SharedCli& s = Shared();
  const json manifest = ReadJsonFile(s.asr_dir / "train_manifest.json");
  CHECK(manifest.at("stage") == "asr");
  const std::vector<double> losses =
      manifest.at("epoch_mean_loss").get<std::vector<double>>();
  REQUIRE(losses.size() == 3);
  CHECK(losses.front() > losses.back());
  CHECK(manifest.at("final_loss").get<double>() == losses.back());
  CHECK(manifest.at("steps").get<int>() == 3 * 6);
}

TEST_CASE("turn joint training leaves recognizer decoding unchanged") {
  const SharedCli& s = Shared();
  const TurnTakingModel before = LoadModel(s.stage1.string());
  const TurnTakingModel after = LoadModel(s.dual.string());
  const Corpus eval_corpus = ReadCorpus((s.gen / "eval").string());
  REQUIRE(!eval_corpus.utterances.empty());
  for (const Utterance& utt : eval_corpus.utterances) {
    ModelJointScorer sb(before, utt.features);
    ModelJointScorer sa(after, utt.features);
    const std::vector<Hypothesis> hb = BeamSearchDecode(&sb, 4, 3);
    const std::vector<Hypothesis> ha = BeamSearchDecode(&sa, 4, 3);
    REQUIRE(hb.size() == ha.size());
    for (std::size_t i = 0; i < hb.size(); ++i) {
      CHECK(hb[i].tokens == ha[i].tokens);
      CHECK(hb[i].score == ha[i].score);
    }
  }
}

TEST_CASE("inference writes one decision record per utterance") {
  const SharedCli& s = Shared();
  const fs::path dir = FreshDir("infer_out");
  const CliResult r =
      RunCli({"infer", "--config", s.cfg.string(), "--out-dir", dir.string(),
              "--model", s.dual.string(), "--corpus",
              (s.gen / "eval").string(), "--variant", "dual_joint", "--out",
              (dir / "decisions.jsonl").string()});
  INFO(r.err);
  REQUIRE(r.rc == 0);
  const std::vector<json> lines = ReadJsonl(dir / "decisions.jsonl");
  const Corpus eval_corpus = ReadCorpus((s.gen / "eval").string());
  REQUIRE(lines.size() == eval_corpus.utterances.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    CHECK(lines[i].at("utt_id") == eval_corpus.utterances[i].id);
    for (const json& tok : lines[i].at("hypothesis")) {
      CHECK(tok.is_string());
    }
    for (const json& d : lines[i].at("decisions")) {
      const std::string kind = d.at("kind").get<std::string>();
      CHECK((kind == "pause" || kind == "finish"));
      CHECK(d.at("time").get<double>() > 0.0);
    }
  }

  SUBCASE("unknown variant is a configuration error") {
    const CliResult bad =
        RunCli({"infer", "--config", s.cfg.string(), "--out-dir",
                dir.string(), "--model", s.dual.string(), "--corpus",
                (s.gen / "eval").string(), "--variant", "oracle", "--out",
                (dir / "d2.jsonl").string()});
    CHECK(bad.rc == 2);
    CHECK(bad.err.find("unknown variant") != std::string::npos);
  }
  SUBCASE("missing model is an io error") {
    const CliResult bad =
        RunCli({"infer", "--config", s.cfg.string(), "--out-dir",
                dir.string(), "--model", (dir / "nope").string(), "--corpus",
                (s.gen / "eval").string(), "--variant", "dual_joint", "--out",
                (dir / "d3.jsonl").string()});
    CHECK(bad.rc == 4);
    CHECK(bad.err.rfind("E:IO", 0) == 0);
  }
}

TEST_CASE("evaluation writes a parseable report and a full sweep grid") {
  const SharedCli& s = Shared();
  const fs::path dir = FreshDir("eval_out");
  const CliResult r =
      RunCli({"evaluate", "--config", s.cfg.string(), "--out-dir",
              dir.string(), "--model", s.dual.string(), "--corpus",
              (s.gen / "eval").string(), "--variant", "dual_joint",
              "--sweep"});
  INFO(r.err);
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("wer=") != std::string::npos);

  const json report = ReadJsonFile(dir / "report.json");
  CHECK(report.at("wer").get<double>() >= 0.0);
  for (const char* cls : {"pause", "finish"}) {
    const json& m = report.at(cls);
    CHECK(m.at("precision").get<double>() >= 0.0);
    CHECK(m.at("recall").get<double>() <= 1.0);
    CHECK(m.contains("latency_p50"));
  }
  // Default grid is 21 thresholds, swept once per class.
  REQUIRE(report.at("pr_points").size() == 42);

  std::ifstream csv(dir / "pr.csv");
  REQUIRE(csv.good());
  std::string line;
  std::size_t rows = 0;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "class,threshold,precision,recall,matches,fp,fn");
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 42);

  const json manifest = ReadJsonFile(dir / "evaluate_manifest.json");
  CHECK(manifest.at("variant") == "dual_joint");
  CHECK(manifest.at("sweep") == true);
}

}  // namespace
}  // namespace convturn
