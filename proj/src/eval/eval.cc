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

#include "convturn/eval/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "convturn/common/error.h"
#include "convturn/transducer/vocab.h"
#include "json.hpp"

namespace convturn {

namespace {

using nlohmann::json;

// Boundary tolerance for attributing an event time to a reference gap.
constexpr double kGapTol = 1e-6;

void CheckAnchors(const std::vector<std::string>& tokens,
                  const std::vector<double>& times, const char* side) {
  if (tokens.size() != times.size()) {
    throw DataError(std::string(side) +
                    " token and time lists differ in length");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) {
      throw DataError(std::string(side) +
                      " time anchors must be non-decreasing");
    }
  }
}

int BruteForceDistance(const std::vector<std::string>& hyp,
                       const std::vector<std::string>& ref, std::size_t i,
                       std::size_t j) {
  if (i == hyp.size()) return static_cast<int>(ref.size() - j);
  if (j == ref.size()) return static_cast<int>(hyp.size() - i);
  const int diag = BruteForceDistance(hyp, ref, i + 1, j + 1) +
                   (hyp[i] == ref[j] ? 0 : 1);
  const int skip_ref = BruteForceDistance(hyp, ref, i, j + 1) + 1;
  const int skip_hyp = BruteForceDistance(hyp, ref, i + 1, j) + 1;
  return std::min(diag, std::min(skip_ref, skip_hyp));
}

bool DecisionBefore(const TurnDecision& a, const TurnDecision& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) {
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  }
  if (a.frame != b.frame) return a.frame < b.frame;
  return a.posterior < b.posterior;
}

ClassMetrics MetricsFrom(const ClassCounts& counts,
                         std::vector<double> latencies) {
  ClassMetrics m;
  m.matches = counts.matches;
  m.false_positives = counts.false_positives;
  m.false_negatives = counts.false_negatives;
  const int predicted = counts.matches + counts.false_positives;
  m.zero_predictions = predicted == 0;
  m.precision =
      predicted == 0 ? 1.0 : static_cast<double>(counts.matches) / predicted;
  const int actual = counts.matches + counts.false_negatives;
  m.recall = actual == 0 ? 1.0 : static_cast<double>(counts.matches) / actual;
  if (!latencies.empty()) {
    m.latency_p50 = NearestRankPercentile(latencies, 0.5);
    m.latency_p90 = NearestRankPercentile(latencies, 0.9);
  }
  return m;
}

json ClassMetricsJson(const ClassMetrics& m) {
  return json{{"matches", m.matches},
              {"false_positives", m.false_positives},
              {"false_negatives", m.false_negatives},
              {"zero_predictions", m.zero_predictions},
              {"precision", m.precision},
              {"recall", m.recall},
              {"latency_p50", m.latency_p50},
              {"latency_p90", m.latency_p90}};
}

}  // namespace

double EditCounts::Rate() const {
  if (ref_len <= 0) throw DataError("edit rate over an empty reference");
  return static_cast<double>(substitutions + deletions + insertions) / ref_len;
}

TokenAlignment AlignTokens(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref) {
  const int h_len = static_cast<int>(hyp.size());
  const int r_len = static_cast<int>(ref.size());
  const int stride = r_len + 1;
  std::vector<int> dist((h_len + 1) * stride);
  for (int j = 0; j <= r_len; ++j) dist[j] = j;
  for (int i = 1; i <= h_len; ++i) dist[i * stride] = i;
  for (int i = 1; i <= h_len; ++i) {
    for (int j = 1; j <= r_len; ++j) {
      const int sub = hyp[i - 1] == ref[j - 1] ? 0 : 1;
      const int diag = dist[(i - 1) * stride + j - 1] + sub;
      const int del = dist[i * stride + j - 1] + 1;
      const int ins = dist[(i - 1) * stride + j] + 1;
      dist[i * stride + j] = std::min(diag, std::min(del, ins));
    }
  }
  TokenAlignment out;
  int i = h_len;
  int j = r_len;
  while (i > 0 || j > 0) {
    AlignedOp op;
    const int here = dist[i * stride + j];
    if (i > 0 && j > 0 &&
        here == dist[(i - 1) * stride + j - 1] +
                    (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
      op.op = hyp[i - 1] == ref[j - 1] ? EditOp::kMatch : EditOp::kSubstitution;
      op.hyp_index = --i;
      op.ref_index = --j;
    } else if (j > 0 && here == dist[i * stride + j - 1] + 1) {
      op.op = EditOp::kDeletion;
      op.ref_index = --j;
    } else {
      op.op = EditOp::kInsertion;
      op.hyp_index = --i;
    }
    out.ops.push_back(op);
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

TokenAlignment AlignTokens(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref,
                           const std::vector<double>& hyp_times,
                           const std::vector<double>& ref_times) {
  CheckAnchors(hyp, hyp_times, "hypothesis");
  CheckAnchors(ref, ref_times, "reference");
  TokenAlignment out = AlignTokens(hyp, ref);
  for (AlignedOp& op : out.ops) {
    if (op.hyp_index >= 0) op.hyp_time = hyp_times[op.hyp_index];
    if (op.ref_index >= 0) op.ref_time = ref_times[op.ref_index];
  }
  return out;
}

EditCounts CountEdits(const TokenAlignment& alignment) {
  EditCounts counts;
  for (const AlignedOp& op : alignment.ops) {
    switch (op.op) {
      case EditOp::kMatch:
        ++counts.matches;
        break;
      case EditOp::kSubstitution:
        ++counts.substitutions;
        break;
      case EditOp::kDeletion:
        ++counts.deletions;
        break;
      case EditOp::kInsertion:
        ++counts.insertions;
        break;
    }
    if (op.ref_index >= 0) ++counts.ref_len;
  }
  return counts;
}

std::vector<std::string> StripTurnTokens(
    const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    if (tok == Vocab::kPauseText || tok == Vocab::kFinishText) continue;
    out.push_back(tok);
  }
  return out;
}

double Wer(const std::vector<std::string>& hyp,
           const std::vector<std::string>& ref) {
  const std::vector<std::string> h = StripTurnTokens(hyp);
  const std::vector<std::string> r = StripTurnTokens(ref);
  if (r.empty()) throw DataError("reference transcript is empty");
  return CountEdits(AlignTokens(h, r)).Rate();
}

int BruteForceEditDistance(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref) {
  if (hyp.size() > 6 || ref.size() > 6) {
    throw ConfigError(
        "brute-force edit distance supports at most six tokens per side");
  }
  return BruteForceDistance(hyp, ref, 0, 0);
}

void ValidatePairingConfig(const PairingConfig& config) {
  if (!(config.window >= 0.0) || !std::isfinite(config.window)) {
    throw ConfigError("pairing window must be non-negative");
  }
  if (!(config.early_allowance >= 0.0) ||
      !std::isfinite(config.early_allowance)) {
    throw ConfigError("pairing early allowance must be non-negative");
  }
}

ClassCounts CountsFor(const EventMatchResult& result, TurnKind kind) {
  ClassCounts counts;
  for (const MatchedEvent& m : result.matches) {
    if (m.truth.kind == kind) ++counts.matches;
  }
  for (const TurnDecision& d : result.false_positives) {
    if (d.kind == kind) ++counts.false_positives;
  }
  for (const TurnEvent& e : result.false_negatives) {
    if (e.kind == kind) ++counts.false_negatives;
  }
  return counts;
}

EventMatchResult PairEvents(const TokenAlignment& alignment,
                            const std::vector<TurnDecision>& predicted,
                            const std::vector<TurnEvent>& truth,
                            const PairingConfig& config) {
  ValidatePairingConfig(config);
  // Matched tokens with anchors on both sides map hypothesis gaps onto
  // reference gaps; predictions between two such anchors may only take true
  // events inside the corresponding reference span.
  std::vector<std::pair<double, double>> anchors;  // (hyp_time, ref_time)
  for (const AlignedOp& op : alignment.ops) {
    if (op.op == EditOp::kMatch && op.hyp_time >= 0.0 && op.ref_time >= 0.0) {
      anchors.emplace_back(op.hyp_time, op.ref_time);
    }
  }
  std::vector<TurnDecision> preds = predicted;
  std::sort(preds.begin(), preds.end(), DecisionBefore);

  EventMatchResult out;
  std::vector<char> taken(truth.size(), 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const TurnDecision& p : preds) {
    double scope_lo = -kInf;
    double scope_hi = kInf;
    for (const auto& [hyp_time, ref_time] : anchors) {
      if (hyp_time <= p.time) {
        scope_lo = ref_time - kGapTol;
      } else {
        scope_hi = ref_time - kGapTol;
        break;
      }
    }
    int best = -1;
    double best_gap = kInf;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (taken[i] || truth[i].kind != p.kind) continue;
      const double t = truth[i].time;
      if (p.time < t - config.early_allowance) continue;
      if (p.time > t + config.window) continue;
      if (t < scope_lo || t >= scope_hi) continue;
      const double gap = std::fabs(p.time - t);
      if (best < 0 || gap < best_gap ||
          (gap == best_gap && truth[i].time < truth[best].time)) {
        best = static_cast<int>(i);
        best_gap = gap;
      }
    }
    if (best >= 0) {
      taken[best] = 1;
      out.matches.push_back({p, truth[best], p.time - truth[best].time});
    } else {
      out.false_positives.push_back(p);
    }
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!taken[i]) out.false_negatives.push_back(truth[i]);
  }
  return out;
}

EventMatchResult PairEvents(const std::vector<TurnDecision>& predicted,
                            const std::vector<TurnEvent>& truth,
                            const PairingConfig& config) {
  return PairEvents(TokenAlignment{}, predicted, truth, config);
}

double NearestRankPercentile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw ConfigError("percentile of an empty sample");
  }
  if (!(q > 0.0) || q > 1.0) {
    throw ConfigError("percentile rank must lie in (0, 1]");
  }
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  int rank = static_cast<int>(std::ceil(q * n));
  rank = std::max(1, std::min(rank, n));
  return values[rank - 1];
}

EvalReport PrecisionRecallLatency(
    const std::vector<EventMatchResult>& results) {
  if (results.empty()) {
    throw ConfigError("evaluation requires at least one utterance result");
  }
  EvalReport report;
  for (TurnKind kind : {TurnKind::kPause, TurnKind::kFinish}) {
    ClassCounts counts;
    std::vector<double> latencies;
    for (const EventMatchResult& r : results) {
      const ClassCounts c = CountsFor(r, kind);
      counts.matches += c.matches;
      counts.false_positives += c.false_positives;
      counts.false_negatives += c.false_negatives;
      for (const MatchedEvent& m : r.matches) {
        if (m.truth.kind == kind) latencies.push_back(m.latency);
      }
    }
    ClassMetrics& slot =
        kind == TurnKind::kPause ? report.pause : report.finish;
    slot = MetricsFrom(counts, std::move(latencies));
  }
  return report;
}

std::vector<PrPoint> PrSweep(const std::vector<TraceSet>& traces,
                             const std::vector<std::vector<TurnEvent>>& truth,
                             const SweepConfig& config) {
  if (config.grid.empty()) {
    throw ConfigError("threshold sweep grid is empty");
  }
  for (std::size_t i = 0; i < config.grid.size(); ++i) {
    const double t = config.grid[i];
    if (!(t >= 0.0) || t > 1.0) {
      throw ConfigError("sweep thresholds must lie in [0, 1]");
    }
    if (i > 0 && t < config.grid[i - 1]) {
      throw ConfigError("threshold grid must be non-decreasing");
    }
  }
  for (double base : {config.base_pause_threshold,
                      config.base_finish_threshold}) {
    if (!(base >= 0.0) || base > 1.0) {
      throw ConfigError("base thresholds must lie in [0, 1]");
    }
  }
  if (!(config.frame_rate > 0.0)) {
    throw ConfigError("frame rate must be positive");
  }
  if (!(config.debounce_sec >= 0.0)) {
    throw ConfigError("debounce must be non-negative");
  }
  ValidatePairingConfig(config.pairing);
  if (traces.size() != truth.size()) {
    throw DataError("trace and event lists differ in length");
  }

  std::vector<PrPoint> points;
  points.reserve(2 * config.grid.size());
  for (TurnKind kind : {TurnKind::kPause, TurnKind::kFinish}) {
    for (double threshold : config.grid) {
      const double pause_thr = kind == TurnKind::kPause
                                   ? threshold
                                   : config.base_pause_threshold;
      const double finish_thr = kind == TurnKind::kFinish
                                    ? threshold
                                    : config.base_finish_threshold;
      ClassCounts counts;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const std::vector<TurnDecision> decisions = ReplayDecisions(
            traces[i].pause_trace, traces[i].finish_trace,
            traces[i].activity, pause_thr, finish_thr, config.frame_rate,
            config.debounce_sec);
        const ClassCounts c =
            CountsFor(PairEvents(decisions, truth[i], config.pairing), kind);
        counts.matches += c.matches;
        counts.false_positives += c.false_positives;
        counts.false_negatives += c.false_negatives;
      }
      PrPoint point;
      point.kind = kind;
      point.threshold = threshold;
      point.matches = counts.matches;
      point.false_positives = counts.false_positives;
      point.false_negatives = counts.false_negatives;
      const int predicted = counts.matches + counts.false_positives;
      point.precision =
          predicted == 0 ? 1.0
                         : static_cast<double>(counts.matches) / predicted;
      const int actual = counts.matches + counts.false_negatives;
      point.recall =
          actual == 0 ? 1.0 : static_cast<double>(counts.matches) / actual;
      points.push_back(point);
    }
  }
  return points;
}

double PrAuc(const std::vector<PrPoint>& points, TurnKind kind) {
  std::vector<PrPoint> sel;
  for (const PrPoint& p : points) {
    if (p.kind == kind) sel.push_back(p);
  }
  if (sel.empty()) {
    throw ConfigError(std::string("no sweep points for class ") +
                      TurnKindName(kind));
  }
  std::sort(sel.begin(), sel.end(), [](const PrPoint& a, const PrPoint& b) {
    if (a.recall != b.recall) return a.recall < b.recall;
    if (a.precision != b.precision) return a.precision > b.precision;
    return a.threshold < b.threshold;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < sel.size(); ++i) {
    area += (sel[i].recall - sel[i - 1].recall) *
            (sel[i].precision + sel[i - 1].precision) * 0.5;
  }
  return area;
}

PrPoint MaxF1Point(const std::vector<PrPoint>& points, TurnKind kind) {
  const PrPoint* best = nullptr;
  double best_f1 = -1.0;
  for (const PrPoint& p : points) {
    if (p.kind != kind) continue;
    const double sum = p.precision + p.recall;
    const double f1 = sum > 0.0 ? 2.0 * p.precision * p.recall / sum : 0.0;
    if (best == nullptr || f1 > best_f1 ||
        (f1 == best_f1 && p.threshold < best->threshold)) {
      best = &p;
      best_f1 = f1;
    }
  }
  if (best == nullptr) {
    throw ConfigError(std::string("no sweep points for class ") +
                      TurnKindName(kind));
  }
  return *best;
}

void WritePrCsv(const std::vector<PrPoint>& points, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open PR curve file: " + path);
  os << "class,threshold,precision,recall,matches,fp,fn\n";
  char line[160];
  for (const PrPoint& p : points) {
    std::snprintf(line, sizeof(line), "%s,%.9g,%.9g,%.9g,%d,%d,%d\n",
                  TurnKindName(p.kind), p.threshold, p.precision, p.recall,
                  p.matches, p.false_positives, p.false_negatives);
    os << line;
  }
  if (!os) throw IoError("failed writing PR curve file: " + path);
}

std::string EvalReportJson(const EvalReport& report) {
  json j{{"pause", ClassMetricsJson(report.pause)},
         {"finish", ClassMetricsJson(report.finish)},
         {"wer", report.wer}};
  json points = json::array();
  for (const PrPoint& p : report.pr_points) {
    points.push_back(json{{"class", TurnKindName(p.kind)},
                          {"threshold", p.threshold},
                          {"precision", p.precision},
                          {"recall", p.recall},
                          {"matches", p.matches},
                          {"fp", p.false_positives},
                          {"fn", p.false_negatives}});
  }
  j["pr_points"] = std::move(points);
  return j.dump(2);
}

}  // namespace convturn
