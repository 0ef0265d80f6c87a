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

#ifndef CONVTURN_EVAL_EVAL_H_
#define CONVTURN_EVAL_EVAL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "convturn/corpus/corpus.h"
#include "convturn/turnmodels/infer.h"

namespace convturn {

// Word-level edit alignment plus the turn-event scoring built on it:
// recognition error rates, greedy event pairing with latency, aggregate
// precision/recall reports, and threshold sweeps over recorded posterior
// traces.

enum class EditOp { kMatch, kSubstitution, kInsertion, kDeletion };

// One alignment step. Insertions carry no reference index, deletions no
// hypothesis index. Time anchors are optional (-1 when unknown) and
// non-decreasing along the alignment when present.
struct AlignedOp {
  EditOp op = EditOp::kMatch;
  int hyp_index = -1;
  int ref_index = -1;
  double hyp_time = -1.0;
  double ref_time = -1.0;
};

struct TokenAlignment {
  std::vector<AlignedOp> ops;  // left to right over both sequences
};

struct EditCounts {
  int matches = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_len = 0;
  double Rate() const;  // (S+D+I)/N, N = ref_len
};

// Minimal-edit alignment by dynamic programming. Ties prefer the diagonal
// step, then consuming a reference token, so the alignment is deterministic.
TokenAlignment AlignTokens(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref);

// Same, with a time anchor per token on each side. Each time list must match
// its token list in length and be non-decreasing.
TokenAlignment AlignTokens(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref,
                           const std::vector<double>& hyp_times,
                           const std::vector<double>& ref_times);

EditCounts CountEdits(const TokenAlignment& alignment);

// Removes "<pause>" and "</s>" tokens.
std::vector<std::string> StripTurnTokens(const std::vector<std::string>& tokens);

// Word error rate after stripping turn tokens from both sides. A reference
// that is empty after stripping is refused.
double Wer(const std::vector<std::string>& hyp,
           const std::vector<std::string>& ref);

// Exhaustive edit-distance oracle for cross-checking AlignTokens. Refuses
// sequences longer than six tokens.
int BruteForceEditDistance(const std::vector<std::string>& hyp,
                           const std::vector<std::string>& ref);

// Event pairing. A prediction may fire up to `early_allowance` seconds
// before the true event time and up to `window` seconds after it.
struct PairingConfig {
  double window = 1.0;
  double early_allowance = 0.2;
};

void ValidatePairingConfig(const PairingConfig& config);

struct MatchedEvent {
  TurnDecision predicted;
  TurnEvent truth;
  double latency = 0.0;  // predicted time - true time
};

struct EventMatchResult {
  std::vector<MatchedEvent> matches;
  std::vector<TurnDecision> false_positives;
  std::vector<TurnEvent> false_negatives;
};

struct ClassCounts {
  int matches = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

ClassCounts CountsFor(const EventMatchResult& result, TurnKind kind);

// Greedy earliest-first matching: predictions in time order each take the
// nearest unmatched true event of the same kind within the pairing window.
// Each event on either side matches at most once, so per class
// matches + false negatives == true events and matches + false positives ==
// predictions. The output does not depend on the order of `predicted`.
//
// When the alignment carries time anchors on matched tokens, a prediction is
// additionally confined to the reference gap its hypothesis position aligns
// into; without usable anchors the time window alone decides.
EventMatchResult PairEvents(const TokenAlignment& alignment,
                            const std::vector<TurnDecision>& predicted,
                            const std::vector<TurnEvent>& truth,
                            const PairingConfig& config);

// Window-only pairing with no alignment scoping.
EventMatchResult PairEvents(const std::vector<TurnDecision>& predicted,
                            const std::vector<TurnEvent>& truth,
                            const PairingConfig& config);

// Nearest-rank percentile: the smallest element whose rank reaches
// ceil(q * n). `values` must be non-empty, q in (0, 1].
double NearestRankPercentile(std::vector<double> values, double q);

struct ClassMetrics {
  int matches = 0;
  int false_positives = 0;
  int false_negatives = 0;
  // Precision over zero predictions is reported as 1.0 and flagged; recall
  // over zero true events is likewise 1.0.
  bool zero_predictions = true;
  double precision = 1.0;
  double recall = 1.0;
  // Nearest-rank percentiles over matched latencies only; zero when nothing
  // matched.
  double latency_p50 = 0.0;
  double latency_p90 = 0.0;
};

struct PrPoint {
  TurnKind kind = TurnKind::kPause;
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  int matches = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

struct EvalReport {
  ClassMetrics pause;
  ClassMetrics finish;
  double wer = 0.0;
  std::vector<PrPoint> pr_points;
};

// Pools per-utterance match results into per-class precision, recall, and
// latency percentiles. Requires at least one result; `wer` and `pr_points`
// are left for the caller to fill.
EvalReport PrecisionRecallLatency(const std::vector<EventMatchResult>& results);

// Per-utterance posterior traces as recorded by StreamInfer.
struct TraceSet {
  std::vector<double> pause_trace;
  std::vector<double> finish_trace;
  std::vector<uint8_t> activity;
};

struct SweepConfig {
  std::vector<double> grid;  // non-empty, non-decreasing thresholds
  // The swept class takes each grid value while the other class holds its
  // base threshold, mirroring deployment where both detectors run.
  double base_pause_threshold = 0.5;
  double base_finish_threshold = 0.5;
  double frame_rate = 100.0;
  double debounce_sec = 0.2;
  PairingConfig pairing;
};

// Re-derives decisions from the stored traces at every grid threshold and
// scores them against the true events, one point per (class, threshold).
// Pause points come first in grid order, then finish points. No model is
// consulted, so sweeps are reproducible offline.
std::vector<PrPoint> PrSweep(const std::vector<TraceSet>& traces,
                             const std::vector<std::vector<TurnEvent>>& truth,
                             const SweepConfig& config);

// Trapezoidal area under the precision-recall points of one class, sorted by
// recall. Refuses an empty selection; a single point has zero area.
double PrAuc(const std::vector<PrPoint>& points, TurnKind kind);

// The point of one class maximizing F1; ties take the smaller threshold.
PrPoint MaxF1Point(const std::vector<PrPoint>& points, TurnKind kind);

// CSV with header "class,threshold,precision,recall,matches,fp,fn".
void WritePrCsv(const std::vector<PrPoint>& points, const std::string& path);

// JSON mirroring EvalReport, serialized to a string.
std::string EvalReportJson(const EvalReport& report);

}  // namespace convturn

#endif  // CONVTURN_EVAL_EVAL_H_
