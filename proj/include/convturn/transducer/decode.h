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

#ifndef CONVTURN_TRANSDUCER_DECODE_H_
#define CONVTURN_TRANSDUCER_DECODE_H_

#include <vector>

namespace convturn {

struct Hypothesis {
  std::vector<int> tokens;  // emitted label ids, blank-free
  double score = 0.0;       // sum of the chosen per-step log-probs
  std::vector<int> frames;  // emission frame per token, non-decreasing
};

// Scoring interface the decoders drive. LogProbs returns the joint
// distribution at one frame given an emitted prefix; index 0 is blank.
// The vector may be longer than 1 + NumEmittable when the underlying joint
// covers an expanded output space; the decoders only ever take ids
// 1..NumEmittable, so turn tokens never appear in decoded hypotheses.
class JointScorer {
 public:
  virtual ~JointScorer() = default;
  virtual int NumFrames() = 0;
  virtual int NumEmittable() = 0;
  virtual std::vector<double> LogProbs(int frame,
                                       const std::vector<int>& prefix) = 0;
};

// Frame-synchronous argmax decoding with at most max_expansions non-blank
// emissions per frame.
Hypothesis GreedyDecode(JointScorer* scorer, int max_expansions = 3);

// Frame-synchronous beam search with the same expansion cap. Hypotheses with
// identical token sequences are merged keeping the best path score. Returns
// up to beam_size results ordered by score, ties broken toward the
// lexicographically smaller token sequence. beam_size=1 reduces exactly to
// GreedyDecode.
std::vector<Hypothesis> BeamSearchDecode(JointScorer* scorer, int beam_size,
                                         int max_expansions = 3);

// The same search advanced one frame at a time. After Step(t), Best() equals
// the top hypothesis BeamSearchDecode would report on the input truncated to
// frames 0..t, so downstream consumers see a strictly causal decode.
class StreamingDecoder {
 public:
  StreamingDecoder(JointScorer* scorer, int beam_size, int max_expansions = 3);

  // Frames must be fed in order, starting at 0.
  void Step(int frame);
  const Hypothesis& Best() const { return best_; }
  // Merged ranked hypotheses, identical to the batch search's result.
  std::vector<Hypothesis> Ranked() const;

 private:
  struct Entry {
    Hypothesis hyp;
    bool closed = false;
  };

  JointScorer* scorer_;
  int max_expansions_;
  int next_frame_ = 0;
  std::vector<std::vector<Entry>> passes_;  // one beam per width 1..k
  Hypothesis best_;

  friend std::vector<Hypothesis> BeamSearchDecode(JointScorer*, int, int);
};

}  // namespace convturn

#endif  // CONVTURN_TRANSDUCER_DECODE_H_
