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

#include "convturn/transducer/decode.h"

#include <algorithm>
#include <map>

#include "convturn/common/error.h"

namespace convturn {

namespace {

// Entries mid-frame: open ones may still emit at the current frame, closed
// ones already took this frame's blank.
template <typename Entry>
bool EntryLess(const Entry& x, const Entry& y) {
  if (x.hyp.score != y.hyp.score) return x.hyp.score > y.hyp.score;
  if (x.hyp.tokens != y.hyp.tokens) return x.hyp.tokens < y.hyp.tokens;
  return x.closed && !y.closed;
}

// Merge same-phase duplicates keeping the best path, then keep the top
// `width` entries.
template <typename Entry>
void Prune(std::vector<Entry>* entries, int width) {
  std::sort(entries->begin(), entries->end(), EntryLess<Entry>);
  std::vector<Entry> kept;
  for (Entry& e : *entries) {
    bool dup = false;
    for (const Entry& k : kept) {
      if (k.closed == e.closed && k.hyp.tokens == e.hyp.tokens) {
        dup = true;  // sorted order means the kept one scores at least as high
        break;
      }
    }
    if (!dup) {
      kept.push_back(std::move(e));
      if (static_cast<int>(kept.size()) == width) break;
    }
  }
  *entries = std::move(kept);
}

// Advance one fixed-width beam through frame t. Every entry is closed on
// return: the final round admits only blank successors.
template <typename Entry>
void AdvanceFrame(JointScorer* scorer, int t, int width, int max_expansions,
                  std::vector<Entry>* beam) {
  const int emittable = scorer->NumEmittable();
  for (Entry& e : *beam) e.closed = false;
  for (int round = 0; round <= max_expansions; ++round) {
    std::vector<Entry> next;
    bool any_open = false;
    for (Entry& e : *beam) {
      if (e.closed) {
        next.push_back(std::move(e));
        continue;
      }
      any_open = true;
      const std::vector<double> lp = scorer->LogProbs(t, e.hyp.tokens);
      Entry blank;
      blank.hyp = e.hyp;
      blank.hyp.score += lp[0];
      blank.closed = true;
      next.push_back(std::move(blank));
      if (round < max_expansions) {
        for (int j = 1; j <= emittable; ++j) {
          Entry label;
          label.hyp = e.hyp;
          label.hyp.score += lp[static_cast<std::size_t>(j)];
          label.hyp.tokens.push_back(j);
          label.hyp.frames.push_back(t);
          next.push_back(std::move(label));
        }
      }
    }
    Prune(&next, width);
    *beam = std::move(next);
    if (!any_open) break;
  }
}

}  // namespace

StreamingDecoder::StreamingDecoder(JointScorer* scorer, int beam_size,
                                   int max_expansions)
    : scorer_(scorer), max_expansions_(max_expansions) {
  if (beam_size < 1) throw ConfigError("beam size must be positive");
  if (max_expansions < 1) throw ConfigError("expansion cap must be positive");
  // Widening sweep: a single width-k pass can lose a narrower pass's winner
  // to mid-frame displacement, which would make the top score non-monotone
  // in beam_size. Running every width and max-merging makes widening strictly
  // accumulate candidates. Total cost stays within ~(k+1)/2 of one pass.
  passes_.resize(static_cast<std::size_t>(beam_size));
  for (auto& beam : passes_) beam.resize(1);
}

void StreamingDecoder::Step(int frame) {
  if (frame != next_frame_) throw ConfigError("frames must be fed in order");
  if (frame >= scorer_->NumFrames()) throw ConfigError("frame out of range");
  ++next_frame_;
  for (std::size_t i = 0; i < passes_.size(); ++i) {
    AdvanceFrame(scorer_, frame, static_cast<int>(i) + 1, max_expansions_,
                 &passes_[i]);
  }
  const Hypothesis* top = nullptr;
  for (const auto& beam : passes_) {
    for (const Entry& e : beam) {
      if (top == nullptr || e.hyp.score > top->score ||
          (e.hyp.score == top->score && e.hyp.tokens < top->tokens)) {
        top = &e.hyp;
      }
    }
  }
  best_ = *top;
}

std::vector<Hypothesis> StreamingDecoder::Ranked() const {
  std::map<std::vector<int>, Hypothesis> merged;
  for (const auto& beam : passes_) {
    for (const Entry& e : beam) {
      auto it = merged.find(e.hyp.tokens);
      if (it == merged.end()) {
        merged.emplace(e.hyp.tokens, e.hyp);
      } else if (e.hyp.score > it->second.score) {
        it->second = e.hyp;
      }
    }
  }
  std::vector<Hypothesis> out;
  out.reserve(merged.size());
  for (auto& [tokens, hyp] : merged) out.push_back(std::move(hyp));
  std::sort(out.begin(), out.end(),
            [](const Hypothesis& x, const Hypothesis& y) {
              if (x.score != y.score) return x.score > y.score;
              return x.tokens < y.tokens;
            });
  if (out.size() > passes_.size()) out.resize(passes_.size());
  return out;
}

std::vector<Hypothesis> BeamSearchDecode(JointScorer* scorer, int beam_size,
                                         int max_expansions) {
  StreamingDecoder decoder(scorer, beam_size, max_expansions);
  for (int t = 0; t < scorer->NumFrames(); ++t) decoder.Step(t);
  return decoder.Ranked();
}

Hypothesis GreedyDecode(JointScorer* scorer, int max_expansions) {
  const int t_len = scorer->NumFrames();
  const int emittable = scorer->NumEmittable();
  Hypothesis hyp;
  for (int t = 0; t < t_len; ++t) {
    for (int round = 0; round <= max_expansions; ++round) {
      const std::vector<double> lp = scorer->LogProbs(t, hyp.tokens);
      int best = 0;
      if (round < max_expansions) {
        for (int j = 1; j <= emittable; ++j) {
          if (lp[static_cast<std::size_t>(j)] > lp[static_cast<std::size_t>(best)]) {
            best = j;
          }
        }
      }
      hyp.score += lp[static_cast<std::size_t>(best)];
      if (best == 0) break;
      hyp.tokens.push_back(best);
      hyp.frames.push_back(t);
    }
  }
  return hyp;
}

}  // namespace convturn
