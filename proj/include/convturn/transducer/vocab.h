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

#ifndef CONVTURN_TRANSDUCER_VOCAB_H_
#define CONVTURN_TRANSDUCER_VOCAB_H_

#include <string>
#include <unordered_map>
#include <vector>

namespace convturn {

// Token id layout, fixed across the whole system:
//   0            blank
//   1..|V|       words
//   |V|+1        <pause>
//   |V|+2        </s>
// The base space is {blank, words}; the expanded space adds the two turn
// tokens. Label sequences never contain blank.
class Vocab {
 public:
  static constexpr int kBlankId = 0;
  static constexpr const char* kPauseText = "<pause>";
  static constexpr const char* kFinishText = "</s>";

  explicit Vocab(std::vector<std::string> words);

  int NumWords() const { return static_cast<int>(words_.size()); }
  int PauseId() const { return NumWords() + 1; }
  int FinishId() const { return NumWords() + 2; }
  // Distribution sizes including blank.
  int BaseSize() const { return NumWords() + 1; }
  int ExpandedSize() const { return NumWords() + 3; }

  bool IsWord(int id) const { return id >= 1 && id <= NumWords(); }
  bool IsTurnToken(int id) const {
    return id == PauseId() || id == FinishId();
  }

  const std::string& TokenText(int id) const;
  // Word lookup; returns 0 when absent (0 is blank, never a word).
  int WordId(const std::string& word) const;

  const std::vector<std::string>& Words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace convturn

#endif  // CONVTURN_TRANSDUCER_VOCAB_H_
