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

#include "convturn/transducer/vocab.h"

#include "convturn/common/error.h"

namespace convturn {

namespace {
const std::string kBlankText = "<blank>";
}

Vocab::Vocab(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::string& w = words_[i];
    if (w.empty() || w == kBlankText || w == kPauseText || w == kFinishText) {
      throw ConfigError("reserved or empty vocabulary entry '" + w + "'");
    }
    if (!index_.emplace(w, static_cast<int>(i) + 1).second) {
      throw ConfigError("duplicate vocabulary entry '" + w + "'");
    }
  }
}

const std::string& Vocab::TokenText(int id) const {
  static const std::string pause = kPauseText;
  static const std::string finish = kFinishText;
  if (id == kBlankId) return kBlankText;
  if (IsWord(id)) return words_[static_cast<std::size_t>(id - 1)];
  if (id == PauseId()) return pause;
  if (id == FinishId()) return finish;
  throw ConfigError("token id " + std::to_string(id) + " out of range");
}

int Vocab::WordId(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

}  // namespace convturn
