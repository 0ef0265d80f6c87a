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

#ifndef CONVTURN_NN_CHECKPOINT_H_
#define CONVTURN_NN_CHECKPOINT_H_

#include <string>

#include "convturn/nn/param_store.h"

namespace convturn {

// Checkpoint file layout:
//   u32 little-endian header length
//   UTF-8 JSON header {"format_version":1,"params":[{"name":..,"shape":[..]}]}
//   one float32 little-endian payload per parameter, in header order
// Values are stored as float32 regardless of the in-memory Real type.

template <typename Real>
void SaveCheckpoint(const ParamStore<Real>& store, const std::string& path);

// Loads into an existing store. Every parameter in the store must appear in
// the file with a matching shape and vice versa; mismatch raises IoError.
template <typename Real>
void LoadCheckpoint(ParamStore<Real>* store, const std::string& path);

// Reads just the parameter names from a checkpoint header.
std::vector<std::string> CheckpointParamNames(const std::string& path);

}  // namespace convturn

#endif  // CONVTURN_NN_CHECKPOINT_H_
