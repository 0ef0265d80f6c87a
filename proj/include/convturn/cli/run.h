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

#ifndef CONVTURN_CLI_RUN_H_
#define CONVTURN_CLI_RUN_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace convturn {
namespace cli {

// Entry point shared by the binary and in-process tests. Returns the process
// exit code: 0 on success, nonzero with an "E:<CODE>" diagnostic on err.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace cli
}  // namespace convturn

#endif  // CONVTURN_CLI_RUN_H_
