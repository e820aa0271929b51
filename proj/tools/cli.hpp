// Copyright 2026 The sonarleaf Authors. All Rights Reserved.
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


#ifndef SONARLEAF_TOOLS_CLI_HPP
#define SONARLEAF_TOOLS_CLI_HPP

#include <ostream>

namespace sonarleaf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Entry point of the `sonarleaf` tool. Progress goes to `out`; failures are
/// reported on `err` as one line "error[<category>]: <message>".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sonarleaf::cli

#endif
