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

#include <algorithm>

#include "sonarleaf/error.hpp"
#include "sonarleaf/parallel.hpp"

namespace sonarleaf {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kInput:
      return "input";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kNumerical:
      return "numerical";
    case ErrorCategory::kInternal:
      return "internal";
  }
  return "unknown";
}

namespace {
int g_threads = 1;
}

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_threads; }

}  // namespace sonarleaf
