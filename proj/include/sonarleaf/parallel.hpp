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

#ifndef SONARLEAF_PARALLEL_HPP
#define SONARLEAF_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <vector>

namespace sonarleaf {

/// Sets the worker count used by every batch-parallel loop. Results never
/// depend on this value: each task writes its own slot and reductions run in
/// index order afterwards.
void set_num_threads(int threads);
int num_threads();

/// Runs body(i) for i in [0, count) across the configured workers. The
/// exception from the lowest failing index is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const long n = static_cast<long>(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sonarleaf

#endif  // SONARLEAF_PARALLEL_HPP
