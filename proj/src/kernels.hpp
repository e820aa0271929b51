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


// Hot inner loops shared by the frontend and encoder. On x86-64 with GCC each
// entry point is compiled twice (baseline and AVX2/FMA) and dispatched once at
// load time, so results are reproducible on a given machine.

#pragma once

#include <cstddef>

namespace sonarleaf::kernels {

float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

// Returns sum(w * e) and sum(w2 * e) and adds g * w to ge.
void pool_window_backward(const float* w, const float* w2, const float* e,
                          float g, float* ge, std::size_t n, float* pooled,
                          float* weighted);
void pool_window_backward(const double* w, const double* w2, const double* e,
                          double g, double* ge, std::size_t n, double* pooled,
                          double* weighted);

// y += a * x
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);

}  // namespace sonarleaf::kernels
