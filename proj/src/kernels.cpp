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


#include "kernels.hpp"

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && \
    !defined(SONARLEAF_NO_CLONES)
#define SONARLEAF_CLONES \
  __attribute__((target_clones("arch=haswell", "default"), flatten))
#else
#define SONARLEAF_CLONES
#endif

namespace sonarleaf::kernels {
namespace {

template <typename T>
inline T dot_impl(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
inline void pool_backward_impl(const T* w, const T* w2, const T* e, T g, T* ge,
                               std::size_t n, T* pooled, T* weighted) {
  T p = T(0);
  T q = T(0);
#pragma omp simd reduction(+ : p, q)
  for (std::size_t i = 0; i < n; ++i) {
    p += w[i] * e[i];
    q += w2[i] * e[i];
    ge[i] += g * w[i];
  }
  *pooled = p;
  *weighted = q;
}

template <typename T>
inline void axpy_impl(T a, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

SONARLEAF_CLONES float dot(const float* a, const float* b, std::size_t n) {
  return dot_impl(a, b, n);
}
SONARLEAF_CLONES double dot(const double* a, const double* b, std::size_t n) {
  return dot_impl(a, b, n);
}

SONARLEAF_CLONES void pool_window_backward(const float* w, const float* w2,
                                           const float* e, float g, float* ge,
                                           std::size_t n, float* pooled,
                                           float* weighted) {
  pool_backward_impl(w, w2, e, g, ge, n, pooled, weighted);
}
SONARLEAF_CLONES void pool_window_backward(const double* w, const double* w2,
                                           const double* e, double g,
                                           double* ge, std::size_t n,
                                           double* pooled, double* weighted) {
  pool_backward_impl(w, w2, e, g, ge, n, pooled, weighted);
}

SONARLEAF_CLONES void axpy(float a, const float* x, float* y, std::size_t n) {
  axpy_impl(a, x, y, n);
}
SONARLEAF_CLONES void axpy(double a, const double* x, double* y, std::size_t n) {
  axpy_impl(a, x, y, n);
}

}  // namespace sonarleaf::kernels
