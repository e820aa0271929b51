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

#include "sonarleaf/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "sonarleaf/error.hpp"

namespace sonarleaf {

void* fft_aligned_alloc(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (p == nullptr) throw std::bad_alloc();
  return p;
}

void fft_aligned_free(void* ptr) noexcept { fftw_free(ptr); }

std::size_t good_fft_size(std::size_t min_size) {
  // FFTW is noticeably slower on 7-smooth or odd-heavy lengths.
  const std::size_t target = std::max<std::size_t>(min_size, 1);
  std::size_t best = 32;
  while (best < target) best *= 2;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
      std::size_t n = p3 * 32;
      while (n < target) n *= 2;
      best = std::min(best, n);
    }
  }
  return best;
}

namespace {

// Planner calls are not thread-safe in FFTW; execution on new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <typename T>
struct PlanTraits;

template <>
struct PlanTraits<double> {
  static void* make(std::size_t n, int sign) {
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                      FFTW_ESTIMATE);
    fftw_free(buf);
    return plan;
  }
  static void run(void* plan, std::complex<double>* data) {
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(static_cast<fftw_plan>(plan), p, p);
  }
};

template <>
struct PlanTraits<float> {
  static void* make(std::size_t n, int sign) {
    auto* buf =
        static_cast<fftwf_complex*>(fftwf_malloc(sizeof(fftwf_complex) * n));
    fftwf_plan plan = fftwf_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                        FFTW_ESTIMATE);
    fftwf_free(buf);
    return plan;
  }
  static void run(void* plan, std::complex<float>* data) {
    auto* p = reinterpret_cast<fftwf_complex*>(data);
    fftwf_execute_dft(static_cast<fftwf_plan>(plan), p, p);
  }
};

template <typename T>
void* cached_plan(std::size_t n, int sign) {
  static std::map<std::pair<std::size_t, int>, void*> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  void* plan = PlanTraits<T>::make(n, sign);
  if (plan == nullptr) throw InternalError("FFTW failed to create a plan");
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

template <typename T>
Fft<T>::Fft(std::size_t n)
    : n_(n),
      forward_plan_(cached_plan<T>(n, FFTW_FORWARD)),
      inverse_plan_(cached_plan<T>(n, FFTW_BACKWARD)) {}

template <typename T>
void Fft<T>::forward(ComplexBuffer<T>& data) const {
  if (data.size() != n_) throw InternalError("FFT buffer length mismatch");
  PlanTraits<T>::run(forward_plan_, data.data());
}

template <typename T>
void Fft<T>::inverse(ComplexBuffer<T>& data) const {
  if (data.size() != n_) throw InternalError("FFT buffer length mismatch");
  PlanTraits<T>::run(inverse_plan_, data.data());
}

template class Fft<float>;
template class Fft<double>;

}  // namespace sonarleaf
