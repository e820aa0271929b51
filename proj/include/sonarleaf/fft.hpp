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

#ifndef SONARLEAF_FFT_HPP
#define SONARLEAF_FFT_HPP

#include <complex>
#include <cstddef>
#include <new>
#include <vector>

namespace sonarleaf {

void* fft_aligned_alloc(std::size_t bytes);
void fft_aligned_free(void* ptr) noexcept;

/// Allocator returning SIMD-aligned storage so every buffer matches the
/// alignment the cached FFTW plans were created with.
template <typename T>
struct FftAllocator {
  using value_type = T;
  FftAllocator() = default;
  template <typename U>
  FftAllocator(const FftAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(fft_aligned_alloc(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t) noexcept { fft_aligned_free(p); }
  template <typename U>
  bool operator==(const FftAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using ComplexBuffer = std::vector<std::complex<T>, FftAllocator<std::complex<T>>>;

/// Smallest n >= min_size of the form 2^a 3^b 5^c with a >= 5.
std::size_t good_fft_size(std::size_t min_size);

/// In-place complex DFT of a fixed length. Plans are created once per length
/// with FFTW_ESTIMATE (deterministic plan choice) and shared between threads.
template <typename T>
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  /// X[f] = sum_t x[t] exp(-2 pi i f t / n)
  void forward(ComplexBuffer<T>& data) const;
  /// Unnormalized inverse: x[t] = sum_f X[f] exp(+2 pi i f t / n)
  void inverse(ComplexBuffer<T>& data) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

extern template class Fft<float>;
extern template class Fft<double>;

}  // namespace sonarleaf

#endif  // SONARLEAF_FFT_HPP
