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

#ifndef SONARLEAF_FRONTEND_HPP
#define SONARLEAF_FRONTEND_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sonarleaf/fft.hpp"
#include "sonarleaf/tensor.hpp"

namespace sonarleaf {

// Learnable Gabor filterbank frontend: complex Gabor convolution, squared
// modulus, per-channel Gaussian pooling, per-channel log compression and a
// temporal batch norm. Every stage has an analytic backward pass.

enum class Stage { kEnergy, kPooled, kCompressed, kNormalized };
enum class Mode { kTrain, kEval };

template <typename T>
struct TimeFreqMap {
  Matrix<T> values;  // channels x frames
  Stage stage = Stage::kEnergy;

  std::size_t channels() const { return values.rows; }
  std::size_t frames() const { return values.cols; }
  std::size_t size() const { return values.size(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

struct FilterbankConfig {
  int num_filters = 32;
  int sample_rate = 16000;
  double f_min = 60.0;
  double f_max = 8000.0;
  int kernel_width = 401;
  double hop_ms = 10.0;
  double window_ms = 25.0;
  double window_span = 4.0;
  double sigma_min = 1.5;
  // Initial a in log(1 + 10^a x). Pooled energies of quiet recordings sit
  // around 1e-7..1e-3; at a = 0 the log is linear there and carries no contrast.
  double log_gain_init = 7.0;
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename T>
struct GaborFilterParams {
  std::vector<T> mu;     // radians / sample
  std::vector<T> sigma;  // envelope std, samples
  int kernel_width = 401;
  double sigma_min = 1.5;

  double sigma_max() const { return kernel_width / 2.0; }
};

template <typename T>
struct PoolingParams {
  std::vector<T> rho;  // Gaussian window std, samples
  int hop = 160;
  double window_span = 4.0;
  double rho_min = 1.0;
};

template <typename T>
struct CompressionParams {
  std::vector<T> log_gain;  // y = log(1 + 10^a x)
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double eps = 1e-5;
  double momentum = 0.1;
  std::int64_t tracked_batches = 0;
};

template <typename T>
struct FrontendParams {
  int sample_rate = 16000;
  GaborFilterParams<T> gabor;
  PoolingParams<T> pooling;
  CompressionParams<T> compression;

  std::size_t num_filters() const { return gabor.mu.size(); }
  double mu_min() const;
  double mu_max() const;
  double center_hz(std::size_t k) const;
};

template <typename T>
FrontendParams<T> init_filterbank(const FilterbankConfig& config);

template <typename T>
FrontendParams<T> init_filterbank(int num_filters, int sample_rate,
                                  double f_min, double f_max);

/// Projects mu, sigma and rho back into their legal ranges.
template <typename T>
void clamp_frontend(FrontendParams<T>& params);

/// g[m] = exp(-m^2 / (2 sigma^2)) exp(i mu m) / (sqrt(2 pi) sigma), for
/// m in [-(W-1)/2, (W-1)/2]; element 0 of the result is m = -(W-1)/2.
template <typename T>
std::vector<std::complex<T>> gabor_kernel(T mu, T sigma, int width);

std::size_t reflect_index(long i, std::size_t n);

/// Per-clip forward intermediates kept for the backward pass.
template <typename T>
struct GaborClipCache {
  ComplexBuffer<T> padded_spectrum;
  std::vector<std::complex<T>> response;  // K x n analytic output, row-major
  std::size_t n_samples = 0;

  std::span<const std::complex<T>> row(std::size_t k) const {
    return {response.data() + k * n_samples, n_samples};
  }
};

template <typename T>
struct GaborGrads {
  std::vector<T> mu;
  std::vector<T> sigma;
  std::vector<T> input;  // empty unless requested
};

/// Kernel spectra for one parameter snapshot and one clip length. Built once
/// per batch; the FFT length covers the reflect-padded signal so the circular
/// product equals the linear convolution on every output sample.
template <typename T>
class GaborBank {
 public:
  GaborBank(const GaborFilterParams<T>& params, std::size_t n_samples,
            bool with_derivatives);

  std::size_t num_filters() const { return kernels_.size(); }
  std::size_t n_samples() const { return n_samples_; }
  std::size_t fft_size() const { return fft_.size(); }

  TimeFreqMap<T> forward(std::span<const T> x, GaborClipCache<T>* cache) const;
  GaborGrads<T> backward(const Matrix<T>& grad_energy,
                         const GaborClipCache<T>& cache,
                         bool want_input) const;

  /// Same, with the energy gradient of channel k written on demand into a
  /// zeroed row by `grad_row(k, row)`; keeps one channel hot in cache.
  using GradRowFn = std::function<void(std::size_t, std::span<T>)>;
  GaborGrads<T> backward(const GradRowFn& grad_row,
                         const GaborClipCache<T>& cache,
                         bool want_input) const;

 private:
  std::size_t n_samples_;
  std::size_t half_width_;
  Fft<T> fft_;
  std::vector<ComplexBuffer<T>> kernels_;
  std::vector<ComplexBuffer<T>> dmu_;
  std::vector<ComplexBuffer<T>> dsigma_;
};

/// |x * g_k|^2 at every input sample (same-length, reflect padded).
template <typename T>
TimeFreqMap<T> gabor_forward(std::span<const T> x,
                             const GaborFilterParams<T>& params);

template <typename T>
void gaussian_pool_row(std::span<const T> energy, T rho, int hop,
                       double window_span, std::span<T> out);

/// Accumulates into grad_energy and returns d loss / d rho.
template <typename T>
T gaussian_pool_row_backward(std::span<const T> grad_pooled,
                             std::span<const T> energy, T rho, int hop,
                             double window_span, std::span<T> grad_energy);

template <typename T>
TimeFreqMap<T> gaussian_pool(const TimeFreqMap<T>& energy,
                             const PoolingParams<T>& params);

std::size_t pooled_frames(std::size_t n_samples, int hop);

/// y = log(1 + 10^a x) per channel, no normalization.
template <typename T>
TimeFreqMap<T> log_compress(const TimeFreqMap<T>& pooled,
                            const CompressionParams<T>& params);

template <typename T>
struct CompressCache {
  Mode mode = Mode::kTrain;
  std::vector<Matrix<T>> pooled;
  std::vector<Matrix<T>> normalized;  // pre-affine
  std::vector<T> inv_std;
  std::vector<bool> floored;  // batch variance fell below eps
};

template <typename T>
struct CompressGrads {
  std::vector<T> log_gain;
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<Matrix<T>> pooled;
};

/// Log compression then temporal batch norm over (batch x time) per channel.
/// Train mode uses batch statistics and, when update_stats is set, folds
/// them into the running statistics; eval mode uses the running statistics.
template <typename T>
std::vector<TimeFreqMap<T>> compress_normalize(
    const std::vector<TimeFreqMap<T>>& pooled, CompressionParams<T>& params,
    Mode mode, CompressCache<T>* cache = nullptr, bool update_stats = true);

template <typename T>
CompressGrads<T> compress_normalize_backward(
    const std::vector<Matrix<T>>& grad_out, const CompressionParams<T>& params,
    const CompressCache<T>& cache);

template <typename T>
struct FrontendCache {
  std::unique_ptr<GaborBank<T>> bank;
  std::vector<GaborClipCache<T>> clips;
  CompressCache<T> compress;
};

template <typename T>
struct FrontendGrads {
  std::vector<T> mu, sigma, rho, log_gain, gamma, beta;
  std::vector<std::vector<T>> input;  // per clip, empty unless requested
};

/// Full frontend over a batch of equal-length clips.
template <typename T>
std::vector<TimeFreqMap<T>> frontend_forward(
    const std::vector<std::span<const T>>& batch, FrontendParams<T>& params,
    Mode mode, FrontendCache<T>* cache = nullptr, bool update_stats = true,
    Stage stop_after = Stage::kNormalized);

template <typename T>
FrontendGrads<T> frontend_backward(const std::vector<Matrix<T>>& grad_out,
                                   const FrontendParams<T>& params,
                                   const FrontendCache<T>& cache,
                                   bool want_input = false);

}  // namespace sonarleaf

#endif  // SONARLEAF_FRONTEND_HPP
