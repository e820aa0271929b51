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

#include "sonarleaf/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sonarleaf/error.hpp"
#include "sonarleaf/parallel.hpp"
#include "kernels.hpp"

namespace sonarleaf {

namespace {

constexpr double kPi = std::numbers::pi;
// Full width at half maximum of a Gaussian, in units of its std.
constexpr double kFwhmPerSigma = 2.3548200450309493;

// Plain complex product; std::complex operator* goes through the
// Annex G inf/nan recovery path, which is far slower in the inner loops.
template <typename T>
inline std::complex<T> cmul(std::complex<T> a, std::complex<T> b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

template <typename T>
inline std::complex<T> cmul_conj(std::complex<T> a, std::complex<T> b) {
  return {a.real() * b.real() + a.imag() * b.imag(),
          a.imag() * b.real() - a.real() * b.imag()};
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

template <typename T>
double FrontendParams<T>::mu_min() const {
  return 2.0 * kPi * 10.0 / sample_rate;
}

template <typename T>
double FrontendParams<T>::mu_max() const {
  return kPi * 0.999;
}

template <typename T>
double FrontendParams<T>::center_hz(std::size_t k) const {
  return static_cast<double>(gabor.mu[k]) * sample_rate / (2.0 * kPi);
}

template <typename T>
FrontendParams<T> init_filterbank(const FilterbankConfig& config) {
  if (config.num_filters < 1) {
    throw ConfigError("filterbank needs at least one filter");
  }
  if (config.sample_rate < 1) throw ConfigError("sample rate must be positive");
  if (!(config.f_min >= 0.0) || !(config.f_min < config.f_max) ||
      config.f_max > config.sample_rate / 2.0) {
    std::ostringstream msg;
    msg << "invalid frequency range [" << config.f_min << ", " << config.f_max
        << "] Hz for sample rate " << config.sample_rate;
    throw ConfigError(msg.str());
  }
  if (config.kernel_width < 1 || config.kernel_width % 2 == 0) {
    throw ConfigError("kernel width must be a positive odd number");
  }
  const int hop = static_cast<int>(
      std::lround(config.hop_ms * config.sample_rate / 1000.0));
  if (hop < 1) throw ConfigError("pooling hop must be at least one sample");
  if (!(config.window_ms > 0.0) || !(config.window_span > 0.0)) {
    throw ConfigError("pooling window must be positive");
  }
  if (!(config.sigma_min > 0.0) || config.sigma_min > config.kernel_width / 2.0) {
    throw ConfigError("sigma_min must lie in (0, kernel_width / 2]");
  }
  if (!std::isfinite(config.log_gain_init)) {
    throw ConfigError("log_gain_init must be finite");
  }

  const auto K = static_cast<std::size_t>(config.num_filters);
  FrontendParams<T> p;
  p.sample_rate = config.sample_rate;
  p.gabor.kernel_width = config.kernel_width;
  p.gabor.sigma_min = config.sigma_min;
  p.pooling.hop = hop;
  p.pooling.window_span = config.window_span;
  p.compression.eps = config.eps;
  p.compression.momentum = config.momentum;

  const double mel_lo = hz_to_mel(config.f_min);
  const double mel_hi = hz_to_mel(config.f_max);
  const double step = (mel_hi - mel_lo) / static_cast<double>(K + 1);
  const double rad_per_hz = 2.0 * kPi / config.sample_rate;
  const double rho = config.window_ms * config.sample_rate / 1000.0 /
                     kFwhmPerSigma;
  for (std::size_t i = 1; i <= K; ++i) {
    const double mel = mel_lo + step * static_cast<double>(i);
    const double bandwidth_hz =
        mel_to_hz(mel + step / 2.0) - mel_to_hz(mel - step / 2.0);
    const double sigma = kFwhmPerSigma / (bandwidth_hz * rad_per_hz);
    p.gabor.mu.push_back(static_cast<T>(mel_to_hz(mel) * rad_per_hz));
    p.gabor.sigma.push_back(static_cast<T>(sigma));
    p.pooling.rho.push_back(static_cast<T>(rho));
  }
  p.compression.log_gain.assign(K, static_cast<T>(config.log_gain_init));
  p.compression.gamma.assign(K, T(1));
  p.compression.beta.assign(K, T(0));
  p.compression.running_mean.assign(K, T(0));
  p.compression.running_var.assign(K, T(0));
  clamp_frontend(p);
  return p;
}

template <typename T>
FrontendParams<T> init_filterbank(int num_filters, int sample_rate,
                                  double f_min, double f_max) {
  FilterbankConfig config;
  config.num_filters = num_filters;
  config.sample_rate = sample_rate;
  config.f_min = f_min;
  config.f_max = f_max;
  return init_filterbank<T>(config);
}

template <typename T>
void clamp_frontend(FrontendParams<T>& params) {
  const T mu_lo = static_cast<T>(params.mu_min());
  const T mu_hi = static_cast<T>(params.mu_max());
  const T sigma_lo = static_cast<T>(params.gabor.sigma_min);
  const T sigma_hi = static_cast<T>(params.gabor.sigma_max());
  const T rho_lo = static_cast<T>(params.pooling.rho_min);
  for (auto& mu : params.gabor.mu) mu = std::clamp(mu, mu_lo, mu_hi);
  for (auto& s : params.gabor.sigma) s = std::clamp(s, sigma_lo, sigma_hi);
  for (auto& r : params.pooling.rho) r = std::max(r, rho_lo);
}

template <typename T>
std::vector<std::complex<T>> gabor_kernel(T mu, T sigma, int width) {
  const int h = (width - 1) / 2;
  std::vector<std::complex<T>> g(static_cast<std::size_t>(width));
  const double s = static_cast<double>(sigma);
  const double norm = 1.0 / (std::sqrt(2.0 * kPi) * s);
  for (int m = -h; m <= h; ++m) {
    const double env = norm * std::exp(-0.5 * m * m / (s * s));
    const double phase = static_cast<double>(mu) * m;
    g[static_cast<std::size_t>(m + h)] = std::complex<T>(
        static_cast<T>(env * std::cos(phase)), static_cast<T>(env * std::sin(phase)));
  }
  return g;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n <= 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<long>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

// ---------------------------------------------------------------------------
// Gabor convolution

template <typename T>
GaborBank<T>::GaborBank(const GaborFilterParams<T>& params,
                        std::size_t n_samples, bool with_derivatives)
    : n_samples_(n_samples),
      half_width_(static_cast<std::size_t>((params.kernel_width - 1) / 2)),
      fft_(good_fft_size(n_samples + 2 * static_cast<std::size_t>(
                                             (params.kernel_width - 1) / 2))) {
  if (params.kernel_width < 1 || params.kernel_width % 2 == 0) {
    throw ConfigError("kernel width must be a positive odd number");
  }
  if (params.mu.size() != params.sigma.size() || params.mu.empty()) {
    throw InternalError("mu/sigma size mismatch");
  }
  const std::size_t K = params.mu.size();
  const std::size_t N = fft_.size();
  const long h = static_cast<long>(half_width_);
  kernels_.resize(K);
  if (with_derivatives) {
    dmu_.resize(K);
    dsigma_.resize(K);
  }
  parallel_for(K, [&](std::size_t k) {
    const double sigma = static_cast<double>(params.sigma[k]);
    if (!(sigma > 0.0)) throw InternalError("sigma must be positive");
    const auto g = gabor_kernel<T>(params.mu[k], params.sigma[k],
                                   params.kernel_width);
    auto place = [&](auto&& value_at) {
      ComplexBuffer<T> buf(N);
      for (long m = -h; m <= h; ++m) {
        buf[static_cast<std::size_t>((m + static_cast<long>(N)) % static_cast<long>(N))] =
            value_at(m, g[static_cast<std::size_t>(m + h)]);
      }
      fft_.forward(buf);
      return buf;
    };
    kernels_[k] = place([](long, std::complex<T> v) { return v; });
    if (with_derivatives) {
      // d g / d mu = i m g ; d g / d sigma = g (m^2 / sigma^3 - 1 / sigma)
      dmu_[k] = place([](long m, std::complex<T> v) {
        return std::complex<T>(0, static_cast<T>(m)) * v;
      });
      dsigma_[k] = place([sigma](long m, std::complex<T> v) {
        const double f = static_cast<double>(m) * m / (sigma * sigma * sigma) - 1.0 / sigma;
        return v * static_cast<T>(f);
      });
    }
  });
}

template <typename T>
TimeFreqMap<T> GaborBank<T>::forward(std::span<const T> x,
                                     GaborClipCache<T>* cache) const {
  if (x.size() != n_samples_) {
    throw InputError("waveform length does not match the filterbank plan");
  }
  const std::size_t N = fft_.size();
  const std::size_t n = n_samples_;
  const long h = static_cast<long>(half_width_);
  const std::size_t L = n + 2 * half_width_;
  ComplexBuffer<T> xp(N);
  for (std::size_t j = 0; j < L; ++j) {
    xp[j] = x[reflect_index(static_cast<long>(j) - h, n)];
  }
  fft_.forward(xp);

  const std::size_t K = kernels_.size();
  TimeFreqMap<T> out{Matrix<T>(K, n), Stage::kEnergy};
  if (cache != nullptr) {
    cache->n_samples = n;
    cache->response.resize(K * n);
  }
  const T inv_n = T(1) / static_cast<T>(N);
  ComplexBuffer<T> buf(N);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& G = kernels_[k];
    for (std::size_t f = 0; f < N; ++f) buf[f] = cmul(xp[f], G[f]);
    fft_.inverse(buf);
    T* row = out.values.row(k).data();
    const std::complex<T>* src = buf.data() + half_width_;
    if (cache != nullptr) {
      std::complex<T>* dst = cache->response.data() + k * n;
      for (std::size_t t = 0; t < n; ++t) {
        const std::complex<T> u(src[t].real() * inv_n, src[t].imag() * inv_n);
        dst[t] = u;
        row[t] = u.real() * u.real() + u.imag() * u.imag();
      }
    } else {
      for (std::size_t t = 0; t < n; ++t) {
        const T re = src[t].real() * inv_n;
        const T im = src[t].imag() * inv_n;
        row[t] = re * re + im * im;
      }
    }
  }
  if (cache != nullptr) cache->padded_spectrum = std::move(xp);
  return out;
}

template <typename T>
GaborGrads<T> GaborBank<T>::backward(const Matrix<T>& grad_energy,
                                     const GaborClipCache<T>& cache,
                                     bool want_input) const {
  if (grad_energy.rows != kernels_.size() || grad_energy.cols != n_samples_) {
    throw InternalError("gradient / cache shape mismatch in Gabor backward");
  }
  return backward(
      [&](std::size_t k, std::span<T> row) {
        const auto src = grad_energy.row(k);
        std::copy(src.begin(), src.end(), row.begin());
      },
      cache, want_input);
}

template <typename T>
GaborGrads<T> GaborBank<T>::backward(const GradRowFn& grad_row,
                                     const GaborClipCache<T>& cache,
                                     bool want_input) const {
  const std::size_t K = kernels_.size();
  const std::size_t n = n_samples_;
  const std::size_t N = fft_.size();
  if (dmu_.size() != K) {
    throw InternalError("filterbank plan was built without derivatives");
  }
  if (cache.response.size() != K * n || cache.n_samples != n ||
      cache.padded_spectrum.size() != N) {
    throw InternalError("gradient / cache shape mismatch in Gabor backward");
  }
  GaborGrads<T> grads;
  grads.mu.assign(K, T(0));
  grads.sigma.assign(K, T(0));
  ComplexBuffer<T> omega(N);
  std::vector<std::complex<double>> input_acc;
  if (want_input) input_acc.assign(N, {0.0, 0.0});
  const auto& xp = cache.padded_spectrum;
  std::vector<T> g(n);
  for (std::size_t k = 0; k < K; ++k) {
    std::fill(omega.begin(), omega.end(), std::complex<T>(0, 0));
    std::fill(g.begin(), g.end(), T(0));
    grad_row(k, g);
    const T* g_row = g.data();
    const std::complex<T>* u = cache.response.data() + k * n;
    std::complex<T>* om = omega.data() + half_width_;
    for (std::size_t t = 0; t < n; ++t) {
      const T s = T(2) * g_row[t];
      om[t] = std::complex<T>(s * u[t].real(), s * u[t].imag());
    }
    fft_.forward(omega);
    // Parseval: sum_q Re(omega[q] conj(v[q])) = Re sum_f Omega conj(V) / N,
    // with V = Xp * H for the derivative kernel H.
    double acc_mu = 0.0;
    double acc_sigma = 0.0;
    const auto* Hm = dmu_[k].data();
    const auto* Hs = dsigma_[k].data();
    const auto* X = xp.data();
    const auto* W = omega.data();
#pragma omp simd reduction(+ : acc_mu, acc_sigma)
    for (std::size_t f = 0; f < N; ++f) {
      const std::complex<T> w = cmul_conj(W[f], X[f]);
      acc_mu += static_cast<double>(w.real() * Hm[f].real() + w.imag() * Hm[f].imag());
      acc_sigma += static_cast<double>(w.real() * Hs[f].real() + w.imag() * Hs[f].imag());
    }
    grads.mu[k] = static_cast<T>(acc_mu / static_cast<double>(N));
    grads.sigma[k] = static_cast<T>(acc_sigma / static_cast<double>(N));
    if (want_input) {
      const auto& G = kernels_[k];
      for (std::size_t f = 0; f < N; ++f) {
        input_acc[f] += std::complex<double>(cmul_conj(omega[f], G[f]));
      }
    }
  }
  if (want_input) {
    ComplexBuffer<T> buf(N);
    for (std::size_t f = 0; f < N; ++f) {
      buf[f] = std::complex<T>(input_acc[f]);
    }
    fft_.inverse(buf);
    grads.input.assign(n, T(0));
    const long h = static_cast<long>(half_width_);
    const std::size_t L = n + 2 * half_width_;
    for (std::size_t j = 0; j < L; ++j) {
      grads.input[reflect_index(static_cast<long>(j) - h, n)] +=
          buf[j].real() / static_cast<T>(N);
    }
  }
  return grads;
}

template <typename T>
TimeFreqMap<T> gabor_forward(std::span<const T> x,
                             const GaborFilterParams<T>& params) {
  if (x.size() < static_cast<std::size_t>(params.kernel_width)) {
    throw InputError("waveform is shorter than the Gabor kernel");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(static_cast<double>(x[i]))) {
      throw InputError("non-finite sample at index " + std::to_string(i));
    }
  }
  GaborBank<T> bank(params, x.size(), false);
  return bank.forward(x, nullptr);
}

// ---------------------------------------------------------------------------
// Gaussian pooling

std::size_t pooled_frames(std::size_t n_samples, int hop) {
  return n_samples / static_cast<std::size_t>(hop);
}

namespace {

template <typename T>
std::vector<T> pool_window(T rho, double window_span, long* support) {
  const double r = static_cast<double>(rho);
  if (!(r > 0.0)) {
    throw InternalError("Gaussian pooling width must be positive");
  }
  const long S = static_cast<long>(std::floor(window_span * r));
  std::vector<double> e(static_cast<std::size_t>(2 * S + 1));
  double z = 0.0;
  for (long s = -S; s <= S; ++s) {
    const double v = std::exp(-0.5 * s * s / (r * r));
    e[static_cast<std::size_t>(s + S)] = v;
    z += v;
  }
  std::vector<T> w(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) w[i] = static_cast<T>(e[i] / z);
  *support = S;
  return w;
}

}  // namespace

namespace {

// Row extended by S reflected samples on each side.
template <typename T>
std::vector<T> reflect_pad_row(std::span<const T> row, long S) {
  const std::size_t n = row.size();
  std::vector<T> padded(n + 2 * static_cast<std::size_t>(S));
  for (long j = 0; j < S; ++j) {
    padded[static_cast<std::size_t>(j)] = row[reflect_index(j - S, n)];
    padded[n + static_cast<std::size_t>(S + j)] =
        row[reflect_index(static_cast<long>(n) + j, n)];
  }
  std::copy(row.begin(), row.end(), padded.begin() + S);
  return padded;
}

}  // namespace

template <typename T>
void gaussian_pool_row(std::span<const T> energy, T rho, int hop,
                       double window_span, std::span<T> out) {
  long S = 0;
  const auto w = pool_window(rho, window_span, &S);
  const auto padded = reflect_pad_row(energy, S);
  for (std::size_t f = 0; f < out.size(); ++f) {
    // Window centred on sample f * hop starts at padded index f * hop.
    const T* e = padded.data() + f * static_cast<std::size_t>(hop);
    out[f] = kernels::dot(w.data(), e, w.size());
  }
}

template <typename T>
T gaussian_pool_row_backward(std::span<const T> grad_pooled,
                             std::span<const T> energy, T rho, int hop,
                             double window_span, std::span<T> grad_energy) {
  long S = 0;
  const auto w = pool_window(rho, window_span, &S);
  const double r = static_cast<double>(rho);
  double second_moment = 0.0;
  std::vector<T> ws2(w.size());
  for (long s = -S; s <= S; ++s) {
    const std::size_t i = static_cast<std::size_t>(s + S);
    second_moment += static_cast<double>(w[i]) * static_cast<double>(s) * s;
    ws2[i] = static_cast<T>(static_cast<double>(w[i]) * static_cast<double>(s) * s);
  }
  const std::size_t n = energy.size();
  const auto padded = reflect_pad_row(energy, S);
  std::vector<T> grad_padded(padded.size(), T(0));
  double grad_rho = 0.0;
  for (std::size_t f = 0; f < grad_pooled.size(); ++f) {
    const T g = grad_pooled[f];
    if (g == T(0)) continue;
    const std::size_t off = f * static_cast<std::size_t>(hop);
    T pooled = T(0);
    T weighted = T(0);
    kernels::pool_window_backward(w.data(), ws2.data(), padded.data() + off, g,
                                  grad_padded.data() + off, w.size(), &pooled,
                                  &weighted);
    grad_rho += static_cast<double>(g) *
                (static_cast<double>(weighted) -
                 second_moment * static_cast<double>(pooled)) /
                (r * r * r);
  }
  for (std::size_t j = 0; j < n; ++j) {
    grad_energy[j] += grad_padded[j + static_cast<std::size_t>(S)];
  }
  for (long j = 0; j < S; ++j) {
    grad_energy[reflect_index(j - S, n)] += grad_padded[static_cast<std::size_t>(j)];
    grad_energy[reflect_index(static_cast<long>(n) + j, n)] +=
        grad_padded[n + static_cast<std::size_t>(S + j)];
  }
  return static_cast<T>(grad_rho);
}

template <typename T>
TimeFreqMap<T> gaussian_pool(const TimeFreqMap<T>& energy,
                             const PoolingParams<T>& params) {
  if (energy.stage != Stage::kEnergy) {
    throw InputError("gaussian_pool expects an energy-stage map");
  }
  if (params.hop < 1) throw ConfigError("pooling hop must be at least one");
  if (static_cast<std::size_t>(params.hop) > energy.frames()) {
    throw ConfigError("pooling hop exceeds the clip length");
  }
  if (params.rho.size() != energy.channels()) {
    throw InternalError("pooling width count does not match channel count");
  }
  const std::size_t T_out = pooled_frames(energy.frames(), params.hop);
  TimeFreqMap<T> out{Matrix<T>(energy.channels(), T_out), Stage::kPooled};
  for (std::size_t k = 0; k < energy.channels(); ++k) {
    gaussian_pool_row<T>(energy.values.row(k), params.rho[k], params.hop,
                         params.window_span, out.values.row(k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log compression + temporal batch norm

template <typename T>
TimeFreqMap<T> log_compress(const TimeFreqMap<T>& pooled,
                            const CompressionParams<T>& params) {
  if (params.log_gain.size() != pooled.channels()) {
    throw InternalError("compression parameter count does not match channels");
  }
  TimeFreqMap<T> out{Matrix<T>(pooled.channels(), pooled.frames()),
                     Stage::kCompressed};
  for (std::size_t k = 0; k < pooled.channels(); ++k) {
    const double gain = std::pow(10.0, static_cast<double>(params.log_gain[k]));
    auto in = pooled.values.row(k);
    auto y = out.values.row(k);
    for (std::size_t t = 0; t < in.size(); ++t) {
      if (!(in[t] >= T(0))) {
        throw InputError("log compression requires nonnegative input");
      }
      y[t] = static_cast<T>(std::log1p(gain * static_cast<double>(in[t])));
    }
  }
  return out;
}

template <typename T>
std::vector<TimeFreqMap<T>> compress_normalize(
    const std::vector<TimeFreqMap<T>>& pooled, CompressionParams<T>& params,
    Mode mode, CompressCache<T>* cache, bool update_stats) {
  if (pooled.empty()) throw InputError("empty batch");
  const std::size_t K = pooled.front().channels();
  const std::size_t frames = pooled.front().frames();
  if (params.log_gain.size() != K) {
    throw InternalError("compression parameter count does not match channels");
  }
  for (const auto& m : pooled) {
    if (m.channels() != K || m.frames() != frames) {
      throw InputError("batch maps differ in shape");
    }
  }
  if (mode == Mode::kEval && params.tracked_batches == 0) {
    throw ConfigError(
        "temporal batch norm running statistics are uninitialized");
  }
  const std::size_t B = pooled.size();
  std::vector<Matrix<T>> compressed(B);
  for (std::size_t b = 0; b < B; ++b) {
    compressed[b] = log_compress(pooled[b], params).values;
  }

  std::vector<double> mean(K), var(K);
  const double count = static_cast<double>(B * frames);
  if (mode == Mode::kTrain) {
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        for (const T v : compressed[b].row(k)) s += v;
      }
      mean[k] = s / count;
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        for (const T v : compressed[b].row(k)) {
          const double d = v - mean[k];
          ss += d * d;
        }
      }
      var[k] = ss / count;
    }
    if (update_stats) {
      const double m = params.momentum;
      const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double uv = var[k] * unbias;
        if (params.tracked_batches == 0) {
          params.running_mean[k] = static_cast<T>(mean[k]);
          params.running_var[k] = static_cast<T>(uv);
        } else {
          params.running_mean[k] = static_cast<T>(
              (1.0 - m) * params.running_mean[k] + m * mean[k]);
          params.running_var[k] = static_cast<T>(
              (1.0 - m) * params.running_var[k] + m * uv);
        }
      }
      ++params.tracked_batches;
    }
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      mean[k] = params.running_mean[k];
      var[k] = params.running_var[k];
    }
  }

  // eps is a floor on the variance, not an additive term, so channels with
  // real spread come out with exactly unit variance.
  std::vector<T> inv_std(K);
  std::vector<bool> floored(K);
  for (std::size_t k = 0; k < K; ++k) {
    floored[k] = var[k] < params.eps;
    inv_std[k] = static_cast<T>(1.0 / std::sqrt(std::max(var[k], params.eps)));
  }
  std::vector<TimeFreqMap<T>> out(B);
  if (cache != nullptr) {
    cache->mode = mode;
    cache->pooled.resize(B);
    cache->normalized.assign(B, Matrix<T>(K, frames));
    cache->inv_std = inv_std;
    cache->floored = floored;
  }
  for (std::size_t b = 0; b < B; ++b) {
    out[b] = TimeFreqMap<T>{Matrix<T>(K, frames), Stage::kNormalized};
    for (std::size_t k = 0; k < K; ++k) {
      auto y = compressed[b].row(k);
      auto z = out[b].values.row(k);
      for (std::size_t t = 0; t < frames; ++t) {
        const T hat = static_cast<T>((y[t] - mean[k]) * inv_std[k]);
        if (cache != nullptr) cache->normalized[b](k, t) = hat;
        z[t] = params.gamma[k] * hat + params.beta[k];
      }
    }
    if (cache != nullptr) cache->pooled[b] = pooled[b].values;
  }
  return out;
}

template <typename T>
CompressGrads<T> compress_normalize_backward(
    const std::vector<Matrix<T>>& grad_out, const CompressionParams<T>& params,
    const CompressCache<T>& cache) {
  const std::size_t B = grad_out.size();
  if (B != cache.pooled.size() || B == 0) {
    throw InternalError("batch size mismatch in compression backward");
  }
  const std::size_t K = cache.inv_std.size();
  const std::size_t frames = cache.pooled.front().cols;
  for (const auto& g : grad_out) {
    if (g.rows != K || g.cols != frames) {
      throw InternalError("gradient shape mismatch in compression backward");
    }
  }
  CompressGrads<T> grads;
  grads.log_gain.assign(K, T(0));
  grads.gamma.assign(K, T(0));
  grads.beta.assign(K, T(0));
  grads.pooled.assign(B, Matrix<T>(K, frames));
  const double count = static_cast<double>(B * frames);
  for (std::size_t k = 0; k < K; ++k) {
    double sum_g = 0.0;
    double sum_g_hat = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      auto g = grad_out[b].row(k);
      auto hat = cache.normalized[b].row(k);
      for (std::size_t t = 0; t < frames; ++t) {
        sum_g += g[t];
        sum_g_hat += static_cast<double>(g[t]) * hat[t];
      }
    }
    grads.beta[k] = static_cast<T>(sum_g);
    grads.gamma[k] = static_cast<T>(sum_g_hat);
    const double gamma = params.gamma[k];
    const double inv_std = cache.inv_std[k];
    const double gain = std::pow(10.0, static_cast<double>(params.log_gain[k]));
    double grad_a = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      auto g = grad_out[b].row(k);
      auto hat = cache.normalized[b].row(k);
      auto x = cache.pooled[b].row(k);
      auto gx = grads.pooled[b].row(k);
      for (std::size_t t = 0; t < frames; ++t) {
        double dy;
        if (cache.mode == Mode::kTrain && cache.floored[k]) {
          dy = gamma * inv_std * (g[t] - sum_g / count);
        } else if (cache.mode == Mode::kTrain) {
          dy = gamma * inv_std *
               (g[t] - sum_g / count - hat[t] * sum_g_hat / count);
        } else {
          dy = gamma * inv_std * g[t];
        }
        const double xs = static_cast<double>(x[t]);
        const double denom = 1.0 + gain * xs;
        gx[t] = static_cast<T>(dy * gain / denom);
        grad_a += dy * std::numbers::ln10 * gain * xs / denom;
      }
    }
    grads.log_gain[k] = static_cast<T>(grad_a);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Composite frontend

template <typename T>
std::vector<TimeFreqMap<T>> frontend_forward(
    const std::vector<std::span<const T>>& batch, FrontendParams<T>& params,
    Mode mode, FrontendCache<T>* cache, bool update_stats, Stage stop_after) {
  if (batch.empty()) throw InputError("empty batch");
  const std::size_t n = batch.front().size();
  for (const auto& x : batch) {
    if (x.size() != n) throw InputError("clips in a batch differ in length");
  }
  if (n < static_cast<std::size_t>(params.gabor.kernel_width)) {
    throw InputError("waveform is shorter than the Gabor kernel");
  }
  if (static_cast<std::size_t>(params.pooling.hop) > n) {
    throw ConfigError("pooling hop exceeds the clip length");
  }
  const bool train_cache = cache != nullptr;
  auto bank = std::make_unique<GaborBank<T>>(params.gabor, n, train_cache);
  const std::size_t B = batch.size();
  if (train_cache) cache->clips.assign(B, {});
  std::vector<TimeFreqMap<T>> stage(B);
  parallel_for(B, [&](std::size_t b) {
    for (const T v : batch[b]) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw InputError("non-finite sample in waveform " + std::to_string(b));
      }
    }
    auto energy = bank->forward(batch[b],
                                train_cache ? &cache->clips[b] : nullptr);
    if (stop_after == Stage::kEnergy) {
      stage[b] = std::move(energy);
    } else {
      stage[b] = gaussian_pool(energy, params.pooling);
    }
  });
  if (train_cache) cache->bank = std::move(bank);
  if (stop_after == Stage::kEnergy || stop_after == Stage::kPooled) {
    return stage;
  }
  if (stop_after == Stage::kCompressed) {
    for (auto& m : stage) m = log_compress(m, params.compression);
    return stage;
  }
  return compress_normalize(stage, params.compression, mode,
                            train_cache ? &cache->compress : nullptr,
                            update_stats);
}

template <typename T>
FrontendGrads<T> frontend_backward(const std::vector<Matrix<T>>& grad_out,
                                   const FrontendParams<T>& params,
                                   const FrontendCache<T>& cache,
                                   bool want_input) {
  if (!cache.bank) throw InternalError("frontend cache is empty");
  const std::size_t B = grad_out.size();
  if (B != cache.clips.size()) {
    throw InternalError("batch size mismatch in frontend backward");
  }
  auto cg = compress_normalize_backward(grad_out, params.compression,
                                        cache.compress);
  const std::size_t K = params.num_filters();
  const std::size_t n = cache.bank->n_samples();
  std::vector<GaborGrads<T>> per_clip(B);
  std::vector<std::vector<T>> per_clip_rho(B, std::vector<T>(K, T(0)));
  parallel_for(B, [&](std::size_t b) {
    const auto& clip = cache.clips[b];
    std::vector<T> energy(n);
    auto pool_grad = [&](std::size_t k, std::span<T> grad_row) {
      const auto u = clip.row(k);
      for (std::size_t t = 0; t < n; ++t) {
        energy[t] = u[t].real() * u[t].real() + u[t].imag() * u[t].imag();
      }
      per_clip_rho[b][k] = gaussian_pool_row_backward<T>(
          cg.pooled[b].row(k), energy, params.pooling.rho[k],
          params.pooling.hop, params.pooling.window_span, grad_row);
    };
    per_clip[b] = cache.bank->backward(pool_grad, clip, want_input);
  });
  FrontendGrads<T> grads;
  grads.mu.assign(K, T(0));
  grads.sigma.assign(K, T(0));
  grads.rho.assign(K, T(0));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      grads.mu[k] += per_clip[b].mu[k];
      grads.sigma[k] += per_clip[b].sigma[k];
      grads.rho[k] += per_clip_rho[b][k];
    }
    if (want_input) grads.input.push_back(std::move(per_clip[b].input));
  }
  grads.log_gain = std::move(cg.log_gain);
  grads.gamma = std::move(cg.gamma);
  grads.beta = std::move(cg.beta);
  return grads;
}

#define SONARLEAF_INSTANTIATE_FRONTEND(T)                                     \
  template struct FrontendParams<T>;                                          \
  template FrontendParams<T> init_filterbank<T>(const FilterbankConfig&);     \
  template FrontendParams<T> init_filterbank<T>(int, int, double, double);    \
  template void clamp_frontend<T>(FrontendParams<T>&);                        \
  template std::vector<std::complex<T>> gabor_kernel<T>(T, T, int);           \
  template class GaborBank<T>;                                                \
  template TimeFreqMap<T> gabor_forward<T>(std::span<const T>,                \
                                           const GaborFilterParams<T>&);      \
  template void gaussian_pool_row<T>(std::span<const T>, T, int, double,      \
                                     std::span<T>);                           \
  template T gaussian_pool_row_backward<T>(std::span<const T>,                \
                                           std::span<const T>, T, int,        \
                                           double, std::span<T>);             \
  template TimeFreqMap<T> gaussian_pool<T>(const TimeFreqMap<T>&,             \
                                           const PoolingParams<T>&);          \
  template std::vector<TimeFreqMap<T>> compress_normalize<T>(                 \
      const std::vector<TimeFreqMap<T>>&, CompressionParams<T>&, Mode,        \
      CompressCache<T>*, bool);                                               \
  template TimeFreqMap<T> log_compress<T>(const TimeFreqMap<T>&,             \
                                          const CompressionParams<T>&);       \
  template CompressGrads<T> compress_normalize_backward<T>(                   \
      const std::vector<Matrix<T>>&, const CompressionParams<T>&,             \
      const CompressCache<T>&);                                               \
  template std::vector<TimeFreqMap<T>> frontend_forward<T>(                   \
      const std::vector<std::span<const T>>&, FrontendParams<T>&, Mode,       \
      FrontendCache<T>*, bool, Stage);                                        \
  template FrontendGrads<T> frontend_backward<T>(                             \
      const std::vector<Matrix<T>>&, const FrontendParams<T>&,                \
      const FrontendCache<T>&, bool);

SONARLEAF_INSTANTIATE_FRONTEND(float)
SONARLEAF_INSTANTIATE_FRONTEND(double)

}  // namespace sonarleaf
