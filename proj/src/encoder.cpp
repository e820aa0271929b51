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

#include "sonarleaf/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sonarleaf/error.hpp"
#include "sonarleaf/parallel.hpp"
#include "kernels.hpp"

namespace sonarleaf {

template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config,
                              std::mt19937_64& rng) {
  if (config.channels.empty()) {
    throw ConfigError("encoder needs at least one conv block");
  }
  EncoderParams<T> p;
  p.eps = config.eps;
  p.momentum = config.momentum;
  std::size_t in = 1;
  for (int width : config.channels) {
    if (width < 1) throw ConfigError("encoder channel widths must be positive");
    ConvBlockParams<T> b;
    b.in_channels = in;
    b.out_channels = static_cast<std::size_t>(width);
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / (9.0 * in)));
    b.weight.resize(b.out_channels * in * 9);
    for (auto& w : b.weight) w = static_cast<T>(he(rng));
    b.bias.assign(b.out_channels, T(0));
    b.gamma.assign(b.out_channels, T(1));
    b.beta.assign(b.out_channels, T(0));
    b.running_mean.assign(b.out_channels, T(0));
    b.running_var.assign(b.out_channels, T(0));
    p.blocks.push_back(std::move(b));
    in = static_cast<std::size_t>(width);
  }
  return p;
}

std::pair<std::size_t, std::size_t> encoder_output_dims(std::size_t blocks,
                                                        std::size_t height,
                                                        std::size_t width) {
  for (std::size_t i = 0; i < blocks; ++i) {
    height = (height + 1) / 2;
    width = (width + 1) / 2;
  }
  return {height, width};
}

namespace {

// Patch matrix for a 3x3 stride-2 pad-1 convolution: row (ci, di, dj),
// column (i, j) holds in(ci, 2i+di-1, 2j+dj-1), zero outside the image.
template <typename T>
std::vector<T> im2col(const FeatureMap<T>& in, std::size_t Ho, std::size_t Wo) {
  const std::size_t H = in.height, W = in.width, P = Ho * Wo;
  std::vector<T> col(in.channels * 9 * P, T(0));
  for (std::size_t ci = 0; ci < in.channels; ++ci) {
    for (std::size_t di = 0; di < 3; ++di) {
      for (std::size_t dj = 0; dj < 3; ++dj) {
        T* dst = col.data() + (ci * 9 + di * 3 + dj) * P;
        for (std::size_t i = 0; i < Ho; ++i) {
          const long r = static_cast<long>(2 * i + di) - 1;
          if (r < 0 || r >= static_cast<long>(H)) continue;
          const T* irow = &in(ci, static_cast<std::size_t>(r), 0);
          for (std::size_t j = 0; j < Wo; ++j) {
            const long c = static_cast<long>(2 * j + dj) - 1;
            if (c >= 0 && c < static_cast<long>(W)) {
              dst[i * Wo + j] = irow[static_cast<std::size_t>(c)];
            }
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void conv_forward(const FeatureMap<T>& in, const ConvBlockParams<T>& p,
                  FeatureMap<T>& out) {
  const std::size_t Ho = (in.height + 1) / 2, Wo = (in.width + 1) / 2;
  const std::size_t P = Ho * Wo, taps = p.in_channels * 9;
  const auto col = im2col(in, Ho, Wo);
  out = FeatureMap<T>(p.out_channels, Ho, Wo);
  for (std::size_t co = 0; co < p.out_channels; ++co) {
    T* o = out.plane(co).data();
    std::fill(o, o + P, p.bias[co]);
    const T* w = p.weight.data() + co * taps;
    for (std::size_t k = 0; k < taps; ++k) {
      kernels::axpy(w[k], col.data() + k * P, o, P);
    }
  }
}

template <typename T>
void conv_backward(const FeatureMap<T>& in, const ConvBlockParams<T>& p,
                   const FeatureMap<T>& grad_out, ConvBlockGrads<T>& grads,
                   FeatureMap<T>& grad_in) {
  const std::size_t H = in.height, W = in.width;
  const std::size_t Ho = grad_out.height, Wo = grad_out.width;
  const std::size_t P = Ho * Wo, taps = p.in_channels * 9;
  const auto col = im2col(in, Ho, Wo);
  std::vector<T> grad_col(taps * P, T(0));
  for (std::size_t co = 0; co < p.out_channels; ++co) {
    const T* g = grad_out.plane(co).data();
    double bsum = 0.0;
    for (std::size_t q = 0; q < P; ++q) bsum += g[q];
    grads.bias[co] += static_cast<T>(bsum);
    const T* w = p.weight.data() + co * taps;
    T* gw = grads.weight.data() + co * taps;
    for (std::size_t k = 0; k < taps; ++k) {
      gw[k] += kernels::dot(g, col.data() + k * P, P);
      kernels::axpy(w[k], g, grad_col.data() + k * P, P);
    }
  }
  grad_in = FeatureMap<T>(p.in_channels, H, W);
  for (std::size_t ci = 0; ci < p.in_channels; ++ci) {
    for (std::size_t di = 0; di < 3; ++di) {
      for (std::size_t dj = 0; dj < 3; ++dj) {
        const T* src = grad_col.data() + (ci * 9 + di * 3 + dj) * P;
        for (std::size_t i = 0; i < Ho; ++i) {
          const long r = static_cast<long>(2 * i + di) - 1;
          if (r < 0 || r >= static_cast<long>(H)) continue;
          T* girow = &grad_in(ci, static_cast<std::size_t>(r), 0);
          for (std::size_t j = 0; j < Wo; ++j) {
            const long c = static_cast<long>(2 * j + dj) - 1;
            if (c >= 0 && c < static_cast<long>(W)) {
              girow[static_cast<std::size_t>(c)] += src[i * Wo + j];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
std::vector<FeatureMap<T>> encode(const std::vector<TimeFreqMap<T>>& input,
                                  EncoderParams<T>& params, Mode mode,
                                  EncoderCache<T>* cache, bool update_stats) {
  if (input.empty()) throw InputError("empty batch");
  const std::size_t B = input.size();
  const std::size_t H = input.front().channels();
  const std::size_t W = input.front().frames();
  for (const auto& m : input) {
    if (m.channels() != H || m.frames() != W) {
      throw InputError("encoder inputs differ in shape");
    }
  }
  std::vector<FeatureMap<T>> x(B);
  for (std::size_t b = 0; b < B; ++b) {
    x[b] = FeatureMap<T>(1, H, W);
    x[b].data = input[b].values.data;
  }
  if (cache != nullptr) {
    cache->mode = mode;
    cache->inputs.assign(params.blocks.size(), {});
    cache->normalized.assign(params.blocks.size(), {});
    cache->outputs.assign(params.blocks.size(), {});
    cache->inv_std.assign(params.blocks.size(), {});
  }
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    auto& blk = params.blocks[l];
    if (x.front().channels != blk.in_channels) {
      throw InputError("encoder block input channel mismatch");
    }
    if (mode == Mode::kEval && blk.tracked_batches == 0) {
      throw ConfigError("encoder batch norm running statistics are uninitialized");
    }
    std::vector<FeatureMap<T>> y(B);
    parallel_for(B, [&](std::size_t b) { conv_forward(x[b], blk, y[b]); });

    const std::size_t C = blk.out_channels;
    const double count = static_cast<double>(B * y.front().spatial());
    std::vector<double> mean(C), var(C);
    if (mode == Mode::kTrain) {
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (const auto& m : y) {
          for (const T v : m.plane(c)) s += v;
        }
        mean[c] = s / count;
        double ss = 0.0;
        for (const auto& m : y) {
          for (const T v : m.plane(c)) ss += (v - mean[c]) * (v - mean[c]);
        }
        var[c] = ss / count;
      }
      if (update_stats) {
        const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
        for (std::size_t c = 0; c < C; ++c) {
          if (blk.tracked_batches == 0) {
            blk.running_mean[c] = static_cast<T>(mean[c]);
            blk.running_var[c] = static_cast<T>(var[c] * unbias);
          } else {
            const double m = params.momentum;
            blk.running_mean[c] = static_cast<T>((1 - m) * blk.running_mean[c] + m * mean[c]);
            blk.running_var[c] =
                static_cast<T>((1 - m) * blk.running_var[c] + m * var[c] * unbias);
          }
        }
        ++blk.tracked_batches;
      }
    } else {
      for (std::size_t c = 0; c < C; ++c) {
        mean[c] = blk.running_mean[c];
        var[c] = blk.running_var[c];
      }
    }
    std::vector<T> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) {
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var[c] + params.eps));
    }
    std::vector<FeatureMap<T>> hat;
    if (cache != nullptr) hat = y;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        auto plane = y[b].plane(c);
        const T mu = static_cast<T>(mean[c]);
        for (std::size_t i = 0; i < plane.size(); ++i) {
          const T h = (plane[i] - mu) * inv_std[c];
          if (cache != nullptr) hat[b].plane(c)[i] = h;
          const T z = blk.gamma[c] * h + blk.beta[c];
          plane[i] = z > T(0) ? z : T(0);
        }
      }
    }
    if (cache != nullptr) {
      cache->inputs[l] = std::move(x);
      cache->normalized[l] = std::move(hat);
      cache->outputs[l] = y;
      cache->inv_std[l] = inv_std;
    }
    x = std::move(y);
  }
  return x;
}

template <typename T>
EncoderGrads<T> encode_backward(const std::vector<FeatureMap<T>>& grad_out,
                                const EncoderParams<T>& params,
                                const EncoderCache<T>& cache) {
  const std::size_t L = params.blocks.size();
  if (cache.inputs.size() != L) throw InternalError("encoder cache is empty");
  const std::size_t B = grad_out.size();
  EncoderGrads<T> grads;
  grads.blocks.resize(L);
  std::vector<FeatureMap<T>> g = grad_out;
  for (std::size_t l = L; l-- > 0;) {
    const auto& blk = params.blocks[l];
    const auto& out = cache.outputs[l];
    const auto& hat = cache.normalized[l];
    if (out.size() != B) throw InternalError("encoder batch size mismatch");
    const std::size_t C = blk.out_channels;
    auto& bg = grads.blocks[l];
    bg.weight.assign(blk.weight.size(), T(0));
    bg.bias.assign(C, T(0));
    bg.gamma.assign(C, T(0));
    bg.beta.assign(C, T(0));
    // ReLU then affine: dz = g * [out > 0]
    for (std::size_t b = 0; b < B; ++b) {
      if (g[b].size() != out[b].size()) {
        throw InternalError("encoder gradient shape mismatch");
      }
      for (std::size_t i = 0; i < g[b].size(); ++i) {
        if (!(out[b].data[i] > T(0))) g[b].data[i] = T(0);
      }
    }
    const double count = static_cast<double>(B * out.front().spatial());
    for (std::size_t c = 0; c < C; ++c) {
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        auto gp = g[b].plane(c);
        auto hp = hat[b].plane(c);
        for (std::size_t i = 0; i < gp.size(); ++i) {
          sum_g += gp[i];
          sum_gh += static_cast<double>(gp[i]) * hp[i];
        }
      }
      bg.beta[c] = static_cast<T>(sum_g);
      bg.gamma[c] = static_cast<T>(sum_gh);
      const double scale = static_cast<double>(blk.gamma[c]) * cache.inv_std[l][c];
      for (std::size_t b = 0; b < B; ++b) {
        auto gp = g[b].plane(c);
        auto hp = hat[b].plane(c);
        for (std::size_t i = 0; i < gp.size(); ++i) {
          if (cache.mode == Mode::kTrain) {
            gp[i] = static_cast<T>(scale * (gp[i] - sum_g / count - hp[i] * sum_gh / count));
          } else {
            gp[i] = static_cast<T>(scale * gp[i]);
          }
        }
      }
    }
    std::vector<ConvBlockGrads<T>> per_clip(B);
    std::vector<FeatureMap<T>> g_in(B);
    parallel_for(B, [&](std::size_t b) {
      per_clip[b].weight.assign(blk.weight.size(), T(0));
      per_clip[b].bias.assign(C, T(0));
      conv_backward(cache.inputs[l][b], blk, g[b], per_clip[b], g_in[b]);
    });
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < bg.weight.size(); ++i) bg.weight[i] += per_clip[b].weight[i];
      for (std::size_t c = 0; c < C; ++c) bg.bias[c] += per_clip[b].bias[c];
    }
    g = std::move(g_in);
  }
  grads.input.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    grads.input[b] = Matrix<T>(g[b].height, g[b].width);
    grads.input[b].data = std::move(g[b].data);
  }
  return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
AttentionPoolParams<T> init_attention(std::size_t in_dim, std::size_t attn_dim,
                                      std::mt19937_64& rng) {
  if (in_dim == 0 || attn_dim == 0) {
    throw ConfigError("attention dimensions must be positive");
  }
  AttentionPoolParams<T> p;
  p.in_dim = in_dim;
  p.attn_dim = attn_dim;
  p.out_dim = in_dim;
  p.temperature = 1.0 / std::sqrt(static_cast<double>(attn_dim));
  std::normal_distribution<double> nq(0.0, 1.0 / std::sqrt(static_cast<double>(attn_dim)));
  std::normal_distribution<double> nw(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  p.query.resize(attn_dim);
  for (auto& v : p.query) v = static_cast<T>(nq(rng));
  p.key_weight.resize(attn_dim * in_dim);
  for (auto& v : p.key_weight) v = static_cast<T>(nw(rng));
  p.value_weight.resize(p.out_dim * in_dim);
  for (auto& v : p.value_weight) v = static_cast<T>(nw(rng));
  p.value_bias.assign(p.out_dim, T(0));
  return p;
}

template <typename T>
PooledEmbedding<T> attention_pool(const FeatureMap<T>& f,
                                  const AttentionPoolParams<T>& p) {
  const std::size_t C = f.channels, P = f.spatial();
  if (C != p.in_dim || P == 0) {
    throw InputError("attention pooling input has the wrong channel count");
  }
  // score_p = temperature * <W_k^T q, f_p>
  std::vector<double> kq(C, 0.0);
  for (std::size_t a = 0; a < p.attn_dim; ++a) {
    for (std::size_t c = 0; c < C; ++c) {
      kq[c] += static_cast<double>(p.key_weight[a * C + c]) * p.query[a];
    }
  }
  std::vector<double> score(P, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = f.plane(c);
    for (std::size_t q = 0; q < P; ++q) score[q] += kq[c] * plane[q];
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < P; ++q) {
    score[q] *= p.temperature;
    if (!std::isfinite(score[q])) {
      std::ostringstream msg;
      msg << "non-finite attention score at position (" << q / f.width << ", "
          << q % f.width << ")";
      throw NumericalError(msg.str());
    }
    mx = std::max(mx, score[q]);
  }
  double z = 0.0;
  for (auto& s : score) {
    s = std::exp(s - mx);
    z += s;
  }
  PooledEmbedding<T> out;
  out.weights.resize(P);
  std::vector<double> pooled(C, 0.0);
  for (std::size_t q = 0; q < P; ++q) {
    out.weights[q] = static_cast<T>(score[q] / z);
  }
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = f.plane(c);
    for (std::size_t q = 0; q < P; ++q) {
      pooled[c] += score[q] / z * plane[q];
    }
  }
  out.embedding.resize(p.out_dim);
  for (std::size_t e = 0; e < p.out_dim; ++e) {
    double acc = p.value_bias[e];
    for (std::size_t c = 0; c < C; ++c) {
      acc += static_cast<double>(p.value_weight[e * C + c]) * pooled[c];
    }
    out.embedding[e] = static_cast<T>(acc);
  }
  return out;
}

template <typename T>
AttentionGrads<T> attention_pool_backward(std::span<const T> grad_embedding,
                                          const FeatureMap<T>& f,
                                          const AttentionPoolParams<T>& p,
                                          const PooledEmbedding<T>& fwd) {
  const std::size_t C = f.channels, P = f.spatial(), E = p.out_dim;
  if (grad_embedding.size() != E || fwd.weights.size() != P) {
    throw InternalError("attention backward shape mismatch");
  }
  AttentionGrads<T> g;
  g.value_bias.assign(grad_embedding.begin(), grad_embedding.end());
  // Wv^T g, and pooled input f_bar = sum_p a_p f_p
  std::vector<double> wtg(C, 0.0), fbar(C, 0.0);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t c = 0; c < C; ++c) {
      wtg[c] += static_cast<double>(p.value_weight[e * C + c]) * grad_embedding[e];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = f.plane(c);
    for (std::size_t q = 0; q < P; ++q) fbar[c] += static_cast<double>(fwd.weights[q]) * plane[q];
  }
  g.value_weight.resize(E * C);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t c = 0; c < C; ++c) {
      g.value_weight[e * C + c] = static_cast<T>(grad_embedding[e] * fbar[c]);
    }
  }
  // dL/da_p = <g, v_p> = <Wv^T g, f_p> + <g, b>; the bias term cancels in
  // the softmax Jacobian.
  std::vector<double> da(P, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = f.plane(c);
    for (std::size_t q = 0; q < P; ++q) da[q] += wtg[c] * plane[q];
  }
  double mean_da = 0.0;
  for (std::size_t q = 0; q < P; ++q) mean_da += fwd.weights[q] * da[q];
  std::vector<double> dscore(P);
  for (std::size_t q = 0; q < P; ++q) {
    dscore[q] = fwd.weights[q] * (da[q] - mean_da) * p.temperature;
  }
  // s_p = temp * <q, Wk f_p>
  std::vector<double> fs(C, 0.0);  // sum_p dscore_p f_p
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = f.plane(c);
    for (std::size_t q = 0; q < P; ++q) fs[c] += dscore[q] * plane[q];
  }
  g.query.assign(p.attn_dim, T(0));
  g.key_weight.resize(p.attn_dim * C);
  std::vector<double> kq(C, 0.0);
  for (std::size_t a = 0; a < p.attn_dim; ++a) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      acc += static_cast<double>(p.key_weight[a * C + c]) * fs[c];
      g.key_weight[a * C + c] = static_cast<T>(p.query[a] * fs[c]);
      kq[c] += static_cast<double>(p.key_weight[a * C + c]) * p.query[a];
    }
    g.query[a] = static_cast<T>(acc);
  }
  g.features = FeatureMap<T>(C, f.height, f.width);
  for (std::size_t c = 0; c < C; ++c) {
    auto plane = g.features.plane(c);
    for (std::size_t q = 0; q < P; ++q) {
      plane[q] = static_cast<T>(fwd.weights[q] * wtg[c] + dscore[q] * kq[c]);
    }
  }
  return g;
}

template <typename T>
PooledEmbedding<T> max_pool_global(const FeatureMap<T>& f) {
  PooledEmbedding<T> out;
  out.embedding.resize(f.channels);
  out.argmax.resize(f.channels);
  for (std::size_t c = 0; c < f.channels; ++c) {
    auto plane = f.plane(c);
    std::size_t best = 0;
    for (std::size_t q = 1; q < plane.size(); ++q) {
      if (plane[q] > plane[best]) best = q;
    }
    out.embedding[c] = plane[best];
    out.argmax[c] = best;
  }
  return out;
}

template <typename T>
FeatureMap<T> max_pool_global_backward(std::span<const T> grad_embedding,
                                       const FeatureMap<T>& f,
                                       const PooledEmbedding<T>& fwd) {
  if (grad_embedding.size() != f.channels || fwd.argmax.size() != f.channels) {
    throw InternalError("max pooling backward shape mismatch");
  }
  FeatureMap<T> g(f.channels, f.height, f.width);
  for (std::size_t c = 0; c < f.channels; ++c) {
    g.plane(c)[fwd.argmax[c]] = grad_embedding[c];
  }
  return g;
}

#define SONARLEAF_INSTANTIATE_ENCODER(T)                                       \
  template EncoderParams<T> init_encoder<T>(const EncoderConfig&,              \
                                            std::mt19937_64&);                 \
  template std::vector<FeatureMap<T>> encode<T>(                               \
      const std::vector<TimeFreqMap<T>>&, EncoderParams<T>&, Mode,             \
      EncoderCache<T>*, bool);                                                 \
  template EncoderGrads<T> encode_backward<T>(                                 \
      const std::vector<FeatureMap<T>>&, const EncoderParams<T>&,              \
      const EncoderCache<T>&);                                                 \
  template AttentionPoolParams<T> init_attention<T>(std::size_t, std::size_t,  \
                                                    std::mt19937_64&);         \
  template PooledEmbedding<T> attention_pool<T>(const FeatureMap<T>&,          \
                                                const AttentionPoolParams<T>&);\
  template AttentionGrads<T> attention_pool_backward<T>(                       \
      std::span<const T>, const FeatureMap<T>&, const AttentionPoolParams<T>&, \
      const PooledEmbedding<T>&);                                              \
  template PooledEmbedding<T> max_pool_global<T>(const FeatureMap<T>&);        \
  template FeatureMap<T> max_pool_global_backward<T>(                          \
      std::span<const T>, const FeatureMap<T>&, const PooledEmbedding<T>&);

SONARLEAF_INSTANTIATE_ENCODER(float)
SONARLEAF_INSTANTIATE_ENCODER(double)

}  // namespace sonarleaf
