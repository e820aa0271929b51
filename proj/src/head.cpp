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

#include "sonarleaf/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sonarleaf/error.hpp"

namespace sonarleaf {

namespace {
constexpr std::array<const char*, kNumClasses> kClassNames = {
    "Tug", "Tanker", "Cargo", "Passengership", "Background"};
}

const char* class_name(ClassLabel label) {
  return kClassNames.at(static_cast<std::size_t>(label));
}

ClassLabel parse_class_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (name == kClassNames[i]) return static_cast<ClassLabel>(i);
  }
  throw InputError("unknown class label '" + std::string(name) + "'");
}

template <typename T>
HeadParams<T> init_head(std::size_t embed_dim, bool use_ctdsv,
                        std::size_t meta_hidden, std::mt19937_64& rng) {
  if (embed_dim == 0) throw ConfigError("embedding dimension must be positive");
  HeadParams<T> p;
  p.use_ctdsv = use_ctdsv;
  p.embed_dim = embed_dim;
  p.meta_hidden = meta_hidden;
  auto fill = [&rng](std::vector<T>& w, std::size_t n, std::size_t fan_in) {
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    w.resize(n);
    for (auto& v : w) v = static_cast<T>(nd(rng));
  };
  if (use_ctdsv) {
    if (meta_hidden == 0) throw ConfigError("meta branch width must be positive");
    fill(p.meta_w1, meta_hidden * kCtdsvDim, kCtdsvDim);
    p.meta_b1.assign(meta_hidden, T(0));
    fill(p.meta_w2, meta_hidden * meta_hidden, meta_hidden);
    p.meta_b2.assign(meta_hidden, T(0));
  }
  fill(p.fc_w, p.num_classes * p.fc_in(), p.fc_in());
  p.fc_b.assign(p.num_classes, T(0));
  return p;
}

template <typename T>
std::vector<T> meta_branch(std::span<const T> ctdsv, const HeadParams<T>& p,
                           MetaCache<T>* cache) {
  if (!p.use_ctdsv) {
    throw ConfigError("meta branch called with CTDSV fusion disabled");
  }
  if (ctdsv.size() != kCtdsvDim) throw InputError("CTDSV vector must have 5 fields");
  const std::size_t H = p.meta_hidden;
  std::vector<T> hidden(H);
  for (std::size_t h = 0; h < H; ++h) {
    double acc = p.meta_b1[h];
    for (std::size_t i = 0; i < kCtdsvDim; ++i) {
      acc += static_cast<double>(p.meta_w1[h * kCtdsvDim + i]) * ctdsv[i];
    }
    hidden[h] = acc > 0.0 ? static_cast<T>(acc) : T(0);
  }
  std::vector<T> out(H);
  for (std::size_t o = 0; o < H; ++o) {
    double acc = p.meta_b2[o];
    for (std::size_t h = 0; h < H; ++h) {
      acc += static_cast<double>(p.meta_w2[o * H + h]) * hidden[h];
    }
    out[o] = static_cast<T>(acc);
  }
  if (cache != nullptr) {
    cache->input.assign(ctdsv.begin(), ctdsv.end());
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
MetaGrads<T> meta_branch_backward(std::span<const T> grad_out,
                                  const HeadParams<T>& p,
                                  const MetaCache<T>& cache) {
  const std::size_t H = p.meta_hidden;
  if (grad_out.size() != H || cache.hidden.size() != H) {
    throw InternalError("meta branch backward shape mismatch");
  }
  MetaGrads<T> g;
  g.b2.assign(grad_out.begin(), grad_out.end());
  g.w2.resize(H * H);
  std::vector<double> gh(H, 0.0);
  for (std::size_t o = 0; o < H; ++o) {
    for (std::size_t h = 0; h < H; ++h) {
      g.w2[o * H + h] = grad_out[o] * cache.hidden[h];
      gh[h] += static_cast<double>(p.meta_w2[o * H + h]) * grad_out[o];
    }
  }
  g.b1.resize(H);
  g.w1.resize(H * kCtdsvDim);
  for (std::size_t h = 0; h < H; ++h) {
    const T gz = cache.hidden[h] > T(0) ? static_cast<T>(gh[h]) : T(0);
    g.b1[h] = gz;
    for (std::size_t i = 0; i < kCtdsvDim; ++i) {
      g.w1[h * kCtdsvDim + i] = gz * cache.input[i];
    }
  }
  return g;
}

template <typename T>
std::vector<T> classify(std::span<const T> audio, std::span<const T> meta,
                        const HeadParams<T>& p) {
  if (audio.size() != p.embed_dim || meta.size() != p.meta_dim()) {
    throw ConfigError("classifier input does not match the fusion mode");
  }
  const std::size_t in = p.fc_in();
  std::vector<T> logits(p.num_classes);
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    const T* w = p.fc_w.data() + c * in;
    double acc = p.fc_b[c];
    for (std::size_t i = 0; i < audio.size(); ++i) acc += static_cast<double>(w[i]) * audio[i];
    for (std::size_t i = 0; i < meta.size(); ++i) {
      acc += static_cast<double>(w[p.embed_dim + i]) * meta[i];
    }
    logits[c] = static_cast<T>(acc);
  }
  return logits;
}

template <typename T>
ClassifyGrads<T> classify_backward(std::span<const T> grad_logits,
                                   std::span<const T> audio,
                                   std::span<const T> meta,
                                   const HeadParams<T>& p) {
  const std::size_t in = p.fc_in();
  if (grad_logits.size() != p.num_classes || audio.size() != p.embed_dim ||
      meta.size() != p.meta_dim()) {
    throw InternalError("classifier backward shape mismatch");
  }
  ClassifyGrads<T> g;
  g.fc_b.assign(grad_logits.begin(), grad_logits.end());
  g.fc_w.resize(p.num_classes * in);
  g.audio.assign(audio.size(), T(0));
  g.meta.assign(meta.size(), T(0));
  for (std::size_t c = 0; c < p.num_classes; ++c) {
    const T gc = grad_logits[c];
    T* gw = g.fc_w.data() + c * in;
    const T* w = p.fc_w.data() + c * in;
    for (std::size_t i = 0; i < audio.size(); ++i) {
      gw[i] = gc * audio[i];
      g.audio[i] += w[i] * gc;
    }
    for (std::size_t i = 0; i < meta.size(); ++i) {
      gw[p.embed_dim + i] = gc * meta[i];
      g.meta[i] += w[p.embed_dim + i] * gc;
    }
  }
  return g;
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const T v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

template <typename T>
CrossEntropy cross_entropy(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size()) throw InputError("label index out of range");
  for (const T v : logits) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericalError("non-finite logit in cross-entropy");
    }
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (const T v : logits) mx = std::max(mx, static_cast<double>(v));
  double z = 0.0;
  for (const T v : logits) z += std::exp(static_cast<double>(v) - mx);
  const double log_z = mx + std::log(z);
  CrossEntropy out;
  out.loss = log_z - static_cast<double>(logits[label]);
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = std::exp(static_cast<double>(logits[i]) - log_z) -
                  (i == label ? 1.0 : 0.0);
  }
  return out;
}

template <typename T>
std::size_t predict(std::span<const T> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

#define SONARLEAF_INSTANTIATE_HEAD(T)                                         \
  template HeadParams<T> init_head<T>(std::size_t, bool, std::size_t,         \
                                      std::mt19937_64&);                      \
  template std::vector<T> meta_branch<T>(std::span<const T>,                  \
                                         const HeadParams<T>&, MetaCache<T>*);\
  template MetaGrads<T> meta_branch_backward<T>(                              \
      std::span<const T>, const HeadParams<T>&, const MetaCache<T>&);         \
  template std::vector<T> classify<T>(std::span<const T>, std::span<const T>, \
                                      const HeadParams<T>&);                  \
  template ClassifyGrads<T> classify_backward<T>(                             \
      std::span<const T>, std::span<const T>, std::span<const T>,             \
      const HeadParams<T>&);                                                  \
  template CrossEntropy cross_entropy<T>(std::span<const T>, std::size_t);    \
  template std::vector<double> softmax<T>(std::span<const T>);                \
  template std::size_t predict<T>(std::span<const T>);

SONARLEAF_INSTANTIATE_HEAD(float)
SONARLEAF_INSTANTIATE_HEAD(double)

}  // namespace sonarleaf
