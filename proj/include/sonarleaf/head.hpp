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

#ifndef SONARLEAF_HEAD_HPP
#define SONARLEAF_HEAD_HPP

#include <array>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sonarleaf {

enum class ClassLabel : int {
  kTug = 0,
  kTanker = 1,
  kCargo = 2,
  kPassengership = 3,
  kBackground = 4,
};

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::size_t kCtdsvDim = 5;

const char* class_name(ClassLabel label);
/// Throws InputError for names outside the five classes.
ClassLabel parse_class_label(std::string_view name);

/// Conductivity, temperature, depth, salinity and sound velocity. Raw units
/// are S/m, deg C, m, PSU and m/s; after normalization each is a z-score.
struct CtdsvVector {
  double conductivity = 0.0;
  double temperature = 0.0;
  double depth = 0.0;
  double salinity = 0.0;
  double sound_velocity = 0.0;

  std::array<double, kCtdsvDim> values() const {
    return {conductivity, temperature, depth, salinity, sound_velocity};
  }
  static CtdsvVector from_values(const std::array<double, kCtdsvDim>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
};

/// Per-field z-score statistics, fitted on the training split.
struct CtdsvStats {
  std::array<double, kCtdsvDim> mean{0, 0, 0, 0, 0};
  std::array<double, kCtdsvDim> stddev{1, 1, 1, 1, 1};

  std::array<double, kCtdsvDim> apply(const CtdsvVector& raw) const {
    auto v = raw.values();
    for (std::size_t i = 0; i < kCtdsvDim; ++i) v[i] = (v[i] - mean[i]) / stddev[i];
    return v;
  }
};

template <typename T>
struct HeadParams {
  bool use_ctdsv = true;
  std::size_t embed_dim = 0;
  std::size_t meta_hidden = 16;
  std::size_t num_classes = kNumClasses;
  // meta branch: 5 -> hidden (ReLU) -> hidden
  std::vector<T> meta_w1, meta_b1, meta_w2, meta_b2;
  // classifier over concat(audio, meta)
  std::vector<T> fc_w, fc_b;

  std::size_t meta_dim() const { return use_ctdsv ? meta_hidden : 0; }
  std::size_t fc_in() const { return embed_dim + meta_dim(); }
};

template <typename T>
HeadParams<T> init_head(std::size_t embed_dim, bool use_ctdsv,
                        std::size_t meta_hidden, std::mt19937_64& rng);

template <typename T>
struct MetaCache {
  std::vector<T> input;
  std::vector<T> hidden;  // post-ReLU
};

template <typename T>
std::vector<T> meta_branch(std::span<const T> ctdsv, const HeadParams<T>& params,
                           MetaCache<T>* cache = nullptr);

template <typename T>
struct MetaGrads {
  std::vector<T> w1, b1, w2, b2;
};

template <typename T>
MetaGrads<T> meta_branch_backward(std::span<const T> grad_out,
                                  const HeadParams<T>& params,
                                  const MetaCache<T>& cache);

/// Logits of the linear classifier; meta must be empty when CTDSV fusion is
/// off and of size meta_hidden when it is on.
template <typename T>
std::vector<T> classify(std::span<const T> audio, std::span<const T> meta,
                        const HeadParams<T>& params);

template <typename T>
struct ClassifyGrads {
  std::vector<T> fc_w, fc_b, audio, meta;
};

template <typename T>
ClassifyGrads<T> classify_backward(std::span<const T> grad_logits,
                                   std::span<const T> audio,
                                   std::span<const T> meta,
                                   const HeadParams<T>& params);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad;  // softmax - onehot
};

template <typename T>
CrossEntropy cross_entropy(std::span<const T> logits, std::size_t label);

template <typename T>
std::vector<double> softmax(std::span<const T> logits);

/// Argmax with ties resolved toward the lower class index.
template <typename T>
std::size_t predict(std::span<const T> logits);

}  // namespace sonarleaf

#endif  // SONARLEAF_HEAD_HPP
