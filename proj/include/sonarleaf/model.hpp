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

#ifndef SONARLEAF_MODEL_HPP
#define SONARLEAF_MODEL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonarleaf/encoder.hpp"
#include "sonarleaf/frontend.hpp"
#include "sonarleaf/head.hpp"

namespace sonarleaf {

enum class PoolingMode { kAttention, kMax };

const char* pooling_name(PoolingMode mode);
PoolingMode parse_pooling(std::string_view name);

struct ModelConfig {
  FilterbankConfig frontend;
  EncoderConfig encoder;
  PoolingMode pooling = PoolingMode::kAttention;
  bool use_ctdsv = true;
  int attn_dim = 64;
  int meta_hidden = 16;
  double clip_seconds = 1.0;

  std::size_t clip_samples() const;
  /// Throws ConfigError describing the first invalid field.
  void validate() const;
};

bool same_architecture(const ModelConfig& a, const ModelConfig& b);

template <typename T>
struct ModelState {
  ModelConfig config;
  FrontendParams<T> frontend;
  EncoderParams<T> encoder;
  AttentionPoolParams<T> attention;  // empty under max pooling
  HeadParams<T> head;
  CtdsvStats ctdsv;
};

template <typename T>
ModelState<T> init_model(const ModelConfig& config, std::uint64_t seed);

/// A named, flat view of one parameter tensor inside a ModelState.
template <typename T>
struct ParamGroup {
  std::string name;
  std::vector<T>* values;
};

/// Every trainable tensor, in a fixed order shared by gradients, optimizer
/// moments and checkpoints.
template <typename T>
std::vector<ParamGroup<T>> trainable_groups(ModelState<T>& model);

/// Running normalization statistics (saved, never trained).
template <typename T>
std::vector<ParamGroup<T>> buffer_groups(ModelState<T>& model);

/// Same shapes as `model`, every trainable and buffer value zero.
template <typename T>
ModelState<T> zeros_like(const ModelState<T>& model);

template <typename T>
struct Batch {
  std::vector<std::span<const T>> audio;
  std::vector<std::array<T, kCtdsvDim>> ctdsv;  // normalized
  std::vector<std::size_t> labels;                // may be empty at inference
};

template <typename T>
struct BatchOutput {
  double loss = 0.0;  // mean cross-entropy; 0 when no labels were given
  std::vector<std::vector<T>> logits;
};

template <typename T>
BatchOutput<T> model_forward(ModelState<T>& model, const Batch<T>& batch,
                             Mode mode, bool update_stats = false);

/// Forward plus full backward. Gradients of the mean batch loss are written
/// into `grads`, which must come from zeros_like(model).
template <typename T>
BatchOutput<T> model_loss_and_grad(ModelState<T>& model, const Batch<T>& batch,
                                   Mode mode, bool update_stats,
                                   ModelState<T>& grads);

}  // namespace sonarleaf

#endif  // SONARLEAF_MODEL_HPP
