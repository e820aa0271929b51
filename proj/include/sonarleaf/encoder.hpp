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

#ifndef SONARLEAF_ENCODER_HPP
#define SONARLEAF_ENCODER_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sonarleaf/frontend.hpp"
#include "sonarleaf/tensor.hpp"

namespace sonarleaf {

// Small strided CNN over the normalized filterbank output (treated as a
// one-channel image: filters x frames), followed by one of two pooling heads.

template <typename T>
using FeatureMap = Tensor3<T>;

struct EncoderConfig {
  std::vector<int> channels{16, 32, 64};
  double eps = 1e-5;
  double momentum = 0.1;
};

/// 3x3 convolution, stride 2, zero padding 1, then batch norm over
/// (batch x height x width) per channel, then ReLU.
template <typename T>
struct ConvBlockParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<T> weight;  // out x in x 3 x 3
  std::vector<T> bias;
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::int64_t tracked_batches = 0;
};

template <typename T>
struct EncoderParams {
  std::vector<ConvBlockParams<T>> blocks;
  double eps = 1e-5;
  double momentum = 0.1;

  std::size_t out_channels() const {
    return blocks.empty() ? 1 : blocks.back().out_channels;
  }
};

template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config, std::mt19937_64& rng);

/// Spatial size after the configured number of stride-2 blocks (ceil rule).
std::pair<std::size_t, std::size_t> encoder_output_dims(std::size_t blocks,
                                                        std::size_t height,
                                                        std::size_t width);

template <typename T>
struct EncoderCache {
  Mode mode = Mode::kTrain;
  // Per block: the block input, the pre-affine normalized conv output and
  // the post-ReLU output, for every clip in the batch.
  std::vector<std::vector<FeatureMap<T>>> inputs;
  std::vector<std::vector<FeatureMap<T>>> normalized;
  std::vector<std::vector<FeatureMap<T>>> outputs;
  std::vector<std::vector<T>> inv_std;
};

template <typename T>
struct ConvBlockGrads {
  std::vector<T> weight, bias, gamma, beta;
};

template <typename T>
struct EncoderGrads {
  std::vector<ConvBlockGrads<T>> blocks;
  std::vector<Matrix<T>> input;
};

template <typename T>
std::vector<FeatureMap<T>> encode(const std::vector<TimeFreqMap<T>>& input,
                                  EncoderParams<T>& params, Mode mode,
                                  EncoderCache<T>* cache = nullptr,
                                  bool update_stats = true);

template <typename T>
EncoderGrads<T> encode_backward(const std::vector<FeatureMap<T>>& grad_out,
                                const EncoderParams<T>& params,
                                const EncoderCache<T>& cache);

// ---------------------------------------------------------------------------
// Pooling heads

template <typename T>
struct AttentionPoolParams {
  std::size_t in_dim = 0;    // encoder channels
  std::size_t attn_dim = 64;
  std::size_t out_dim = 0;   // embedding size (value projection output)
  std::vector<T> query;         // attn_dim
  std::vector<T> key_weight;    // attn_dim x in_dim
  std::vector<T> value_weight;  // out_dim x in_dim
  std::vector<T> value_bias;    // out_dim
  double temperature = 0.125;
};

template <typename T>
AttentionPoolParams<T> init_attention(std::size_t in_dim, std::size_t attn_dim,
                                      std::mt19937_64& rng);

template <typename T>
struct PooledEmbedding {
  std::vector<T> embedding;
  std::vector<T> weights;         // attention: F' x T' simplex, row-major
  std::vector<std::size_t> argmax;  // max pooling: flat index per channel
};

template <typename T>
PooledEmbedding<T> attention_pool(const FeatureMap<T>& features,
                                  const AttentionPoolParams<T>& params);

template <typename T>
struct AttentionGrads {
  std::vector<T> query, key_weight, value_weight, value_bias;
  FeatureMap<T> features;
};

template <typename T>
AttentionGrads<T> attention_pool_backward(std::span<const T> grad_embedding,
                                          const FeatureMap<T>& features,
                                          const AttentionPoolParams<T>& params,
                                          const PooledEmbedding<T>& forward);

template <typename T>
PooledEmbedding<T> max_pool_global(const FeatureMap<T>& features);

template <typename T>
FeatureMap<T> max_pool_global_backward(std::span<const T> grad_embedding,
                                       const FeatureMap<T>& features,
                                       const PooledEmbedding<T>& forward);

}  // namespace sonarleaf

#endif  // SONARLEAF_ENCODER_HPP
