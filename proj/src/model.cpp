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

#include "sonarleaf/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "sonarleaf/error.hpp"
#include "sonarleaf/parallel.hpp"

namespace sonarleaf {

const char* pooling_name(PoolingMode mode) {
  return mode == PoolingMode::kAttention ? "attention" : "max";
}

PoolingMode parse_pooling(std::string_view name) {
  if (name == "attention") return PoolingMode::kAttention;
  if (name == "max") return PoolingMode::kMax;
  throw ConfigError("pooling must be 'attention' or 'max', got '" +
                    std::string(name) + "'");
}

std::size_t ModelConfig::clip_samples() const {
  return static_cast<std::size_t>(std::llround(clip_seconds * frontend.sample_rate));
}

void ModelConfig::validate() const {
  if (!(clip_seconds > 0.0)) throw ConfigError("clip length must be positive");
  if (frontend.kernel_width < 3 || frontend.kernel_width % 2 == 0) {
    throw ConfigError("kernel width must be odd and at least 3");
  }
  if (clip_samples() < static_cast<std::size_t>(frontend.kernel_width)) {
    throw ConfigError("clip is shorter than the Gabor kernel");
  }
  if (frontend.hop_ms <= 0.0 || frontend.window_ms <= 0.0) {
    throw ConfigError("hop and window lengths must be positive");
  }
  if (encoder.channels.empty()) throw ConfigError("encoder needs at least one block");
  for (int c : encoder.channels) {
    if (c < 1) throw ConfigError("encoder channel widths must be positive");
  }
  if (attn_dim < 1) throw ConfigError("attention dimension must be positive");
  if (meta_hidden < 1) throw ConfigError("meta branch width must be positive");
  // init_filterbank performs the remaining frequency-range checks.
  (void)init_filterbank<double>(frontend);
}

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.frontend.num_filters == b.frontend.num_filters &&
         a.frontend.sample_rate == b.frontend.sample_rate &&
         a.frontend.kernel_width == b.frontend.kernel_width &&
         a.encoder.channels == b.encoder.channels && a.pooling == b.pooling &&
         a.use_ctdsv == b.use_ctdsv && a.attn_dim == b.attn_dim &&
         a.meta_hidden == b.meta_hidden && a.clip_samples() == b.clip_samples();
}

template <typename T>
ModelState<T> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelState<T> m;
  m.config = config;
  m.frontend = init_filterbank<T>(config.frontend);
  m.encoder = init_encoder<T>(config.encoder, rng);
  const std::size_t channels = m.encoder.out_channels();
  if (config.pooling == PoolingMode::kAttention) {
    m.attention = init_attention<T>(channels, static_cast<std::size_t>(config.attn_dim), rng);
  }
  m.head = init_head<T>(channels, config.use_ctdsv,
                        static_cast<std::size_t>(config.meta_hidden), rng);
  return m;
}

template <typename T>
std::vector<ParamGroup<T>> trainable_groups(ModelState<T>& m) {
  std::vector<ParamGroup<T>> g;
  auto& fe = m.frontend;
  g.push_back({"frontend.mu", &fe.gabor.mu});
  g.push_back({"frontend.sigma", &fe.gabor.sigma});
  g.push_back({"frontend.rho", &fe.pooling.rho});
  g.push_back({"frontend.log_gain", &fe.compression.log_gain});
  g.push_back({"frontend.gamma", &fe.compression.gamma});
  g.push_back({"frontend.beta", &fe.compression.beta});
  for (std::size_t l = 0; l < m.encoder.blocks.size(); ++l) {
    auto& b = m.encoder.blocks[l];
    const std::string p = "encoder.block" + std::to_string(l) + ".";
    g.push_back({p + "weight", &b.weight});
    g.push_back({p + "bias", &b.bias});
    g.push_back({p + "gamma", &b.gamma});
    g.push_back({p + "beta", &b.beta});
  }
  if (m.config.pooling == PoolingMode::kAttention) {
    g.push_back({"attention.query", &m.attention.query});
    g.push_back({"attention.key_weight", &m.attention.key_weight});
    g.push_back({"attention.value_weight", &m.attention.value_weight});
    g.push_back({"attention.value_bias", &m.attention.value_bias});
  }
  if (m.head.use_ctdsv) {
    g.push_back({"head.meta_w1", &m.head.meta_w1});
    g.push_back({"head.meta_b1", &m.head.meta_b1});
    g.push_back({"head.meta_w2", &m.head.meta_w2});
    g.push_back({"head.meta_b2", &m.head.meta_b2});
  }
  g.push_back({"head.fc_w", &m.head.fc_w});
  g.push_back({"head.fc_b", &m.head.fc_b});
  return g;
}

template <typename T>
std::vector<ParamGroup<T>> buffer_groups(ModelState<T>& m) {
  std::vector<ParamGroup<T>> g;
  g.push_back({"frontend.running_mean", &m.frontend.compression.running_mean});
  g.push_back({"frontend.running_var", &m.frontend.compression.running_var});
  for (std::size_t l = 0; l < m.encoder.blocks.size(); ++l) {
    auto& b = m.encoder.blocks[l];
    const std::string p = "encoder.block" + std::to_string(l) + ".";
    g.push_back({p + "running_mean", &b.running_mean});
    g.push_back({p + "running_var", &b.running_var});
  }
  return g;
}

template <typename T>
ModelState<T> zeros_like(const ModelState<T>& model) {
  ModelState<T> z = model;
  for (auto& grp : trainable_groups(z)) std::fill(grp.values->begin(), grp.values->end(), T(0));
  for (auto& grp : buffer_groups(z)) std::fill(grp.values->begin(), grp.values->end(), T(0));
  return z;
}

namespace {

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  if (dst.size() != src.size()) throw InternalError("gradient shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void check_batch(const ModelState<T>& m, const Batch<T>& batch) {
  if (batch.audio.empty()) throw InputError("empty batch");
  const std::size_t n = m.config.clip_samples();
  for (const auto& a : batch.audio) {
    if (a.size() != n) {
      std::ostringstream msg;
      msg << "clip has " << a.size() << " samples, model expects " << n;
      throw InputError(msg.str());
    }
  }
  if (m.head.use_ctdsv && batch.ctdsv.size() != batch.audio.size()) {
    throw InputError("CTDSV fusion is enabled but the batch has no CTDSV rows");
  }
  if (!batch.labels.empty() && batch.labels.size() != batch.audio.size()) {
    throw InputError("label count does not match batch size");
  }
}

template <typename T>
struct HeadState {
  PooledEmbedding<T> pooled;
  MetaCache<T> meta_cache;
  std::vector<T> meta;
  std::vector<T> logits;
  CrossEntropy ce;
};

template <typename T>
BatchOutput<T> run(ModelState<T>& m, const Batch<T>& batch, Mode mode,
                   bool update_stats, ModelState<T>* grads) {
  check_batch(m, batch);
  const std::size_t B = batch.audio.size();
  const bool attention = m.config.pooling == PoolingMode::kAttention;
  const bool labelled = !batch.labels.empty();

  FrontendCache<T> fcache;
  EncoderCache<T> ecache;
  auto maps = frontend_forward(batch.audio, m.frontend, mode,
                               grads ? &fcache : nullptr, update_stats);
  auto feats = encode(maps, m.encoder, mode, grads ? &ecache : nullptr, update_stats);

  std::vector<HeadState<T>> hs(B);
  parallel_for(B, [&](std::size_t b) {
    auto& h = hs[b];
    h.pooled = attention ? attention_pool(feats[b], m.attention)
                         : max_pool_global(feats[b]);
    if (m.head.use_ctdsv) {
      h.meta = meta_branch<T>(batch.ctdsv[b], m.head, grads ? &h.meta_cache : nullptr);
    }
    h.logits = classify<T>(h.pooled.embedding, h.meta, m.head);
    if (labelled) h.ce = cross_entropy<T>(h.logits, batch.labels[b]);
  });

  BatchOutput<T> out;
  out.logits.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    out.logits[b] = hs[b].logits;
    out.loss += hs[b].ce.loss;
  }
  out.loss /= static_cast<double>(B);
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
  if (grads == nullptr) return out;
  if (!labelled) throw InputError("gradients requested without labels");

  const double scale = 1.0 / static_cast<double>(B);
  struct ClipGrads {
    ClassifyGrads<T> fc;
    MetaGrads<T> meta;
    AttentionGrads<T> attn;
  };
  std::vector<ClipGrads> cg(B);
  std::vector<FeatureMap<T>> grad_feats(B);
  parallel_for(B, [&](std::size_t b) {
    auto& h = hs[b];
    std::vector<T> gl(h.ce.grad.size());
    for (std::size_t i = 0; i < gl.size(); ++i) gl[i] = static_cast<T>(h.ce.grad[i] * scale);
    cg[b].fc = classify_backward<T>(gl, h.pooled.embedding, h.meta, m.head);
    if (m.head.use_ctdsv) {
      cg[b].meta = meta_branch_backward<T>(cg[b].fc.meta, m.head, h.meta_cache);
    }
    if (attention) {
      cg[b].attn = attention_pool_backward<T>(cg[b].fc.audio, feats[b], m.attention, h.pooled);
      grad_feats[b] = std::move(cg[b].attn.features);
    } else {
      grad_feats[b] = max_pool_global_backward<T>(cg[b].fc.audio, feats[b], h.pooled);
    }
  });
  for (std::size_t b = 0; b < B; ++b) {
    accumulate(grads->head.fc_w, cg[b].fc.fc_w);
    accumulate(grads->head.fc_b, cg[b].fc.fc_b);
    if (m.head.use_ctdsv) {
      accumulate(grads->head.meta_w1, cg[b].meta.w1);
      accumulate(grads->head.meta_b1, cg[b].meta.b1);
      accumulate(grads->head.meta_w2, cg[b].meta.w2);
      accumulate(grads->head.meta_b2, cg[b].meta.b2);
    }
    if (attention) {
      accumulate(grads->attention.query, cg[b].attn.query);
      accumulate(grads->attention.key_weight, cg[b].attn.key_weight);
      accumulate(grads->attention.value_weight, cg[b].attn.value_weight);
      accumulate(grads->attention.value_bias, cg[b].attn.value_bias);
    }
  }

  auto eg = encode_backward(grad_feats, m.encoder, ecache);
  for (std::size_t l = 0; l < eg.blocks.size(); ++l) {
    auto& dst = grads->encoder.blocks[l];
    accumulate(dst.weight, eg.blocks[l].weight);
    accumulate(dst.bias, eg.blocks[l].bias);
    accumulate(dst.gamma, eg.blocks[l].gamma);
    accumulate(dst.beta, eg.blocks[l].beta);
  }
  auto fg = frontend_backward(eg.input, m.frontend, fcache);
  auto& gf = grads->frontend;
  accumulate(gf.gabor.mu, fg.mu);
  accumulate(gf.gabor.sigma, fg.sigma);
  accumulate(gf.pooling.rho, fg.rho);
  accumulate(gf.compression.log_gain, fg.log_gain);
  accumulate(gf.compression.gamma, fg.gamma);
  accumulate(gf.compression.beta, fg.beta);
  return out;
}

}  // namespace

template <typename T>
BatchOutput<T> model_forward(ModelState<T>& model, const Batch<T>& batch,
                             Mode mode, bool update_stats) {
  return run<T>(model, batch, mode, update_stats, nullptr);
}

template <typename T>
BatchOutput<T> model_loss_and_grad(ModelState<T>& model, const Batch<T>& batch,
                                   Mode mode, bool update_stats,
                                   ModelState<T>& grads) {
  return run<T>(model, batch, mode, update_stats, &grads);
}

#define SONARLEAF_INSTANTIATE_MODEL(T)                                        \
  template ModelState<T> init_model<T>(const ModelConfig&, std::uint64_t);    \
  template std::vector<ParamGroup<T>> trainable_groups<T>(ModelState<T>&);    \
  template std::vector<ParamGroup<T>> buffer_groups<T>(ModelState<T>&);       \
  template ModelState<T> zeros_like<T>(const ModelState<T>&);                 \
  template BatchOutput<T> model_forward<T>(ModelState<T>&, const Batch<T>&,   \
                                           Mode, bool);                       \
  template BatchOutput<T> model_loss_and_grad<T>(                             \
      ModelState<T>&, const Batch<T>&, Mode, bool, ModelState<T>&);

SONARLEAF_INSTANTIATE_MODEL(float)
SONARLEAF_INSTANTIATE_MODEL(double)

}  // namespace sonarleaf
