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

#include "sonarleaf/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sonarleaf/config.hpp"
#include "sonarleaf/error.hpp"

namespace sonarleaf {

template <typename T>
AdamState<T> init_adam(const ModelState<T>& model, const AdamConfig& config) {
  if (!(config.lr >= 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  AdamState<T> s;
  s.config = config;
  s.first = zeros_like(model);
  s.second = zeros_like(model);
  return s;
}

template <typename T>
void adam_step(ModelState<T>& model, ModelState<T>& grads, AdamState<T>& state) {
  auto params = trainable_groups(model);
  auto g = trainable_groups(grads);
  auto m = trainable_groups(state.first);
  auto v = trainable_groups(state.second);
  if (g.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw InternalError("optimizer state does not match the model");
  }
  for (const auto& grp : g) {
    for (const T x : *grp.values) {
      if (!std::isfinite(static_cast<double>(x))) {
        throw NumericalError("non-finite gradient in parameter group '" + grp.name + "'");
      }
    }
  }
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].values;
    const auto& gi = *g[i].values;
    auto& mi = *m[i].values;
    auto& vi = *v[i].values;
    if (gi.size() != p.size()) throw InternalError("gradient shape mismatch in " + params[i].name);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = gi[j];
      const double mj = c.beta1 * mi[j] + (1.0 - c.beta1) * gj;
      const double vj = c.beta2 * vi[j] + (1.0 - c.beta2) * gj * gj;
      mi[j] = static_cast<T>(mj);
      vi[j] = static_cast<T>(vj);
      const double update = c.lr * (mj / bc1) / (std::sqrt(vj / bc2) + c.eps);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
  clamp_frontend(model.frontend);
}

// ---------------------------------------------------------------------------
// Training

template <typename T>
Batch<T> make_batch(const ModelState<T>& model, const std::vector<LoadedClip<T>>& clips,
                    const std::vector<std::size_t>& indices, bool with_labels) {
  Batch<T> b;
  b.audio.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& clip = clips.at(i);
    b.audio.emplace_back(clip.audio);
    if (model.config.use_ctdsv) {
      const auto z = model.ctdsv.apply(clip.row.ctdsv);
      std::array<T, kCtdsvDim> zt{};
      for (std::size_t k = 0; k < kCtdsvDim; ++k) zt[k] = static_cast<T>(z[k]);
      b.ctdsv.push_back(zt);
    }
    if (with_labels) b.labels.push_back(static_cast<std::size_t>(clip.row.label));
  }
  return b;
}

template <typename T>
std::vector<std::size_t> predict_clips(ModelState<T>& model,
                                       const std::vector<LoadedClip<T>>& clips,
                                       std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> preds;
  preds.reserve(clips.size());
  for (std::size_t start = 0; start < clips.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(clips.size(), start + batch_size); ++i) idx.push_back(i);
    auto out = model_forward(model, make_batch(model, clips, idx, false), Mode::kEval, false);
    for (const auto& logits : out.logits) preds.push_back(predict<T>(logits));
  }
  return preds;
}

Metrics compute_metrics(const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& predictions,
                        const std::vector<Scenario>& scenarios) {
  if (labels.size() != predictions.size() || labels.size() != scenarios.size()) {
    throw InternalError("metric inputs differ in length");
  }
  Metrics m;
  m.total = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= kNumClasses || predictions[i] >= kNumClasses) {
      throw InputError("class index out of range");
    }
    ++m.confusion[labels[i]][predictions[i]];
    auto& sc = m.per_scenario[static_cast<std::size_t>(scenarios[i])];
    ++sc.count;
    if (labels[i] == predictions[i]) {
      ++correct;
      ++sc.correct;
    }
  }
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    m.recall[c] = row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
    m.precision[c] = col ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(col) : 0.0;
  }
  return m;
}

template <typename T>
Metrics evaluate(ModelState<T>& model, const std::vector<LoadedClip<T>>& test_set,
                 std::size_t batch_size) {
  if (test_set.empty()) throw InputError("evaluation set is empty");
  const auto preds = predict_clips(model, test_set, batch_size);
  std::vector<std::size_t> labels;
  std::vector<Scenario> scenarios;
  for (const auto& c : test_set) {
    labels.push_back(static_cast<std::size_t>(c.row.label));
    scenarios.push_back(c.row.scenario);
  }
  return compute_metrics(labels, preds, scenarios);
}

template <typename T>
TrainResult<T> train_from(ModelState<T> model, const TrainConfig& config,
                          const std::vector<LoadedClip<T>>& train_set,
                          const std::vector<LoadedClip<T>>& val_set,
                          const EpochCallback& on_epoch) {
  if (train_set.empty()) throw InputError("training split is empty");
  if (val_set.empty()) throw InputError("validation split is empty");
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  TrainResult<T> result;
  auto& hist = result.history;
  hist.train_rows = train_set.size();
  hist.val_rows = val_set.size();
  std::array<std::size_t, kNumClasses> class_rows{};
  for (const auto& c : train_set) ++class_rows[static_cast<std::size_t>(c.row.label)];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (class_rows[c] == 0) {
      hist.warnings.push_back(std::string("class ") + class_name(static_cast<ClassLabel>(c)) +
                              " has no training rows");
    }
  }

  AdamState<T> adam = init_adam(model, config.adam);
  ModelState<T> grads = zeros_like(model);
  auto grad_groups = trainable_groups(grads);
  double best_acc = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = batch_iter(train_set.size(), config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      for (auto& grp : grad_groups) std::fill(grp.values->begin(), grp.values->end(), T(0));
      try {
        auto out = model_loss_and_grad(model, make_batch(model, train_set, batches[bi], true),
                                       Mode::kTrain, true, grads);
        adam_step(model, grads, adam);
        loss_sum += out.loss * static_cast<double>(batches[bi].size());
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(bi + 1) + ")");
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    const Metrics val = evaluate(model, val_set);
    rec.val_accuracy = val.accuracy;
    for (std::size_t s = 0; s < kNumScenarios; ++s) {
      if (val.per_scenario[s].count) rec.val_per_scenario[s] = val.per_scenario[s].accuracy();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      result.best = model;
      hist.best_epoch = epoch;
    }
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (config.epochs == 0) result.best = model;
  result.last = std::move(model);
  return result;
}

template <typename T>
TrainResult<T> train(const ModelConfig& model_config, const TrainConfig& config,
                     const std::vector<LoadedClip<T>>& train_set,
                     const std::vector<LoadedClip<T>>& val_set,
                     const EpochCallback& on_epoch) {
  ModelState<T> model = init_model<T>(model_config, config.seed);
  std::vector<ManifestRow> rows;
  rows.reserve(train_set.size());
  for (const auto& c : train_set) rows.push_back(c.row);
  CtdsvFit fit = fit_ctdsv(rows);
  model.ctdsv = fit.stats;
  auto result = train_from(std::move(model), config, train_set, val_set, on_epoch);
  if (model_config.use_ctdsv) {
    result.history.warnings.insert(result.history.warnings.begin(), fit.warnings.begin(),
                                   fit.warnings.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'N', 'R', 'L', 'E', 'A', 'F', '\x1a'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(std::string data, std::string origin)
      : data_(std::move(data)), origin_(std::move(origin)) {}

  const char* take(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) {
      throw IoError(origin_ + ": truncated checkpoint while reading " + what);
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint64_t u64(const char* what) {
    const std::uint64_t lo = u32(what);
    const std::uint64_t hi = u32(what);
    return lo | (hi << 32);
  }
  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float f = 0.0f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  std::string str(std::size_t n, const char* what) { return std::string(take(n, what), n); }
  bool done() const { return pos_ == data_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string exact(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

}  // namespace

void check_compatible(const ModelConfig& stored, const ModelConfig& requested) {
  auto mismatch = [](const std::string& what, const std::string& a, const std::string& b) {
    throw ConfigError("checkpoint " + what + " is " + a + " but the request uses " + b);
  };
  if (stored.pooling != requested.pooling) {
    mismatch("pooling", pooling_name(stored.pooling), pooling_name(requested.pooling));
  }
  if (stored.use_ctdsv != requested.use_ctdsv) {
    mismatch("CTDSV fusion", stored.use_ctdsv ? "on" : "off", requested.use_ctdsv ? "on" : "off");
  }
  if (stored.frontend.num_filters != requested.frontend.num_filters) {
    mismatch("filter count", std::to_string(stored.frontend.num_filters),
             std::to_string(requested.frontend.num_filters));
  }
  if (stored.frontend.sample_rate != requested.frontend.sample_rate) {
    mismatch("sample rate", std::to_string(stored.frontend.sample_rate),
             std::to_string(requested.frontend.sample_rate));
  }
  if (!same_architecture(stored, requested)) {
    throw ConfigError("checkpoint architecture differs from the requested model configuration");
  }
}

template <typename T>
void save_checkpoint(const ModelState<T>& model_in, const std::filesystem::path& path) {
  ModelState<T> model = model_in;  // groups need mutable access
  std::ostringstream header;
  header << format_model_config(model.config);
  header << "\n[state]\n";
  header << "frontend_batches=" << model.frontend.compression.tracked_batches << '\n';
  for (std::size_t l = 0; l < model.encoder.blocks.size(); ++l) {
    header << "block" << l << "_batches=" << model.encoder.blocks[l].tracked_batches << '\n';
  }
  header << "\n[ctdsv]\n";
  for (std::size_t i = 0; i < kCtdsvDim; ++i) {
    header << "mean" << i << '=' << exact(model.ctdsv.mean[i]) << '\n';
    header << "std" << i << '=' << exact(model.ctdsv.stddev[i]) << '\n';
  }
  const std::string text = header.str();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  auto groups = trainable_groups(model);
  for (auto& b : buffer_groups(model)) groups.push_back(b);
  put_u32(out, static_cast<std::uint32_t>(groups.size()));
  for (const auto& g : groups) {
    put_u32(out, static_cast<std::uint32_t>(g.name.size()));
    out += g.name;
    put_u64(out, g.values->size());
    for (const T v : *g.values) put_f32(out, static_cast<float>(v));
  }
  out.append("END!", 4);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

template <typename T>
ModelState<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (std::memcmp(r.take(sizeof kMagic, "magic"), kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + ": not a sonarleaf checkpoint (bad magic bytes)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": checkpoint version " + std::to_string(version) +
                  " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::string text = r.str(r.u32("header length"), "header");

  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::read_ini(in, tree);
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": unreadable checkpoint header: " + e.what());
  }
  ModelState<T> model = init_model<T>(parse_model_config(text), 0);
  try {
    model.frontend.compression.tracked_batches = tree.get<std::int64_t>("state.frontend_batches");
    for (std::size_t l = 0; l < model.encoder.blocks.size(); ++l) {
      model.encoder.blocks[l].tracked_batches =
          tree.get<std::int64_t>("state.block" + std::to_string(l) + "_batches");
    }
    for (std::size_t i = 0; i < kCtdsvDim; ++i) {
      model.ctdsv.mean[i] = tree.get<double>("ctdsv.mean" + std::to_string(i));
      model.ctdsv.stddev[i] = tree.get<double>("ctdsv.std" + std::to_string(i));
    }
  } catch (const boost::property_tree::ptree_error& e) {
    throw IoError(path.string() + ": incomplete checkpoint header: " + e.what());
  }

  auto groups = trainable_groups(model);
  for (auto& b : buffer_groups(model)) groups.push_back(b);
  const std::uint32_t count = r.u32("group count");
  if (count != groups.size()) {
    throw IoError(path.string() + ": expected " + std::to_string(groups.size()) +
                  " parameter groups, found " + std::to_string(count));
  }
  for (auto& g : groups) {
    const std::string name = r.str(r.u32("group name length"), "group name");
    if (name != g.name) {
      throw IoError(path.string() + ": expected group '" + g.name + "', found '" + name + "'");
    }
    const std::uint64_t n = r.u64("group size");
    if (n != g.values->size()) {
      throw IoError(path.string() + ": group '" + name + "' has " + std::to_string(n) +
                    " values, expected " + std::to_string(g.values->size()));
    }
    for (auto& v : *g.values) v = static_cast<T>(r.f32(g.name.c_str()));
  }
  if (r.str(4, "end marker") != "END!" || !r.done()) {
    throw IoError(path.string() + ": trailing data after checkpoint end marker");
  }
  return model;
}

#define SONARLEAF_INSTANTIATE_OPTIM(T)                                            \
  template AdamState<T> init_adam<T>(const ModelState<T>&, const AdamConfig&);    \
  template void adam_step<T>(ModelState<T>&, ModelState<T>&, AdamState<T>&);      \
  template Batch<T> make_batch<T>(const ModelState<T>&,                           \
                                  const std::vector<LoadedClip<T>>&,              \
                                  const std::vector<std::size_t>&, bool);         \
  template std::vector<std::size_t> predict_clips<T>(                             \
      ModelState<T>&, const std::vector<LoadedClip<T>>&, std::size_t);            \
  template Metrics evaluate<T>(ModelState<T>&, const std::vector<LoadedClip<T>>&, \
                               std::size_t);                                      \
  template TrainResult<T> train_from<T>(                                          \
      ModelState<T>, const TrainConfig&, const std::vector<LoadedClip<T>>&,       \
      const std::vector<LoadedClip<T>>&, const EpochCallback&);                   \
  template TrainResult<T> train<T>(                                               \
      const ModelConfig&, const TrainConfig&, const std::vector<LoadedClip<T>>&,  \
      const std::vector<LoadedClip<T>>&, const EpochCallback&);                   \
  template void save_checkpoint<T>(const ModelState<T>&,                          \
                                   const std::filesystem::path&);                 \
  template ModelState<T> load_checkpoint<T>(const std::filesystem::path&);

SONARLEAF_INSTANTIATE_OPTIM(float)
SONARLEAF_INSTANTIATE_OPTIM(double)

}  // namespace sonarleaf
