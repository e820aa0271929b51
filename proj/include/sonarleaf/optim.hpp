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

#ifndef SONARLEAF_OPTIM_HPP
#define SONARLEAF_OPTIM_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sonarleaf/dataio.hpp"
#include "sonarleaf/model.hpp"

namespace sonarleaf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are stored in ModelState-shaped copies so they line up with
/// trainable_groups() one to one.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  ModelState<T> first;
  ModelState<T> second;
};

template <typename T>
AdamState<T> init_adam(const ModelState<T>& model, const AdamConfig& config);

/// One bias-corrected Adam update over every trainable group, followed by
/// the frontend range clamps. A non-finite gradient aborts before any
/// parameter changes, naming the offending group.
template <typename T>
void adam_step(ModelState<T>& model, ModelState<T>& grads, AdamState<T>& state);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::array<std::optional<double>, kNumScenarios> val_per_scenario;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t best_epoch = 0;
};

template <typename T>
struct TrainResult {
  ModelState<T> best;   // highest validation accuracy, earliest on ties
  ModelState<T> last;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

template <typename T>
TrainResult<T> train(const ModelConfig& model_config, const TrainConfig& config,
                     const std::vector<LoadedClip<T>>& train_set,
                     const std::vector<LoadedClip<T>>& val_set,
                     const EpochCallback& on_epoch = {});

/// Same loop, starting from an existing model (CTDSV statistics are kept).
template <typename T>
TrainResult<T> train_from(ModelState<T> model, const TrainConfig& config,
                          const std::vector<LoadedClip<T>>& train_set,
                          const std::vector<LoadedClip<T>>& val_set,
                          const EpochCallback& on_epoch = {});

struct ScenarioScore {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

struct Metrics {
  std::size_t total = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [true][pred]
  std::array<ScenarioScore, kNumScenarios> per_scenario{};
};

/// Precision of a class that is never predicted, and recall of a class that
/// never occurs, are reported as 0.
Metrics compute_metrics(const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& predictions,
                        const std::vector<Scenario>& scenarios);

template <typename T>
std::vector<std::size_t> predict_clips(ModelState<T>& model,
                                       const std::vector<LoadedClip<T>>& clips,
                                       std::size_t batch_size = 64);

template <typename T>
Metrics evaluate(ModelState<T>& model, const std::vector<LoadedClip<T>>& test_set,
                 std::size_t batch_size = 64);

/// Normalized CTDSV rows for a set of clips, as the model consumes them.
template <typename T>
Batch<T> make_batch(const ModelState<T>& model, const std::vector<LoadedClip<T>>& clips,
                    const std::vector<std::size_t>& indices, bool with_labels);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, version, INI text header (model config, CTDSV
/// statistics, batch counters), then named float32 little-endian groups.
template <typename T>
void save_checkpoint(const ModelState<T>& model, const std::filesystem::path& path);

template <typename T>
ModelState<T> load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError naming the first architectural difference.
void check_compatible(const ModelConfig& stored, const ModelConfig& requested);

}  // namespace sonarleaf

#endif  // SONARLEAF_OPTIM_HPP
