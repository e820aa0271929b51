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

#ifndef SONARLEAF_ANALYSIS_HPP
#define SONARLEAF_ANALYSIS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "sonarleaf/dataio.hpp"
#include "sonarleaf/frontend.hpp"
#include "sonarleaf/head.hpp"
#include "sonarleaf/tensor.hpp"

namespace sonarleaf {

/// Reporting order of the filter channels: ascending learned center.
struct ChannelOrder {
  std::vector<std::size_t> filter_index;  // original channel per row
  std::vector<double> center_hz;
};

template <typename T>
ChannelOrder channel_order(const FrontendParams<T>& frontend);

struct ActivationTensor {
  Matrix<double> values;  // channels (ChannelOrder rows) x frames
  ClassLabel label = ClassLabel::kBackground;
  Scenario scenario = Scenario::kS1;
  std::string clip_id;
};

struct ActivationSet {
  ChannelOrder order;
  std::vector<ActivationTensor> tensors;
};

/// Frontend-only forward pass in eval mode. By default the output is the
/// normalized map; `pooled_stage` reports pooled energy instead.
/// `clip_sample_rate` must match the frontend's rate.
template <typename T>
ActivationSet activation_tensors(const FrontendParams<T>& frontend,
                                 const std::vector<LoadedClip<T>>& clips,
                                 int clip_sample_rate, bool pooled_stage = false,
                                 std::size_t batch_size = 64);

/// Mean over clips and frames per channel; throws InputError naming the class
/// when no tensor carries it.
std::vector<double> class_mean_activation(const std::vector<ActivationTensor>& tensors,
                                          ClassLabel label);

/// Mean over clips only (channels x frames).
Matrix<double> class_mean_spectrogram(const std::vector<ActivationTensor>& tensors,
                                      ClassLabel label);

struct DeltaCurve {
  ChannelOrder order;
  std::vector<double> delta;
  std::string scenario;
};

struct DeltaSpectrogram {
  ChannelOrder order;
  Matrix<double> delta;
  std::string scenario;
};

DeltaCurve delta_curve(const std::vector<double>& mean_a, const std::vector<double>& mean_b,
                       const ChannelOrder& order, std::string scenario = {});

DeltaSpectrogram delta_spectrogram(const std::vector<ActivationTensor>& tensors,
                                   ClassLabel a, ClassLabel b, const ChannelOrder& order,
                                   std::string scenario = {});

/// Filters with |delta| >= threshold * max |delta|; an all-zero curve has none.
std::size_t active_filter_count(const DeltaCurve& curve, double threshold);

/// Columns filter_index,center_freq_hz,delta; rows in ChannelOrder.
void write_delta_curve_csv(const std::filesystem::path& path, const DeltaCurve& curve);
DeltaCurve read_delta_curve_csv(const std::filesystem::path& path);

/// One row per filter: filter_index,center_freq_hz,t0,t1,...
void write_delta_spectrogram_csv(const std::filesystem::path& path,
                                 const DeltaSpectrogram& spec);
DeltaSpectrogram read_delta_spectrogram_csv(const std::filesystem::path& path);

}  // namespace sonarleaf

#endif  // SONARLEAF_ANALYSIS_HPP
