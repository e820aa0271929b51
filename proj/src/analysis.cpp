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

#include "sonarleaf/analysis.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sonarleaf/error.hpp"

namespace sonarleaf {

template <typename T>
ChannelOrder channel_order(const FrontendParams<T>& frontend) {
  const std::size_t K = frontend.num_filters();
  ChannelOrder order;
  order.filter_index.resize(K);
  std::iota(order.filter_index.begin(), order.filter_index.end(), 0);
  std::stable_sort(order.filter_index.begin(), order.filter_index.end(),
                   [&](std::size_t a, std::size_t b) {
                     return frontend.gabor.mu[a] < frontend.gabor.mu[b];
                   });
  for (std::size_t k : order.filter_index) order.center_hz.push_back(frontend.center_hz(k));
  return order;
}

template <typename T>
ActivationSet activation_tensors(const FrontendParams<T>& frontend,
                                 const std::vector<LoadedClip<T>>& clips,
                                 int clip_sample_rate, bool pooled_stage,
                                 std::size_t batch_size) {
  if (clip_sample_rate != frontend.sample_rate) {
    throw InputError("clips are sampled at " + std::to_string(clip_sample_rate) +
                     " Hz but the frontend expects " + std::to_string(frontend.sample_rate) +
                     " Hz");
  }
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  FrontendParams<T> params = frontend;  // eval mode leaves it untouched
  ActivationSet set;
  set.order = channel_order(frontend);
  const Stage stop = pooled_stage ? Stage::kPooled : Stage::kNormalized;
  for (std::size_t start = 0; start < clips.size(); start += batch_size) {
    const std::size_t end = std::min(clips.size(), start + batch_size);
    std::vector<std::span<const T>> batch;
    for (std::size_t i = start; i < end; ++i) batch.emplace_back(clips[i].audio);
    auto maps = frontend_forward<T>(batch, params, Mode::kEval, nullptr, false, stop);
    for (std::size_t i = start; i < end; ++i) {
      const auto& m = maps[i - start].values;
      ActivationTensor a;
      a.values = Matrix<double>(m.rows, m.cols);
      for (std::size_t r = 0; r < m.rows; ++r) {
        const auto src = m.row(set.order.filter_index[r]);
        std::copy(src.begin(), src.end(), a.values.row(r).begin());
      }
      a.label = clips[i].row.label;
      a.scenario = clips[i].row.scenario;
      a.clip_id = clips[i].row.path;
      set.tensors.push_back(std::move(a));
    }
  }
  return set;
}

namespace {

std::vector<const ActivationTensor*> of_class(const std::vector<ActivationTensor>& tensors,
                                              ClassLabel label) {
  std::vector<const ActivationTensor*> out;
  for (const auto& t : tensors) {
    if (t.label == label) out.push_back(&t);
  }
  if (out.empty()) {
    throw InputError(std::string("no activation tensors for class ") + class_name(label));
  }
  for (const auto* t : out) {
    if (t->values.rows != out.front()->values.rows || t->values.cols != out.front()->values.cols) {
      throw InputError("activation tensors differ in shape");
    }
  }
  return out;
}

}  // namespace

std::vector<double> class_mean_activation(const std::vector<ActivationTensor>& tensors,
                                          ClassLabel label) {
  const auto sel = of_class(tensors, label);
  const std::size_t C = sel.front()->values.rows;
  const std::size_t T = sel.front()->values.cols;
  std::vector<double> mean(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (const auto* t : sel) {
      for (double v : t->values.row(c)) s += v;
    }
    mean[c] = s / static_cast<double>(sel.size() * T);
  }
  return mean;
}

Matrix<double> class_mean_spectrogram(const std::vector<ActivationTensor>& tensors,
                                      ClassLabel label) {
  const auto sel = of_class(tensors, label);
  Matrix<double> mean(sel.front()->values.rows, sel.front()->values.cols);
  for (const auto* t : sel) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean.data[i] += t->values.data[i];
  }
  for (auto& v : mean.data) v /= static_cast<double>(sel.size());
  return mean;
}

DeltaCurve delta_curve(const std::vector<double>& mean_a, const std::vector<double>& mean_b,
                       const ChannelOrder& order, std::string scenario) {
  if (mean_a.size() != mean_b.size() || mean_a.size() != order.filter_index.size()) {
    throw InputError("class means differ in channel count");
  }
  DeltaCurve curve;
  curve.order = order;
  curve.scenario = std::move(scenario);
  curve.delta.resize(mean_a.size());
  for (std::size_t c = 0; c < mean_a.size(); ++c) curve.delta[c] = mean_a[c] - mean_b[c];
  return curve;
}

DeltaSpectrogram delta_spectrogram(const std::vector<ActivationTensor>& tensors,
                                   ClassLabel a, ClassLabel b, const ChannelOrder& order,
                                   std::string scenario) {
  const auto ma = class_mean_spectrogram(tensors, a);
  const auto mb = class_mean_spectrogram(tensors, b);
  if (ma.rows != mb.rows || ma.cols != mb.cols || ma.rows != order.filter_index.size()) {
    throw InputError("class spectrograms differ in shape");
  }
  DeltaSpectrogram spec;
  spec.order = order;
  spec.scenario = std::move(scenario);
  spec.delta = Matrix<double>(ma.rows, ma.cols);
  for (std::size_t i = 0; i < ma.size(); ++i) spec.delta.data[i] = ma.data[i] - mb.data[i];
  return spec;
}

std::size_t active_filter_count(const DeltaCurve& curve, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("activity threshold must be positive");
  double peak = 0.0;
  for (double d : curve.delta) peak = std::max(peak, std::abs(d));
  if (peak == 0.0) return 0;
  return static_cast<std::size_t>(std::count_if(
      curve.delta.begin(), curve.delta.end(),
      [&](double d) { return std::abs(d) >= threshold * peak; }));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string exact(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string f;
  while (std::getline(s, f, ',')) out.push_back(f);
  return out;
}

double parse(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw InputError(path.string() + ": line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path,
                                                std::string* header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": empty file");
  *header = line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(fields(line));
  }
  return rows;
}

}  // namespace

void write_delta_curve_csv(const std::filesystem::path& path, const DeltaCurve& curve) {
  auto out = open_out(path);
  out << "filter_index,center_freq_hz,delta\n";
  for (std::size_t c = 0; c < curve.delta.size(); ++c) {
    out << curve.order.filter_index[c] << ',' << exact(curve.order.center_hz[c]) << ','
        << exact(curve.delta[c]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DeltaCurve read_delta_curve_csv(const std::filesystem::path& path) {
  std::string header;
  const auto rows = read_rows(path, &header);
  if (header != "filter_index,center_freq_hz,delta") {
    throw InputError(path.string() + ": unexpected header '" + header + "'");
  }
  DeltaCurve curve;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw InputError(path.string() + ": expected 3 columns");
    curve.order.filter_index.push_back(static_cast<std::size_t>(parse(rows[i][0], path, i + 2)));
    curve.order.center_hz.push_back(parse(rows[i][1], path, i + 2));
    curve.delta.push_back(parse(rows[i][2], path, i + 2));
  }
  return curve;
}

void write_delta_spectrogram_csv(const std::filesystem::path& path,
                                 const DeltaSpectrogram& spec) {
  auto out = open_out(path);
  out << "filter_index,center_freq_hz";
  for (std::size_t t = 0; t < spec.delta.cols; ++t) out << ",t" << t;
  out << '\n';
  for (std::size_t c = 0; c < spec.delta.rows; ++c) {
    out << spec.order.filter_index[c] << ',' << exact(spec.order.center_hz[c]);
    for (double v : spec.delta.row(c)) out << ',' << exact(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DeltaSpectrogram read_delta_spectrogram_csv(const std::filesystem::path& path) {
  std::string header;
  const auto rows = read_rows(path, &header);
  const auto cols = fields(header);
  if (cols.size() < 2 || cols[0] != "filter_index" || cols[1] != "center_freq_hz") {
    throw InputError(path.string() + ": unexpected header");
  }
  DeltaSpectrogram spec;
  spec.delta = Matrix<double>(rows.size(), cols.size() - 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols.size()) throw InputError(path.string() + ": ragged row");
    spec.order.filter_index.push_back(static_cast<std::size_t>(parse(rows[i][0], path, i + 2)));
    spec.order.center_hz.push_back(parse(rows[i][1], path, i + 2));
    for (std::size_t t = 0; t + 2 < cols.size(); ++t) {
      spec.delta(i, t) = parse(rows[i][t + 2], path, i + 2);
    }
  }
  return spec;
}

#define SONARLEAF_INSTANTIATE_ANALYSIS(T)                                         \
  template ChannelOrder channel_order<T>(const FrontendParams<T>&);               \
  template ActivationSet activation_tensors<T>(const FrontendParams<T>&,          \
                                               const std::vector<LoadedClip<T>>&, \
                                               int, bool, std::size_t);

SONARLEAF_INSTANTIATE_ANALYSIS(float)
SONARLEAF_INSTANTIATE_ANALYSIS(double)

}  // namespace sonarleaf
