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

#ifndef SONARLEAF_DATAIO_HPP
#define SONARLEAF_DATAIO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonarleaf/head.hpp"

namespace sonarleaf {

enum class Scenario : int { kS1 = 0, kS2 = 1, kS3 = 2 };
inline constexpr std::size_t kNumScenarios = 3;

const char* scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);  // InputError if unknown

enum class Split : int { kTrain = 0, kVal = 1, kTest = 2 };

const char* split_name(Split s);
Split parse_split(std::string_view name);

// ---------------------------------------------------------------------------
// WAV (PCM 16-bit mono)

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<std::int16_t> samples;  // interleaved
};

WavData read_wav(const std::filesystem::path& path);

/// Samples are scaled by 32768, rounded and saturated to the int16 range.
template <typename T>
void write_wav(const std::filesystem::path& path, std::span<const T> samples,
               int sample_rate);

/// Reads a mono clip, maps PCM by 1/32768 and fits it to `length` samples:
/// shorter clips are extended by reflection, longer ones center-cropped.
template <typename T>
std::vector<T> load_clip(const std::filesystem::path& path, int sample_rate,
                         std::size_t length);

template <typename T>
std::vector<T> fit_length(std::span<const T> x, std::size_t length);

// ---------------------------------------------------------------------------
// Manifest

inline constexpr std::string_view kManifestHeader =
    "path,label,scenario,distance_km,conductivity,temperature,depth,salinity,"
    "sound_velocity,split";

struct ManifestRow {
  std::string path;  // relative to the manifest directory
  ClassLabel label = ClassLabel::kBackground;
  Scenario scenario = Scenario::kS1;
  std::optional<double> distance_km;
  CtdsvVector ctdsv;
  Split split = Split::kTrain;
  std::size_t line = 0;  // 1-based line in the source file
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestRow> rows;

  std::vector<std::size_t> split_indices(Split s) const;
  std::size_t count(Split s) const;
  /// Rows per (label, scenario) cell.
  std::map<std::pair<ClassLabel, Scenario>, std::size_t> cell_counts() const;
  std::filesystem::path resolve(const ManifestRow& row) const { return root / row.path; }
};

/// Validates every row and reports all problems at once (InputError); an
/// empty manifest raises "no rows". `check_files` verifies each path exists.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRow>& rows);

/// Keeps only rows whose scenario is in `scenarios`.
Manifest filter_scenarios(const Manifest& manifest,
                          const std::vector<Scenario>& scenarios);

// ---------------------------------------------------------------------------
// CTDSV normalization

struct CtdsvFit {
  CtdsvStats stats;
  std::vector<std::string> warnings;
};

/// z-score statistics (population std) over the given rows. Fields with zero
/// spread keep a unit divisor and produce a warning.
CtdsvFit fit_ctdsv(const std::vector<ManifestRow>& train_rows);

// ---------------------------------------------------------------------------
// Batching

/// Shuffled mini-batches of indices [0, count); the permutation depends only
/// on (seed, epoch). The last partial batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count,
                                                 std::size_t batch_size,
                                                 std::uint64_t seed,
                                                 std::uint64_t epoch);

/// Mixes seed words into one well-spread 64-bit value.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// An in-memory clip with its manifest metadata.
template <typename T>
struct LoadedClip {
  ManifestRow row;
  std::vector<T> audio;
};

template <typename T>
std::vector<LoadedClip<T>> load_split(const Manifest& manifest, Split split,
                                      int sample_rate, std::size_t length);

}  // namespace sonarleaf

#endif  // SONARLEAF_DATAIO_HPP
