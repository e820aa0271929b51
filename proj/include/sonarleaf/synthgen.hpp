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

#ifndef SONARLEAF_SYNTHGEN_HPP
#define SONARLEAF_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "sonarleaf/dataio.hpp"
#include "sonarleaf/head.hpp"

namespace sonarleaf {

/// Gaussian prior for each raw CTDSV field (conductivity, temperature, depth,
/// salinity, sound velocity).
struct CtdsvPrior {
  std::array<double, kCtdsvDim> mean{};
  std::array<double, kCtdsvDim> stddev{};
};

struct ScenarioSpec {
  Scenario id = Scenario::kS1;
  double inclusion_km = 2.0;
  double exclusion_km = 4.0;
  double min_distance_km = 0.2;
  CtdsvPrior ctdsv;
};

/// S1 = (2, 4) km, S2 = (3, 5) km, S3 = (4, 6) km.
std::array<ScenarioSpec, kNumScenarios> default_scenarios();

struct VesselClassProfile {
  ClassLabel label = ClassLabel::kTug;
  double f0_min_hz = 40.0;
  double f0_max_hz = 80.0;
  int harmonics = 12;
  double harmonic_rolloff = 0.7;  // amplitude ~ h^-rolloff
  double tone_level = 0.03;       // fundamental amplitude at 1 km
  double band_lo_hz = 200.0;      // machinery broadband
  double band_hi_hz = 1200.0;
  double band_level = 0.01;  // rms at 1 km
  double cavitation_level = 0.015;  // rms at 1 km, spectrum ~ 1/f above the corner
  double cavitation_corner_hz = 400.0;
  double am_min_hz = 2.0;
  double am_max_hz = 4.0;
};

/// Profiles for Tug, Tanker, Cargo and Passengership, indexed by label.
std::array<VesselClassProfile, 4> default_profiles();

struct SynthConfig {
  int sample_rate = 16000;
  double clip_seconds = 1.0;
  std::size_t clips_per_cell = 200;  // per (class, scenario)
  std::vector<Scenario> scenarios{Scenario::kS1, Scenario::kS2, Scenario::kS3};
  double noise_rms = 0.005;          // ambient floor, identical in every scenario
  double level_jitter_db = 3.0;      // per-clip source level spread (+/-)
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::array<ScenarioSpec, kNumScenarios> scenario_specs = default_scenarios();
  std::array<VesselClassProfile, 4> profiles = default_profiles();

  std::size_t clip_samples() const;
  void validate() const;
};

/// Thorp absorption in dB/km, frequency in Hz.
double thorp_db_per_km(double f_hz);

/// Spreading (1/d, reference 1 km) times Thorp absorption over d km.
double attenuate(double f_hz, double distance_km);

struct SynthClip {
  std::vector<double> audio;   // received signal, |x| <= 1
  std::vector<double> vessel;  // attenuated vessel part before noise and
                               // peak scaling (empty for Background)
  CtdsvVector ctdsv;           // raw units
  double distance_km = 0.0;    // 0 for Background
};

/// One clip. The draw order is fixed, so equal seeds give the same source
/// signal in every scenario; only distance range and CTDSV prior change.
SynthClip gen_clip(ClassLabel label, const ScenarioSpec& scenario,
                   const SynthConfig& config, std::mt19937_64& rng);

/// Largest ratio of a periodogram bin to the median of its +/-64 bin
/// neighbourhood, over 20 Hz .. Nyquist. Smoothly coloured Gaussian noise
/// (the Background class) stays below kPeakRatioThreshold; isolated tonal
/// lines such as Tug and Passengership harmonics exceed it.
double spectral_peak_ratio(std::span<const double> x, int sample_rate);
inline constexpr double kPeakRatioThreshold = 100.0;

/// Writes WAV files and manifest.csv under out_dir; returns the manifest path.
std::filesystem::path gen_dataset(const SynthConfig& config,
                                  const std::filesystem::path& out_dir,
                                  std::uint64_t seed);

}  // namespace sonarleaf

#endif  // SONARLEAF_SYNTHGEN_HPP
