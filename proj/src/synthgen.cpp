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

#include "sonarleaf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "sonarleaf/error.hpp"
#include "sonarleaf/fft.hpp"
#include "sonarleaf/parallel.hpp"

namespace sonarleaf {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPeakCeiling = 0.99;
}  // namespace

std::array<ScenarioSpec, kNumScenarios> default_scenarios() {
  std::array<ScenarioSpec, kNumScenarios> s;
  const double inclusion[] = {2.0, 3.0, 4.0};
  for (std::size_t i = 0; i < kNumScenarios; ++i) {
    const double shift = static_cast<double>(i);
    s[i].id = static_cast<Scenario>(i);
    s[i].inclusion_km = inclusion[i];
    s[i].exclusion_km = inclusion[i] + 2.0;
    s[i].min_distance_km = 0.2;
    s[i].ctdsv.mean = {4.0 + 0.1 * shift, 9.0 + shift, 140.0 + 5.0 * shift,
                       31.5 + 0.2 * shift, 1485.0 + 3.0 * shift};
    s[i].ctdsv.stddev = {0.05, 0.5, 5.0, 0.2, 2.0};
  }
  return s;
}

std::array<VesselClassProfile, 4> default_profiles() {
  VesselClassProfile tug;
  tug.label = ClassLabel::kTug;

  VesselClassProfile tanker;
  tanker.label = ClassLabel::kTanker;
  tanker.f0_min_hz = 6.0;
  tanker.f0_max_hz = 15.0;
  tanker.harmonics = 25;
  tanker.harmonic_rolloff = 0.5;
  tanker.tone_level = 0.025;
  tanker.band_lo_hz = 20.0;
  tanker.band_hi_hz = 150.0;
  tanker.band_level = 0.03;
  tanker.cavitation_level = 0.01;
  tanker.cavitation_corner_hz = 250.0;
  tanker.am_min_hz = 0.5;
  tanker.am_max_hz = 1.2;

  VesselClassProfile cargo;
  cargo.label = ClassLabel::kCargo;
  cargo.f0_min_hz = 8.0;
  cargo.f0_max_hz = 20.0;
  cargo.harmonics = 20;
  cargo.harmonic_rolloff = 0.5;
  cargo.tone_level = 0.02;
  cargo.band_lo_hz = 80.0;
  cargo.band_hi_hz = 400.0;
  cargo.band_level = 0.015;
  cargo.cavitation_level = 0.012;
  cargo.cavitation_corner_hz = 300.0;
  cargo.am_min_hz = 0.8;
  cargo.am_max_hz = 2.0;

  VesselClassProfile passenger;
  passenger.label = ClassLabel::kPassengership;
  passenger.f0_min_hz = 100.0;
  passenger.f0_max_hz = 200.0;
  passenger.harmonics = 8;
  passenger.harmonic_rolloff = 0.8;
  passenger.tone_level = 0.02;
  passenger.band_lo_hz = 800.0;
  passenger.band_hi_hz = 3000.0;
  passenger.band_level = 0.02;
  passenger.cavitation_level = 0.015;
  passenger.cavitation_corner_hz = 600.0;
  passenger.am_min_hz = 4.0;
  passenger.am_max_hz = 8.0;

  return {tug, tanker, cargo, passenger};
}

std::size_t SynthConfig::clip_samples() const {
  return static_cast<std::size_t>(std::llround(clip_seconds * sample_rate));
}

void SynthConfig::validate() const {
  if (sample_rate < 1000) throw ConfigError("sample rate must be at least 1000 Hz");
  if (!(clip_seconds > 0.0) || clip_samples() < 16) throw ConfigError("clip is too short");
  if (scenarios.empty()) throw ConfigError("no scenarios selected");
  if (!(noise_rms > 0.0)) throw ConfigError("noise level must be positive");
  if (level_jitter_db < 0.0) throw ConfigError("level jitter must be nonnegative");
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw ConfigError("split fractions must be nonnegative and sum to at most 1");
  }
  for (const auto& s : scenario_specs) {
    if (!(s.inclusion_km < s.exclusion_km)) {
      throw ConfigError(std::string("scenario ") + scenario_name(s.id) +
                        ": inclusion radius must be below exclusion radius");
    }
    if (!(s.min_distance_km > 0.0) || !(s.min_distance_km < s.inclusion_km)) {
      throw ConfigError(std::string("scenario ") + scenario_name(s.id) +
                        ": invalid distance range");
    }
  }
  const double nyquist = sample_rate / 2.0;
  for (const auto& p : profiles) {
    const std::string who = class_name(p.label);
    if (!(p.f0_min_hz > 0.0) || !(p.f0_min_hz <= p.f0_max_hz) || p.f0_max_hz >= nyquist) {
      throw ConfigError(who + ": fundamental range must lie in (0, Nyquist)");
    }
    if (p.harmonics < 1) throw ConfigError(who + ": needs at least one harmonic");
    if (!(p.tone_level > 0.0) || !(p.band_level > 0.0) || !(p.cavitation_level > 0.0)) {
      throw ConfigError(who + ": levels must be positive");
    }
    if (!(p.band_lo_hz < p.band_hi_hz) || p.band_hi_hz > nyquist) {
      throw ConfigError(who + ": invalid broadband band");
    }
  }
}

double thorp_db_per_km(double f_hz) {
  const double f = f_hz / 1000.0;
  const double f2 = f * f;
  return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
}

double attenuate(double f_hz, double distance_km) {
  if (!(distance_km > 0.0)) {
    throw InputError("distance must be positive, got " + std::to_string(distance_km) + " km");
  }
  return (1.0 / distance_km) * std::pow(10.0, -thorp_db_per_km(f_hz) * distance_km / 20.0);
}

namespace {

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Real signal filtered by a zero-phase gain defined on |f| in Hz.
std::vector<double> shape(const std::vector<double>& x, int sample_rate,
                          const std::function<double(double)>& gain) {
  const std::size_t n = x.size();
  Fft<double> fft(n);
  ComplexBuffer<double> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {x[i], 0.0};
  fft.forward(buf);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * sample_rate / static_cast<double>(n);
    buf[k] *= gain(f);
  }
  fft.inverse(buf);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() / static_cast<double>(n);
  return out;
}

std::vector<double> white(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

void scale_to_rms(std::vector<double>& x, double target) {
  const double r = rms(x);
  if (r > 0.0) {
    for (auto& v : x) v *= target / r;
  }
}

}  // namespace

SynthClip gen_clip(ClassLabel label, const ScenarioSpec& scenario,
                   const SynthConfig& config, std::mt19937_64& rng) {
  const std::size_t n = config.clip_samples();
  const int sr = config.sample_rate;
  const double nyquist = sr / 2.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SynthClip clip;
  std::vector<double> vessel;

  if (label != ClassLabel::kBackground) {
    const auto& p = config.profiles.at(static_cast<std::size_t>(label));
    const double f0 = p.f0_min_hz + unit(rng) * (p.f0_max_hz - p.f0_min_hz);
    std::vector<double> phases(static_cast<std::size_t>(p.harmonics));
    for (auto& ph : phases) ph = kTwoPi * unit(rng);
    const double am_depth = 0.2 + 0.3 * unit(rng);
    const double am_rate = p.am_min_hz + unit(rng) * (p.am_max_hz - p.am_min_hz);
    const double am_phase = kTwoPi * unit(rng);
    const double level_db = (2.0 * unit(rng) - 1.0) * config.level_jitter_db;
    auto band = shape(white(n, rng), sr, [&](double f) {
      return f >= p.band_lo_hz && f <= p.band_hi_hz ? 1.0 : 0.0;
    });
    scale_to_rms(band, p.band_level);
    auto cav = shape(white(n, rng), sr,
                     [&](double f) { return 1.0 / (1.0 + f / p.cavitation_corner_hz); });
    scale_to_rms(cav, p.cavitation_level);

    std::vector<double> source(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      double tones = 0.0;
      for (int h = 1; h <= p.harmonics; ++h) {
        const double f = h * f0;
        if (f >= 0.95 * nyquist) break;
        tones += p.tone_level * std::pow(static_cast<double>(h), -p.harmonic_rolloff) *
                 std::sin(kTwoPi * f * t + phases[static_cast<std::size_t>(h - 1)]);
      }
      const double am = 1.0 + am_depth * std::sin(kTwoPi * am_rate * t + am_phase);
      source[i] = am * (tones + cav[i]) + band[i];
    }
    const double level = std::pow(10.0, level_db / 20.0);
    for (auto& v : source) v *= level;

    const double u = unit(rng);
    const double d = scenario.min_distance_km + u * (scenario.inclusion_km - scenario.min_distance_km);
    clip.distance_km = d;
    vessel = shape(source, sr, [d](double f) { return attenuate(f, d); });
  }

  std::array<double, kCtdsvDim> meta{};
  for (std::size_t i = 0; i < kCtdsvDim; ++i) {
    std::normal_distribution<double> nd(scenario.ctdsv.mean[i], scenario.ctdsv.stddev[i]);
    meta[i] = nd(rng);
  }
  clip.ctdsv = CtdsvVector::from_values(meta);

  auto ambient = shape(white(n, rng), sr,
                       [](double f) { return 1.0 / std::sqrt(std::max(f, 10.0)); });
  scale_to_rms(ambient, config.noise_rms);

  clip.audio = ambient;
  if (!vessel.empty()) {
    for (std::size_t i = 0; i < n; ++i) clip.audio[i] += vessel[i];
  }
  double peak = 0.0;
  for (double v : clip.audio) peak = std::max(peak, std::abs(v));
  if (peak > kPeakCeiling) {
    for (auto& v : clip.audio) v *= kPeakCeiling / peak;
  }
  clip.vessel = std::move(vessel);
  return clip;
}

double spectral_peak_ratio(std::span<const double> x, int sample_rate) {
  const std::size_t n = x.size();
  if (n < 256) throw InputError("clip too short for a spectral peak estimate");
  Fft<double> fft(n);
  ComplexBuffer<double> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {x[i], 0.0};
  fft.forward(buf);
  const std::size_t half = n / 2;
  std::vector<double> power(half + 1);
  for (std::size_t k = 0; k <= half; ++k) power[k] = std::norm(buf[k]);
  const auto first = static_cast<std::size_t>(std::ceil(20.0 * n / sample_rate));
  constexpr std::size_t kRadius = 64;
  double best = 0.0;
  std::vector<double> window;
  for (std::size_t k = std::max<std::size_t>(first, 1); k <= half; ++k) {
    const std::size_t lo = k > kRadius ? k - kRadius : 1;
    const std::size_t hi = std::min(half, k + kRadius);
    window.assign(power.begin() + static_cast<long>(lo), power.begin() + static_cast<long>(hi) + 1);
    auto mid = window.begin() + static_cast<long>(window.size() / 2);
    std::nth_element(window.begin(), mid, window.end());
    if (*mid > 0.0) best = std::max(best, power[k] / *mid);
  }
  return best;
}

std::filesystem::path gen_dataset(const SynthConfig& config,
                                  const std::filesystem::path& out_dir,
                                  std::uint64_t seed) {
  config.validate();
  if (config.clips_per_cell == 0) throw ConfigError("empty dataset");
  const std::size_t per_cell = config.clips_per_cell;
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * per_cell));
  const auto n_val = std::min(per_cell - n_train,
                              static_cast<std::size_t>(std::llround(config.val_fraction * per_cell)));

  struct Job {
    Scenario scenario;
    ClassLabel label;
    std::size_t index_in_cell;
    std::size_t global_index;
  };
  std::vector<Job> jobs;
  for (Scenario s : config.scenarios) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t j = 0; j < per_cell; ++j) {
        jobs.push_back({s, static_cast<ClassLabel>(c), j, jobs.size()});
      }
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  for (Scenario s : config.scenarios) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto dir = out_dir / "audio" / scenario_name(s) / class_name(static_cast<ClassLabel>(c));
      std::filesystem::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
  }

  std::vector<ManifestRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    std::mt19937_64 rng(mix_seed(seed, job.global_index));
    const auto& spec = config.scenario_specs.at(static_cast<std::size_t>(job.scenario));
    SynthClip clip = gen_clip(job.label, spec, config, rng);
    std::ostringstream name;
    name << "audio/" << scenario_name(job.scenario) << '/' << class_name(job.label) << '/'
         << scenario_name(job.scenario) << '_' << class_name(job.label) << '_';
    name.width(5);
    name.fill('0');
    name << job.index_in_cell << ".wav";
    ManifestRow& row = rows[i];
    row.path = name.str();
    row.label = job.label;
    row.scenario = job.scenario;
    if (job.label != ClassLabel::kBackground) row.distance_km = clip.distance_km;
    row.ctdsv = clip.ctdsv;
    row.split = job.index_in_cell < n_train           ? Split::kTrain
                : job.index_in_cell < n_train + n_val ? Split::kVal
                                                      : Split::kTest;
    write_wav<double>(out_dir / row.path, clip.audio, config.sample_rate);
  });
  const auto manifest = out_dir / "manifest.csv";
  write_manifest(manifest, rows);
  return manifest;
}

}  // namespace sonarleaf
