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

#include "sonarleaf/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "sonarleaf/error.hpp"
#include "sonarleaf/frontend.hpp"
#include "sonarleaf/parallel.hpp"

namespace sonarleaf {

namespace {
constexpr std::array<const char*, kNumScenarios> kScenarioNames = {"S1", "S2", "S3"};
constexpr std::array<const char*, 3> kSplitNames = {"train", "val", "test"};
}  // namespace

const char* scenario_name(Scenario s) {
  return kScenarioNames.at(static_cast<std::size_t>(s));
}

Scenario parse_scenario(std::string_view name) {
  for (std::size_t i = 0; i < kNumScenarios; ++i) {
    if (name == kScenarioNames[i]) return static_cast<Scenario>(i);
  }
  throw InputError("unknown scenario '" + std::string(name) + "'");
}

const char* split_name(Split s) { return kSplitNames.at(static_cast<std::size_t>(s)); }

Split parse_split(std::string_view name) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
    if (name == kSplitNames[i]) return static_cast<Split>(i);
  }
  throw InputError("unknown split '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) {
    throw InputError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    fail("not a RIFF/WAVE file");
  }
  WavData wav;
  bool have_fmt = false;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + static_cast<long>(pos),
                         bytes.begin() + static_cast<long>(pos) + 4);
    const std::size_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) fail("truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (size < 16) fail("short fmt chunk");
      std::uint16_t format = le16(&bytes[body]);
      if (format == 0xFFFE && size >= 26) format = le16(&bytes[body + 24]);
      wav.channels = le16(&bytes[body + 2]);
      wav.sample_rate = static_cast<int>(le32(&bytes[body + 4]));
      const int bits = le16(&bytes[body + 14]);
      if (format != 1 || bits != 16) fail("only 16-bit PCM is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail("data chunk before fmt chunk");
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        wav.samples[i] = static_cast<std::int16_t>(le16(&bytes[body + 2 * i]));
      }
      have_data = true;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !have_data) fail("missing fmt or data chunk");
  if (wav.channels < 1) fail("invalid channel count");
  return wav;
}

template <typename T>
void write_wav(const std::filesystem::path& path, std::span<const T> samples,
               int sample_rate) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (const T s : samples) {
    const double v = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

template <typename T>
std::vector<T> fit_length(std::span<const T> x, std::size_t length) {
  if (x.empty()) throw InputError("clip has no samples");
  std::vector<T> out(length);
  if (x.size() >= length) {
    const std::size_t start = (x.size() - length) / 2;
    std::copy_n(x.begin() + static_cast<long>(start), length, out.begin());
  } else if (x.size() == 1) {
    std::fill(out.begin(), out.end(), x[0]);
  } else {
    for (std::size_t i = 0; i < length; ++i) {
      out[i] = x[reflect_index(static_cast<long>(i), x.size())];
    }
  }
  return out;
}

template <typename T>
std::vector<T> load_clip(const std::filesystem::path& path, int sample_rate,
                         std::size_t length) {
  const WavData wav = read_wav(path);
  if (wav.channels != 1) {
    throw InputError(path.string() + ": expected mono, found " +
                     std::to_string(wav.channels) + " channels");
  }
  if (wav.sample_rate != sample_rate) {
    throw InputError(path.string() + ": sample rate " + std::to_string(wav.sample_rate) +
                     " Hz, expected " + std::to_string(sample_rate) + " Hz");
  }
  std::vector<T> x(wav.samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(wav.samples[i] / 32768.0);
  return fit_length<T>(x, length);
}

// ---------------------------------------------------------------------------
// Manifest

std::vector<std::size_t> Manifest::split_indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].split == s) idx.push_back(i);
  }
  return idx;
}

std::size_t Manifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [s](const auto& r) { return r.split == s; }));
}

std::map<std::pair<ClassLabel, Scenario>, std::size_t> Manifest::cell_counts() const {
  std::map<std::pair<ClassLabel, Scenario>, std::size_t> cells;
  for (const auto& r : rows) ++cells[{r.label, r.scenario}];
  return cells;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const char* field) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InputError(std::string("invalid ") + field + " '" + s + "'");
  }
  return v;
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!header_seen) {
      if (line.empty()) continue;
      if (line != kManifestHeader) {
        throw InputError(path.string() + ": header must be '" + std::string(kManifestHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (f.size() != 10) {
      errors.push_back(where + "expected 10 fields, found " + std::to_string(f.size()));
      continue;
    }
    try {
      ManifestRow row;
      row.line = lineno;
      row.path = f[0];
      if (row.path.empty()) throw InputError("empty path");
      row.label = parse_class_label(f[1]);
      row.scenario = parse_scenario(f[2]);
      if (!f[3].empty()) row.distance_km = parse_number(f[3], "distance_km");
      row.ctdsv.conductivity = parse_number(f[4], "conductivity");
      row.ctdsv.temperature = parse_number(f[5], "temperature");
      row.ctdsv.depth = parse_number(f[6], "depth");
      row.ctdsv.salinity = parse_number(f[7], "salinity");
      row.ctdsv.sound_velocity = parse_number(f[8], "sound_velocity");
      row.split = parse_split(f[9]);
      if (!seen.insert(row.path).second) throw InputError("duplicate path '" + row.path + "'");
      if (check_files && !std::filesystem::exists(m.root / row.path)) {
        throw InputError("missing file '" + row.path + "'");
      }
      m.rows.push_back(std::move(row));
    } catch (const InputError& e) {
      errors.push_back(where + e.what());
    }
  }
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": " << errors.size() << " invalid row(s)";
    for (const auto& e : errors) msg << "\n  " << e;
    throw InputError(msg.str());
  }
  if (m.rows.empty()) throw InputError(path.string() + ": no rows");
  return m;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : rows) {
    if (r.path.find(',') != std::string::npos) {
      throw InputError("manifest paths may not contain commas: " + r.path);
    }
    out << r.path << ',' << class_name(r.label) << ',' << scenario_name(r.scenario) << ','
        << (r.distance_km ? format_number(*r.distance_km) : std::string()) << ','
        << format_number(r.ctdsv.conductivity) << ',' << format_number(r.ctdsv.temperature)
        << ',' << format_number(r.ctdsv.depth) << ',' << format_number(r.ctdsv.salinity)
        << ',' << format_number(r.ctdsv.sound_velocity) << ',' << split_name(r.split)
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Manifest filter_scenarios(const Manifest& manifest,
                          const std::vector<Scenario>& scenarios) {
  Manifest out;
  out.root = manifest.root;
  for (const auto& r : manifest.rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) != scenarios.end()) {
      out.rows.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CTDSV

CtdsvFit fit_ctdsv(const std::vector<ManifestRow>& train_rows) {
  CtdsvFit fit;
  if (train_rows.empty()) return fit;
  static constexpr std::array<const char*, kCtdsvDim> names = {
      "conductivity", "temperature", "depth", "salinity", "sound_velocity"};
  const double n = static_cast<double>(train_rows.size());
  for (std::size_t i = 0; i < kCtdsvDim; ++i) {
    double mean = 0.0;
    for (const auto& r : train_rows) mean += r.ctdsv.values()[i];
    mean /= n;
    double var = 0.0;
    for (const auto& r : train_rows) {
      const double d = r.ctdsv.values()[i] - mean;
      var += d * d;
    }
    var /= n;
    fit.stats.mean[i] = mean;
    if (var > 0.0) {
      fit.stats.stddev[i] = std::sqrt(var);
    } else {
      fit.stats.stddev[i] = 1.0;
      fit.warnings.push_back(std::string("CTDSV field '") + names[i] +
                             "' is constant over the training split");
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Batching

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count,
                                                 std::size_t batch_size,
                                                 std::uint64_t seed,
                                                 std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < count; i += batch_size) {
    const std::size_t end = std::min(count, i + batch_size);
    batches.emplace_back(perm.begin() + static_cast<long>(i), perm.begin() + static_cast<long>(end));
  }
  return batches;
}

template <typename T>
std::vector<LoadedClip<T>> load_split(const Manifest& manifest, Split split,
                                      int sample_rate, std::size_t length) {
  const auto idx = manifest.split_indices(split);
  std::vector<LoadedClip<T>> clips(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    const auto& row = manifest.rows[idx[i]];
    clips[i].row = row;
    clips[i].audio = load_clip<T>(manifest.resolve(row), sample_rate, length);
  });
  return clips;
}

#define SONARLEAF_INSTANTIATE_DATAIO(T)                                        \
  template void write_wav<T>(const std::filesystem::path&, std::span<const T>, \
                             int);                                             \
  template std::vector<T> load_clip<T>(const std::filesystem::path&, int,      \
                                       std::size_t);                           \
  template std::vector<T> fit_length<T>(std::span<const T>, std::size_t);      \
  template std::vector<LoadedClip<T>> load_split<T>(const Manifest&, Split,    \
                                                    int, std::size_t);

SONARLEAF_INSTANTIATE_DATAIO(float)
SONARLEAF_INSTANTIATE_DATAIO(double)

}  // namespace sonarleaf
