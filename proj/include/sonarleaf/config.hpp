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

#ifndef SONARLEAF_CONFIG_HPP
#define SONARLEAF_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sonarleaf/model.hpp"
#include "sonarleaf/optim.hpp"
#include "sonarleaf/synthgen.hpp"

namespace sonarleaf {

/// Every tunable of a run, as read from an INI file with the sections
/// [data], [model], [train] and [analysis].
struct RunConfig {
  // [data]
  std::filesystem::path data_dir = "data";
  std::filesystem::path manifest;  // defaults to data_dir/manifest.csv
  std::vector<Scenario> scenarios{Scenario::kS1, Scenario::kS2, Scenario::kS3};
  SynthConfig synth;
  std::uint64_t gen_seed = 1234;
  // [model]
  ModelConfig model;
  // [train]
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t eval_batch = 64;
  // Scenario subsets swept by the ablation; empty means just `scenarios`.
  std::vector<std::vector<Scenario>> ablation_subsets;
  // [analysis]
  double active_threshold = 0.2;
  bool analysis_pooled_stage = false;

  std::filesystem::path manifest_path() const {
    return manifest.empty() ? data_dir / "manifest.csv" : manifest;
  }
  void validate() const;
};

/// Parses INI text; unknown sections or keys are configuration errors.
RunConfig parse_run_config(std::string_view ini_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string format_run_config(const RunConfig& config);

/// Only the [model] section, used for checkpoint headers.
std::string format_model_config(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view ini_text);

std::vector<Scenario> parse_scenario_list(std::string_view text);
std::string format_scenario_list(const std::vector<Scenario>& scenarios);

/// Semicolon-separated scenario lists, e.g. "S1;S2;S1,S2,S3".
std::vector<std::vector<Scenario>> parse_subset_list(std::string_view text);
std::string format_subset_list(const std::vector<std::vector<Scenario>>& subsets);

}  // namespace sonarleaf

#endif  // SONARLEAF_CONFIG_HPP
