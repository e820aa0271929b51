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

#include "sonarleaf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sonarleaf/error.hpp"

namespace sonarleaf {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(const std::string&)>;
using Section = std::map<std::string, Setter>;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const std::string t = trim(v);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const std::string t = trim(v);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError("'" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const auto u = to_u64(key, v);
  if (u > 1u << 30) throw ConfigError("'" + key + "' is out of range");
  return static_cast<int>(u);
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

Section model_section(ModelConfig& m) {
  auto& f = m.frontend;
  return {
      {"num_filters", [&](const std::string& v) { f.num_filters = to_int("num_filters", v); }},
      {"sample_rate", [&](const std::string& v) { f.sample_rate = to_int("sample_rate", v); }},
      {"f_min", [&](const std::string& v) { f.f_min = to_double("f_min", v); }},
      {"f_max", [&](const std::string& v) { f.f_max = to_double("f_max", v); }},
      {"kernel_width", [&](const std::string& v) { f.kernel_width = to_int("kernel_width", v); }},
      {"hop_ms", [&](const std::string& v) { f.hop_ms = to_double("hop_ms", v); }},
      {"window_ms", [&](const std::string& v) { f.window_ms = to_double("window_ms", v); }},
      {"window_span", [&](const std::string& v) { f.window_span = to_double("window_span", v); }},
      {"sigma_min", [&](const std::string& v) { f.sigma_min = to_double("sigma_min", v); }},
      {"log_gain_init", [&](const std::string& v) { f.log_gain_init = to_double("log_gain_init", v); }},
      {"norm_eps",
       [&](const std::string& v) { f.eps = m.encoder.eps = to_double("norm_eps", v); }},
      {"norm_momentum",
       [&](const std::string& v) {
         f.momentum = m.encoder.momentum = to_double("norm_momentum", v);
       }},
      {"encoder_channels",
       [&](const std::string& v) {
         m.encoder.channels.clear();
         for (const auto& c : split_list(v)) m.encoder.channels.push_back(to_int("encoder_channels", c));
       }},
      {"pooling", [&](const std::string& v) { m.pooling = parse_pooling(trim(v)); }},
      {"use_ctdsv", [&](const std::string& v) { m.use_ctdsv = to_bool("use_ctdsv", v); }},
      {"attn_dim", [&](const std::string& v) { m.attn_dim = to_int("attn_dim", v); }},
      {"meta_hidden", [&](const std::string& v) { m.meta_hidden = to_int("meta_hidden", v); }},
      {"clip_seconds", [&](const std::string& v) { m.clip_seconds = to_double("clip_seconds", v); }},
  };
}

void write_model(std::ostream& out, const ModelConfig& m) {
  const auto& f = m.frontend;
  out << "[model]\n";
  out << "num_filters=" << f.num_filters << '\n';
  out << "sample_rate=" << f.sample_rate << '\n';
  out << "f_min=" << num(f.f_min) << '\n';
  out << "f_max=" << num(f.f_max) << '\n';
  out << "kernel_width=" << f.kernel_width << '\n';
  out << "hop_ms=" << num(f.hop_ms) << '\n';
  out << "window_ms=" << num(f.window_ms) << '\n';
  out << "window_span=" << num(f.window_span) << '\n';
  out << "sigma_min=" << num(f.sigma_min) << '\n';
  out << "log_gain_init=" << num(f.log_gain_init) << '\n';
  out << "norm_eps=" << num(f.eps) << '\n';
  out << "norm_momentum=" << num(f.momentum) << '\n';
  out << "encoder_channels=";
  for (std::size_t i = 0; i < m.encoder.channels.size(); ++i) {
    out << (i ? "," : "") << m.encoder.channels[i];
  }
  out << '\n';
  out << "pooling=" << pooling_name(m.pooling) << '\n';
  out << "use_ctdsv=" << (m.use_ctdsv ? "true" : "false") << '\n';
  out << "attn_dim=" << m.attn_dim << '\n';
  out << "meta_hidden=" << m.meta_hidden << '\n';
  out << "clip_seconds=" << num(m.clip_seconds) << '\n';
}

pt::ptree read_tree(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return tree;
}

void apply(const pt::ptree& section, const std::string& name, Section& setters) {
  for (const auto& [key, node] : section) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
    it->second(node.data());
  }
}

}  // namespace

std::vector<Scenario> parse_scenario_list(std::string_view text) {
  std::vector<Scenario> out;
  for (const auto& s : split_list(text)) {
    try {
      const Scenario sc = parse_scenario(s);
      if (std::find(out.begin(), out.end(), sc) != out.end()) {
        throw ConfigError("scenario " + s + " listed twice");
      }
      out.push_back(sc);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  if (out.empty()) throw ConfigError("scenario list is empty");
  return out;
}

std::string format_scenario_list(const std::vector<Scenario>& scenarios) {
  std::string out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (i) out += ',';
    out += scenario_name(scenarios[i]);
  }
  return out;
}

std::vector<std::vector<Scenario>> parse_subset_list(std::string_view text) {
  std::vector<std::vector<Scenario>> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(';', start), text.size());
    const std::string part = trim(text.substr(start, end - start));
    if (!part.empty()) out.push_back(parse_scenario_list(part));
    start = end + 1;
  }
  return out;
}

std::string format_subset_list(const std::vector<std::vector<Scenario>>& subsets) {
  std::string out;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (i) out += ';';
    out += format_scenario_list(subsets[i]);
  }
  return out;
}

std::string format_model_config(const ModelConfig& config) {
  std::ostringstream out;
  write_model(out, config);
  return out.str();
}

ModelConfig parse_model_config(std::string_view ini_text) {
  const auto tree = read_tree(ini_text);
  ModelConfig m;
  auto setters = model_section(m);
  if (auto sec = tree.get_child_optional("model")) apply(*sec, "model", setters);
  m.validate();
  return m;
}

RunConfig parse_run_config(std::string_view ini_text, RunConfig base) {
  const auto tree = read_tree(ini_text);
  RunConfig c = std::move(base);
  std::map<std::string, Section> sections;
  sections["model"] = model_section(c.model);
  sections["data"] = {
      {"data_dir", [&](const std::string& v) { c.data_dir = trim(v); }},
      {"manifest", [&](const std::string& v) { c.manifest = trim(v); }},
      {"scenarios", [&](const std::string& v) { c.scenarios = parse_scenario_list(v); }},
      {"clips_per_cell",
       [&](const std::string& v) { c.synth.clips_per_cell = to_u64("clips_per_cell", v); }},
      {"gen_seed", [&](const std::string& v) { c.gen_seed = to_u64("gen_seed", v); }},
      {"noise_rms", [&](const std::string& v) { c.synth.noise_rms = to_double("noise_rms", v); }},
      {"level_jitter_db",
       [&](const std::string& v) { c.synth.level_jitter_db = to_double("level_jitter_db", v); }},
      {"train_fraction",
       [&](const std::string& v) { c.synth.train_fraction = to_double("train_fraction", v); }},
      {"val_fraction",
       [&](const std::string& v) { c.synth.val_fraction = to_double("val_fraction", v); }},
  };
  sections["train"] = {
      {"epochs", [&](const std::string& v) { c.train.epochs = to_u64("epochs", v); }},
      {"batch_size", [&](const std::string& v) { c.train.batch_size = to_u64("batch_size", v); }},
      {"lr", [&](const std::string& v) { c.train.adam.lr = to_double("lr", v); }},
      {"beta1", [&](const std::string& v) { c.train.adam.beta1 = to_double("beta1", v); }},
      {"beta2", [&](const std::string& v) { c.train.adam.beta2 = to_double("beta2", v); }},
      {"adam_eps", [&](const std::string& v) { c.train.adam.eps = to_double("adam_eps", v); }},
      {"seeds",
       [&](const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) c.seeds.push_back(to_u64("seeds", s));
       }},
      {"eval_batch", [&](const std::string& v) { c.eval_batch = to_u64("eval_batch", v); }},
      {"ablation_subsets",
       [&](const std::string& v) { c.ablation_subsets = parse_subset_list(v); }},
  };
  sections["analysis"] = {
      {"active_threshold",
       [&](const std::string& v) { c.active_threshold = to_double("active_threshold", v); }},
      {"stage",
       [&](const std::string& v) {
         const std::string t = trim(v);
         if (t == "normalized") {
           c.analysis_pooled_stage = false;
         } else if (t == "pooled") {
           c.analysis_pooled_stage = true;
         } else {
           throw ConfigError("[analysis] stage must be 'normalized' or 'pooled'");
         }
       }},
  };
  for (const auto& [name, section] : tree) {
    if (!section.data().empty() && section.empty()) {
      throw ConfigError("key '" + name + "' must live inside a section");
    }
    auto it = sections.find(name);
    if (it == sections.end()) throw ConfigError("unknown section [" + name + "]");
    apply(section, name, it->second);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), std::move(base));
}

void RunConfig::validate() const {
  model.validate();
  if (scenarios.empty()) throw ConfigError("no scenarios selected");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (train.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (eval_batch < 1) throw ConfigError("eval_batch must be at least 1");
  if (!(train.adam.lr >= 0.0)) throw ConfigError("lr must be nonnegative");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) ||
      !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0) || !(train.adam.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  if (!(active_threshold > 0.0)) throw ConfigError("active_threshold must be positive");
  SynthConfig s = synth;
  s.sample_rate = model.frontend.sample_rate;
  s.clip_seconds = model.clip_seconds;
  s.scenarios = scenarios;
  s.validate();
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[data]\n";
  out << "data_dir=" << c.data_dir.string() << '\n';
  out << "manifest=" << c.manifest_path().string() << '\n';
  out << "scenarios=" << format_scenario_list(c.scenarios) << '\n';
  out << "clips_per_cell=" << c.synth.clips_per_cell << '\n';
  out << "gen_seed=" << c.gen_seed << '\n';
  out << "noise_rms=" << num(c.synth.noise_rms) << '\n';
  out << "level_jitter_db=" << num(c.synth.level_jitter_db) << '\n';
  out << "train_fraction=" << num(c.synth.train_fraction) << '\n';
  out << "val_fraction=" << num(c.synth.val_fraction) << '\n';
  out << '\n';
  write_model(out, c.model);
  out << "\n[train]\n";
  out << "epochs=" << c.train.epochs << '\n';
  out << "batch_size=" << c.train.batch_size << '\n';
  out << "lr=" << num(c.train.adam.lr) << '\n';
  out << "beta1=" << num(c.train.adam.beta1) << '\n';
  out << "beta2=" << num(c.train.adam.beta2) << '\n';
  out << "adam_eps=" << num(c.train.adam.eps) << '\n';
  out << "seeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n';
  out << "eval_batch=" << c.eval_batch << '\n';
  out << "ablation_subsets=" << format_subset_list(c.ablation_subsets) << '\n';
  out << "\n[analysis]\n";
  out << "active_threshold=" << num(c.active_threshold) << '\n';
  out << "stage=" << (c.analysis_pooled_stage ? "pooled" : "normalized") << '\n';
  return out.str();
}

}  // namespace sonarleaf
