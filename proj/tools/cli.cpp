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


#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sonarleaf/analysis.hpp"
#include "sonarleaf/config.hpp"
#include "sonarleaf/error.hpp"
#include "sonarleaf/optim.hpp"
#include "sonarleaf/parallel.hpp"
#include "sonarleaf/synthgen.hpp"

namespace sonarleaf::cli {
namespace {

namespace fs = std::filesystem;
using Clips = std::vector<LoadedClip<float>>;

struct Options {
  std::string config_file;
  int threads = 0;
  std::vector<std::string> sets;
  std::string data_dir;
  std::string manifest;
  std::string scenarios;
  std::string subsets;
  std::string seeds;
  std::string pooling;
  std::string ctdsv;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<int> filters;
  std::string out_dir;
  std::string checkpoint;
};

struct Resolved {
  RunConfig config;
  bool model_requested = false;  // config file or flags touched [model]
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Flags become one more INI layer on top of the config file.
Resolved resolve(const Options& o) {
  Resolved r;
  if (!o.config_file.empty()) {
    const std::string text = read_text(o.config_file);
    r.config = parse_run_config(text);
    static const std::regex model_header(R"(^\s*\[model\])", std::regex::multiline);
    r.model_requested = std::regex_search(text, model_header);
  }
  std::map<std::string, std::vector<std::string>> layer;
  auto put = [&](const std::string& section, const std::string& key, const std::string& value) {
    layer[section].push_back(key + "=" + value);
    if (section == "model") r.model_requested = true;
  };
  for (const auto& s : o.sets) {
    const auto dot = s.find('.');
    const auto eq = s.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    put(s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
  }
  if (!o.data_dir.empty()) put("data", "data_dir", o.data_dir);
  if (!o.manifest.empty()) put("data", "manifest", o.manifest);
  if (!o.scenarios.empty()) put("data", "scenarios", o.scenarios);
  if (!o.subsets.empty()) put("train", "ablation_subsets", o.subsets);
  if (!o.seeds.empty()) put("train", "seeds", o.seeds);
  if (o.epochs) put("train", "epochs", std::to_string(*o.epochs));
  if (o.batch_size) put("train", "batch_size", std::to_string(*o.batch_size));
  if (o.lr) {
    std::ostringstream v;
    v << std::setprecision(17) << *o.lr;
    put("train", "lr", v.str());
  }
  if (!o.pooling.empty()) put("model", "pooling", o.pooling);
  if (!o.ctdsv.empty()) put("model", "use_ctdsv", o.ctdsv);
  if (o.filters) put("model", "num_filters", std::to_string(*o.filters));
  std::string ini;
  for (const auto& [section, lines] : layer) {
    ini += "[" + section + "]\n";
    for (const auto& l : lines) ini += l + "\n";
  }
  r.config = parse_run_config(ini, r.config);
  if (o.threads < 0) throw ConfigError("--threads must be nonnegative");
  if (o.threads > 0) set_num_threads(o.threads);
  return r;
}

Manifest scenario_manifest(const RunConfig& c, const std::vector<Scenario>& scenarios) {
  auto m = filter_scenarios(load_manifest(c.manifest_path()), scenarios);
  if (m.rows.empty()) {
    throw InputError(c.manifest_path().string() + ": no rows for scenarios " +
                     format_scenario_list(scenarios));
  }
  return m;
}

Clips load(const Manifest& m, Split split, const ModelConfig& mc) {
  return load_split<float>(m, split, mc.frontend.sample_rate, mc.clip_samples());
}

Clips only(const Clips& clips, const std::vector<Scenario>& scenarios) {
  Clips out;
  for (const auto& c : clips) {
    if (std::find(scenarios.begin(), scenarios.end(), c.row.scenario) != scenarios.end()) {
      out.push_back(c);
    }
  }
  return out;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

EpochCallback progress(std::ostream& out, const std::string& tag) {
  return [&out, tag](const EpochRecord& r) {
    out << tag << "epoch " << r.epoch << " loss " << fmt(r.train_loss) << " val "
        << fmt(r.val_accuracy);
    for (std::size_t s = 0; s < kNumScenarios; ++s) {
      if (r.val_per_scenario[s]) {
        out << ' ' << scenario_name(static_cast<Scenario>(s)) << ' '
            << fmt(*r.val_per_scenario[s], 3);
      }
    }
    out << " (" << fmt(r.seconds, 1) << " s)" << std::endl;
  };
}

std::string shortest(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_history(const fs::path& path, const TrainHistory& h, std::uint64_t seed) {
  std::ostringstream out;
  out << "# train_rows=" << h.train_rows << " val_rows=" << h.val_rows << " seed=" << seed
      << " best_epoch=" << h.best_epoch << '\n';
  for (const auto& w : h.warnings) out << "# warning: " << w << '\n';
  out << "epoch,train_loss,val_accuracy,val_accuracy_S1,val_accuracy_S2,val_accuracy_S3\n";
  for (const auto& e : h.epochs) {
    out << e.epoch << ',' << shortest(e.train_loss) << ',' << shortest(e.val_accuracy);
    for (const auto& s : e.val_per_scenario) {
      out << ',';
      if (s) out << shortest(*s);
    }
    out << '\n';
  }
  write_text(path, out.str());
}

nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["total"] = m.total;
  nlohmann::ordered_json per_class;
  nlohmann::ordered_json labels = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t support = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) support += m.confusion[c][p];
    const char* name = class_name(static_cast<ClassLabel>(c));
    labels.push_back(name);
    per_class[name] = {{"precision", m.precision[c]}, {"recall", m.recall[c]}, {"support", support}};
  }
  j["per_class"] = per_class;
  nlohmann::ordered_json confusion = nlohmann::ordered_json::array();
  for (const auto& row : m.confusion) confusion.push_back(row);
  j["confusion"] = {{"labels", labels}, {"counts", confusion}};
  nlohmann::ordered_json per_scenario = nlohmann::ordered_json::object();
  for (std::size_t s = 0; s < kNumScenarios; ++s) {
    const auto& sc = m.per_scenario[s];
    if (sc.count == 0) continue;
    per_scenario[scenario_name(static_cast<Scenario>(s))] = {
        {"accuracy", sc.accuracy()}, {"count", sc.count}};
  }
  j["per_scenario"] = per_scenario;
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string snapshot_text(const RunConfig& c, const std::string& extra = {}) {
  std::string header = "# sonarleaf run configuration\n" + extra;
  return header + format_run_config(c);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen(const Options& o, std::ostream& out) {
  const auto r = resolve(o);
  RunConfig c = r.config;
  if (!o.out_dir.empty()) {
    c.data_dir = o.out_dir;
    c.manifest.clear();
  }
  SynthConfig s = c.synth;
  s.sample_rate = c.model.frontend.sample_rate;
  s.clip_seconds = c.model.clip_seconds;
  s.scenarios = c.scenarios;
  ensure_dir(c.data_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto path = gen_dataset(s, c.data_dir, c.gen_seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(c.data_dir / "run_config.ini", snapshot_text(c));
  const auto m = load_manifest(path);
  out << "wrote " << m.rows.size() << " clips (train " << m.count(Split::kTrain) << ", val "
      << m.count(Split::kVal) << ", test " << m.count(Split::kTest) << ") to " << path.string()
      << " in " << fmt(secs, 1) << " s" << std::endl;
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto r = resolve(o);
  const RunConfig& c = r.config;
  if (o.out_dir.empty()) throw ConfigError("train needs --out");
  const fs::path dir = o.out_dir;
  const auto m = scenario_manifest(c, c.scenarios);
  const auto train_set = load(m, Split::kTrain, c.model);
  const auto val_set = load(m, Split::kVal, c.model);
  TrainConfig tc = c.train;
  tc.seed = c.seeds.front();
  out << "training on " << train_set.size() << " clips (" << format_scenario_list(c.scenarios)
      << "), validating on " << val_set.size() << ", seed " << tc.seed << std::endl;
  auto res = train<float>(c.model, tc, train_set, val_set, progress(out, ""));
  ensure_dir(dir);
  save_checkpoint(res.best, dir / "model.ckpt");
  save_checkpoint(res.last, dir / "last.ckpt");
  write_history(dir / "history.csv", res.history, tc.seed);
  write_text(dir / "run_config.ini", snapshot_text(c));
  for (const auto& w : res.history.warnings) out << "warning: " << w << std::endl;
  out << "best epoch " << res.history.best_epoch << ", checkpoint " << (dir / "model.ckpt").string()
      << std::endl;
  return kExitOk;
}

ModelState<float> load_model(const Options& o, const Resolved& r) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  auto model = load_checkpoint<float>(o.checkpoint);
  if (r.model_requested) check_compatible(model.config, r.config.model);
  return model;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto r = resolve(o);
  auto model = load_model(o, r);
  const fs::path dir = o.out_dir.empty() ? fs::path(o.checkpoint).parent_path() : fs::path(o.out_dir);
  RunConfig c = r.config;
  c.model = model.config;
  const auto m = scenario_manifest(c, c.scenarios);
  const auto test_set = load(m, Split::kTest, model.config);
  if (test_set.empty()) throw InputError("test split is empty");
  const auto metrics = evaluate(model, test_set, c.eval_batch);
  auto j = metrics_json(metrics);
  j["checkpoint"] = fs::absolute(o.checkpoint).string();
  j["scenarios"] = format_scenario_list(c.scenarios);
  ensure_dir(dir);
  write_text(dir / "metrics.json", j.dump(2) + "\n");
  write_text(dir / "eval_config.ini",
             snapshot_text(c, "# checkpoint=" + fs::absolute(o.checkpoint).string() + "\n"));
  out << "accuracy " << fmt(metrics.accuracy) << " on " << metrics.total << " clips";
  for (std::size_t s = 0; s < kNumScenarios; ++s) {
    if (metrics.per_scenario[s].count) {
      out << ", " << scenario_name(static_cast<Scenario>(s)) << ' '
          << fmt(metrics.per_scenario[s].accuracy());
    }
  }
  out << "\nmetrics written to " << (dir / "metrics.json").string() << std::endl;
  return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const auto r = resolve(o);
  const RunConfig& c = r.config;
  if (o.out_dir.empty()) throw ConfigError("ablate needs --out");
  const fs::path dir = o.out_dir;
  auto subsets = c.ablation_subsets;
  if (subsets.empty()) subsets.push_back(c.scenarios);
  std::vector<Scenario> all;
  for (const auto& s : subsets) {
    for (Scenario x : s) {
      if (std::find(all.begin(), all.end(), x) == all.end()) all.push_back(x);
    }
  }
  const auto m = scenario_manifest(c, all);
  const auto train_all = load(m, Split::kTrain, c.model);
  const auto val_all = load(m, Split::kVal, c.model);
  const auto test_all = load(m, Split::kTest, c.model);
  ensure_dir(dir);
  write_text(dir / "run_config.ini", snapshot_text(c));

  struct Cell {
    PoolingMode pooling;
    bool ctdsv;
  };
  const Cell cells[] = {{PoolingMode::kAttention, true},
                        {PoolingMode::kAttention, false},
                        {PoolingMode::kMax, true},
                        {PoolingMode::kMax, false}};
  std::ostringstream table;
  std::ostringstream runs;
  table << "subset,pooling,use_ctdsv,seeds,median_accuracy,accuracies\n";
  runs << "subset,pooling,use_ctdsv,seed,test_accuracy,best_epoch\n";
  for (const auto& subset : subsets) {
    const std::string name = format_scenario_list(subset);
    const auto tr = only(train_all, subset);
    const auto va = only(val_all, subset);
    const auto te = only(test_all, subset);
    if (tr.empty() || te.empty()) throw InputError("subset " + name + " has no train or test rows");
    for (const auto& cell : cells) {
      ModelConfig mc = c.model;
      mc.pooling = cell.pooling;
      mc.use_ctdsv = cell.ctdsv;
      std::vector<double> accs;
      for (std::uint64_t seed : c.seeds) {
        TrainConfig tc = c.train;
        tc.seed = seed;
        const std::string tag = "[" + name + " " + pooling_name(cell.pooling) +
                                (cell.ctdsv ? "+ctdsv" : "") + " seed " + std::to_string(seed) + "] ";
        auto res = train<float>(mc, tc, tr, va, progress(out, tag));
        const double acc = evaluate(res.best, te, c.eval_batch).accuracy;
        accs.push_back(acc);
        out << tag << "test accuracy " << fmt(acc) << std::endl;
        runs << '"' << name << "\"," << pooling_name(cell.pooling) << ','
             << (cell.ctdsv ? "true" : "false") << ',' << seed << ',' << shortest(acc) << ','
             << res.history.best_epoch << '\n';
      }
      table << '"' << name << "\"," << pooling_name(cell.pooling) << ','
            << (cell.ctdsv ? "true" : "false") << ',' << accs.size() << ','
            << shortest(median(accs)) << ',';
      for (std::size_t i = 0; i < accs.size(); ++i) table << (i ? ";" : "") << shortest(accs[i]);
      table << '\n';
      write_text(dir / "ablation.csv", table.str());
      write_text(dir / "runs.csv", runs.str());
    }
  }
  out << "ablation table written to " << (dir / "ablation.csv").string() << std::endl;
  return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const auto r = resolve(o);
  auto model = load_model(o, r);
  if (o.out_dir.empty()) throw ConfigError("analyze needs --out");
  const fs::path dir = o.out_dir;
  RunConfig c = r.config;
  c.model = model.config;
  const auto m = scenario_manifest(c, c.scenarios);
  const auto test_set = load(m, Split::kTest, model.config);
  ensure_dir(dir);
  std::ostringstream summary;
  summary << "scenario,clips,tug_clips,background_clips,active_filters,threshold\n";
  for (Scenario s : c.scenarios) {
    const auto clips = only(test_set, {s});
    const std::string tag = scenario_name(s);
    const auto set = activation_tensors(model.frontend, clips, c.model.frontend.sample_rate,
                                        c.analysis_pooled_stage, c.eval_batch);
    const auto tug = class_mean_activation(set.tensors, ClassLabel::kTug);
    const auto bg = class_mean_activation(set.tensors, ClassLabel::kBackground);
    const auto curve = delta_curve(tug, bg, set.order, tag);
    const auto spec = delta_spectrogram(set.tensors, ClassLabel::kTug, ClassLabel::kBackground,
                                        set.order, tag);
    write_delta_curve_csv(dir / ("delta_curve_" + tag + ".csv"), curve);
    write_delta_spectrogram_csv(dir / ("delta_spectrogram_" + tag + ".csv"), spec);
    const auto active = active_filter_count(curve, c.active_threshold);
    const auto n_tug = std::count_if(clips.begin(), clips.end(),
                                     [](const auto& x) { return x.row.label == ClassLabel::kTug; });
    const auto n_bg = std::count_if(clips.begin(), clips.end(), [](const auto& x) {
      return x.row.label == ClassLabel::kBackground;
    });
    summary << tag << ',' << clips.size() << ',' << n_tug << ',' << n_bg << ',' << active << ','
            << shortest(c.active_threshold) << '\n';
    out << tag << ": " << active << " active filters of " << curve.delta.size() << std::endl;
  }
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "run_config.ini",
             snapshot_text(c, "# checkpoint=" + fs::absolute(o.checkpoint).string() + "\n"));
  return kExitOk;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int report(std::ostream& err, const char* category, const std::string& what, int code) {
  err << "error[" << category << "]: " << one_line(what) << std::endl;
  return code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learnable-frontend underwater acoustic classifier"};
  app.name("sonarleaf");
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_file, "INI run configuration");
    sub->add_option("--threads", o.threads, "worker threads (0 = runtime default)");
    sub->add_option("--set", o.sets, "override, section.key=value (repeatable)");
    sub->add_option("--data-dir", o.data_dir, "dataset directory");
    sub->add_option("--manifest", o.manifest, "manifest path (default data-dir/manifest.csv)");
    sub->add_option("--scenarios", o.scenarios, "comma-separated scenario subset, e.g. S1,S3");
  };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--batch-size", o.batch_size, "mini-batch size");
    sub->add_option("--lr", o.lr, "Adam learning rate");
    sub->add_option("--seeds", o.seeds, "comma-separated seeds");
    sub->add_option("--pooling", o.pooling, "attention or max");
    sub->add_option("--ctdsv", o.ctdsv, "true or false");
    sub->add_option("--filters", o.filters, "number of Gabor filters");
  };

  auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
  common(gen);
  gen->add_option("-o,--out", o.out_dir, "output directory (overrides data_dir)");

  auto* trn = app.add_subcommand("train", "train one model (first seed)");
  common(trn);
  training(trn);
  trn->add_option("-o,--out", o.out_dir, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  ev->add_option("--pooling", o.pooling, "expected pooling mode");
  ev->add_option("--ctdsv", o.ctdsv, "expected CTDSV fusion");
  ev->add_option("-o,--out", o.out_dir, "output directory (default: checkpoint directory)");

  auto* abl = app.add_subcommand("ablate", "pooling x CTDSV grid over scenario subsets and seeds");
  common(abl);
  training(abl);
  abl->add_option("--subsets", o.subsets, "semicolon-separated subsets, e.g. 'S1;S2;S1,S2,S3'");
  abl->add_option("-o,--out", o.out_dir, "output directory")->required();

  auto* ana = app.add_subcommand("analyze", "Tug vs Background activation differences");
  common(ana);
  ana->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  ana->add_option("-o,--out", o.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report(err, "config", e.what(), kExitConfig);
  }

  try {
    if (*gen) return cmd_gen(o, out);
    if (*trn) return cmd_train(o, out);
    if (*ev) return cmd_eval(o, out);
    if (*abl) return cmd_ablate(o, out);
    if (*ana) return cmd_analyze(o, out);
    return report(err, "config", "no subcommand", kExitConfig);
  } catch (const Error& e) {
    switch (e.category()) {
      case ErrorCategory::kConfig:
        return report(err, "config", e.what(), kExitConfig);
      case ErrorCategory::kInput:
      case ErrorCategory::kIo:
        return report(err, category_name(e.category()), e.what(), kExitData);
      case ErrorCategory::kNumerical:
        return report(err, "numerical", e.what(), kExitNumerical);
      case ErrorCategory::kInternal:
        break;
    }
    return report(err, "internal", e.what(), kExitInternal);
  } catch (const std::exception& e) {
    return report(err, "internal", e.what(), kExitInternal);
  }
}

}  // namespace sonarleaf::cli
