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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and
// thresholds are fixed below; nothing here reads them from the command line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli.hpp"
#include "sonarleaf/analysis.hpp"
#include "sonarleaf/config.hpp"
#include "sonarleaf/error.hpp"
#include "sonarleaf/optim.hpp"
#include "sonarleaf/parallel.hpp"
#include "sonarleaf/synthgen.hpp"

using namespace sonarleaf;
namespace fs = std::filesystem;

namespace {

// --- Pinned tolerances -------------------------------------------------------
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-3;
constexpr double kFdAbsFloor = 1e-8;
constexpr double kGradBudgetSeconds = 120.0;

constexpr int kBandFilters = 32;
constexpr int kBandSampled = 8;
constexpr double kBandMinRatio = 10.0;
constexpr double kBandBudgetSeconds = 30.0;

constexpr std::size_t kTrainEpochs = 15;
constexpr double kMinTestAccuracy = 0.90;
constexpr double kTrainBudgetSeconds = 20.0 * 60.0;
constexpr double kAblationGuard = 0.01;  // one percentage point

constexpr double kActiveThreshold = 0.2;

constexpr double kMomentTol = 1e-6;
constexpr double kSimplexTol = 1e-6;
constexpr double kCrossEntropyTol = 1e-12;
constexpr double kPoolConstTol = 1e-12;

constexpr double kHistoryTol = 1e-12;
constexpr double kDeltaMeanTol = 1e-12;

const std::uint64_t kSeeds[] = {0, 1, 2};

// -----------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// --- Shared state for the training-based criteria ----------------------------

struct Corpus {
  fs::path manifest_path;
  Manifest manifest;
  std::vector<LoadedClip<float>> train, val, test;
};

struct Cell {
  const char* name;
  PoolingMode pooling;
  bool ctdsv;
};

const Cell kFull{"attention+ctdsv", PoolingMode::kAttention, true};
const Cell kAttentionOnly{"attention", PoolingMode::kAttention, false};
const Cell kCtdsvOnly{"max+ctdsv", PoolingMode::kMax, true};
const Cell kBaseline{"max", PoolingMode::kMax, false};

struct TrainedRun {
  ModelState<float> model;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

class Suite {
 public:
  explicit Suite(fs::path work) : work_(std::move(work)) {}

  Corpus& corpus() {
    if (!corpus_) {
      auto c = std::make_unique<Corpus>();
      const RunConfig defaults;
      const auto t0 = Clock::now();
      std::cout << "  generating the default synthetic dataset" << std::endl;
      c->manifest_path = gen_dataset(defaults.synth, work_ / "data", defaults.gen_seed);
      c->manifest = load_manifest(c->manifest_path);
      const ModelConfig mc;
      c->train = load_split<float>(c->manifest, Split::kTrain, mc.frontend.sample_rate, mc.clip_samples());
      c->val = load_split<float>(c->manifest, Split::kVal, mc.frontend.sample_rate, mc.clip_samples());
      c->test = load_split<float>(c->manifest, Split::kTest, mc.frontend.sample_rate, mc.clip_samples());
      std::cout << "  " << c->manifest.rows.size() << " clips (train " << c->train.size() << ", val "
                << c->val.size() << ", test " << c->test.size() << ") in " << num(since(t0), 3)
                << " s" << std::endl;
      corpus_ = std::move(c);
    }
    return *corpus_;
  }

  TrainedRun& run(const Cell& cell, std::uint64_t seed) {
    const std::string key = std::string(cell.name) + "/" + std::to_string(seed);
    auto it = runs_.find(key);
    if (it != runs_.end()) return it->second;
    auto& data = corpus();
    ModelConfig mc;
    mc.pooling = cell.pooling;
    mc.use_ctdsv = cell.ctdsv;
    TrainConfig tc;
    tc.epochs = kTrainEpochs;
    tc.seed = seed;
    std::cout << "  training " << key << std::endl;
    const auto t0 = Clock::now();
    auto res = train<float>(mc, tc, data.train, data.val, [](const EpochRecord& r) {
      std::cout << "    epoch " << r.epoch << " loss " << num(r.train_loss) << " val "
                << num(r.val_accuracy) << " (" << num(r.seconds, 3) << " s)" << std::endl;
    });
    TrainedRun out;
    out.seconds = since(t0);
    out.model = std::move(res.best);
    out.test_accuracy = evaluate(out.model, data.test).accuracy;
    std::cout << "  " << key << ": test accuracy " << num(out.test_accuracy) << ", "
              << num(out.seconds, 4) << " s" << std::endl;
    return runs_.emplace(key, std::move(out)).first->second;
  }

  const fs::path& work() const { return work_; }

 private:
  fs::path work_;
  std::unique_ptr<Corpus> corpus_;
  std::map<std::string, TrainedRun> runs_;
};

// --- 1. Gradient correctness --------------------------------------------------

struct GradStats {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string worst_name;
};

void check_instance(PoolingMode pooling, bool ctdsv, std::uint64_t seed, GradStats& stats) {
  ModelConfig cfg;
  cfg.frontend.num_filters = 4;
  cfg.encoder.channels = {4, 8};
  cfg.pooling = pooling;
  cfg.use_ctdsv = ctdsv;
  cfg.attn_dim = 8;
  cfg.meta_hidden = 8;
  cfg.clip_seconds = 1000.0 / 16000.0;
  auto model = init_model<double>(cfg, seed);

  // Randomize every trainable tensor so no gradient is zero by symmetry.
  std::mt19937_64 rng(seed * 7919 + 13);
  std::normal_distribution<double> jitter(0.0, 0.1);
  for (auto& g : trainable_groups(model)) {
    if (g.name.rfind("frontend.", 0) == 0) continue;
    for (auto& v : *g.values) v += jitter(rng);
  }
  for (auto& m : model.frontend.gabor.mu) m *= 1.0 + 0.2 * jitter(rng);
  for (auto& s : model.frontend.gabor.sigma) s *= 1.0 + 0.2 * jitter(rng);
  for (auto& r : model.frontend.pooling.rho) r *= 1.0 + 0.2 * jitter(rng);
  for (auto& a : model.frontend.compression.log_gain) a += 2.0 * jitter(rng);
  clamp_frontend(model.frontend);

  // Three realistic synthetic clips, one per scenario.
  SynthConfig synth;
  synth.clip_seconds = cfg.clip_seconds;
  const auto scenarios = default_scenarios();
  std::vector<LoadedClip<double>> clips(3);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto label = static_cast<ClassLabel>((seed + i) % kNumClasses);
    auto clip = gen_clip(label, scenarios[i], synth, rng);
    clips[i].audio = clip.audio;
    clips[i].row.label = label;
    clips[i].row.scenario = scenarios[i].id;
    clips[i].row.ctdsv = clip.ctdsv;
    rows.push_back(clips[i].row);
  }
  model.ctdsv = fit_ctdsv(rows).stats;
  const auto batch = make_batch(model, clips, {0, 1, 2}, true);

  auto grads = zeros_like(model);
  model_loss_and_grad(model, batch, Mode::kTrain, false, grads);
  auto params = trainable_groups(model);
  auto analytic = trainable_groups(grads);
  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    auto& values = *params[gi].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + kFdStep;
      const double up = model_forward(model, batch, Mode::kTrain, false).loss;
      values[i] = saved - kFdStep;
      const double down = model_forward(model, batch, Mode::kTrain, false).loss;
      values[i] = saved;
      const double numeric = (up - down) / (2 * kFdStep);
      const double a = (*analytic[gi].values)[i];
      const double diff = std::abs(a - numeric);
      const double rel = diff <= kFdAbsFloor ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
      ++stats.checked;
      if (rel >= kFdRelTol) ++stats.failed;
      if (rel > stats.worst) {
        stats.worst = rel;
        stats.worst_name = params[gi].name + "[" + std::to_string(i) + "] (" +
                           pooling_name(pooling) + (ctdsv ? "+ctdsv" : "") + ", seed " +
                           std::to_string(seed) + ")";
      }
    }
  }
}

Verdict criterion_gradients(Suite&) {
  const auto t0 = Clock::now();
  GradStats stats;
  std::size_t instances = 0;
  for (auto pooling : {PoolingMode::kAttention, PoolingMode::kMax}) {
    for (bool ctdsv : {true, false}) {
      for (std::uint64_t seed : {11u, 12u}) {
        check_instance(pooling, ctdsv, seed, stats);
        ++instances;
      }
    }
  }
  const double secs = since(t0);
  Verdict v;
  v.pass = stats.failed == 0 && stats.checked > 0 && secs < kGradBudgetSeconds;
  v.detail = std::to_string(stats.checked) + " parameters over " + std::to_string(instances) +
             " instances, " + std::to_string(stats.failed) + " above rel " + num(kFdRelTol) +
             "; worst rel " + num(stats.worst, 3) +
             (stats.worst_name.empty() ? "" : " at " + stats.worst_name) + "; " + num(secs, 3) +
             " s (budget " + num(kGradBudgetSeconds) + " s)";
  return v;
}

// --- 2. Band-pass behavior ----------------------------------------------------

Verdict criterion_bandpass(Suite&) {
  const auto t0 = Clock::now();
  FilterbankConfig cfg;
  cfg.num_filters = kBandFilters;
  const auto fb = init_filterbank<double>(cfg);
  const std::size_t n = static_cast<std::size_t>(cfg.sample_rate);
  auto mean_energy = [&](double omega, std::size_t k) {
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(omega * static_cast<double>(t));
    const auto e = gabor_forward<double>(x, fb.gabor);
    double s = 0.0;
    for (double v : e.values.row(k)) s += v;
    return s / static_cast<double>(n);
  };
  double worst = std::numeric_limits<double>::infinity();
  std::size_t failed = 0;
  std::ostringstream where;
  for (int i = 0; i < kBandSampled; ++i) {
    const auto k = static_cast<std::size_t>(
        std::lround(static_cast<double>(i) * (kBandFilters - 1) / (kBandSampled - 1)));
    const double mu = fb.gabor.mu[k];
    const double far = std::min(4.0 * mu, std::numbers::pi);
    const double ratio = mean_energy(mu, k) / mean_energy(far, k);
    if (!(ratio >= kBandMinRatio)) ++failed;
    if (ratio < worst) {
      worst = ratio;
      where.str("");
      where << "filter " << k << " (" << num(fb.center_hz(k), 5) << " Hz vs "
            << num(far * cfg.sample_rate / (2 * std::numbers::pi), 5) << " Hz)";
    }
  }
  const double secs = since(t0);
  Verdict v;
  v.pass = failed == 0 && secs < kBandBudgetSeconds;
  v.detail = std::to_string(kBandSampled - failed) + "/" + std::to_string(kBandSampled) +
             " filters with ratio >= " + num(kBandMinRatio) + "; lowest " + num(worst, 4) +
             " at " + where.str() + "; " + num(secs, 3) + " s";
  return v;
}

// --- 3. Desk-scale learnability -----------------------------------------------

Verdict criterion_learnability(Suite& suite) {
  auto& data = suite.corpus();
  Verdict v;
  const bool shape_ok = data.manifest.rows.size() == 3000 && data.train.size() == 2100 &&
                        data.val.size() == 450 && data.test.size() == 450;
  std::vector<double> accs;
  double slowest = 0.0;
  for (auto seed : kSeeds) {
    const auto& r = suite.run(kFull, seed);
    accs.push_back(r.test_accuracy);
    slowest = std::max(slowest, r.seconds);
  }
  const double med = median(accs);
  v.pass = shape_ok && med >= kMinTestAccuracy && slowest < kTrainBudgetSeconds;
  std::ostringstream d;
  d << "median test accuracy " << num(med) << " (seeds:";
  for (double a : accs) d << ' ' << num(a);
  d << ") vs >= " << num(kMinTestAccuracy) << "; slowest run " << num(slowest / 60.0, 3)
    << " min on " << num_threads() << " thread(s) (budget 20 min)";
  if (!shape_ok) d << "; dataset shape is not 3000 = 2100/450/450";
  v.detail = d.str();
  return v;
}

// --- 4. Ablation ordering -----------------------------------------------------

Verdict criterion_ablation(Suite& suite) {
  std::map<std::string, double> med;
  for (const Cell* cell : {&kFull, &kAttentionOnly, &kCtdsvOnly, &kBaseline}) {
    std::vector<double> accs;
    for (auto seed : kSeeds) accs.push_back(suite.run(*cell, seed).test_accuracy);
    med[cell->name] = median(accs);
  }
  const double full = med[kFull.name];
  const double base = med[kBaseline.name];
  Verdict v;
  v.pass = full >= base && med[kAttentionOnly.name] >= base - kAblationGuard &&
           med[kCtdsvOnly.name] >= base - kAblationGuard;
  v.detail = "median accuracy " + std::string(kFull.name) + " " + num(full) + ", " +
             kAttentionOnly.name + " " + num(med[kAttentionOnly.name]) + ", " + kCtdsvOnly.name +
             " " + num(med[kCtdsvOnly.name]) + ", " + kBaseline.name + " " + num(base);
  return v;
}

// --- 5. Delta contraction -----------------------------------------------------

DeltaCurve tug_vs_background(ModelState<float>& model, const std::vector<LoadedClip<float>>& test,
                             Scenario s, std::vector<ActivationTensor>* keep = nullptr) {
  std::vector<LoadedClip<float>> clips;
  for (const auto& c : test) {
    if (c.row.scenario == s) clips.push_back(c);
  }
  auto set = activation_tensors(model.frontend, clips, model.config.frontend.sample_rate);
  auto curve = delta_curve(class_mean_activation(set.tensors, ClassLabel::kTug),
                           class_mean_activation(set.tensors, ClassLabel::kBackground), set.order,
                           scenario_name(s));
  if (keep != nullptr) *keep = std::move(set.tensors);
  return curve;
}

Verdict criterion_contraction(Suite& suite) {
  auto& data = suite.corpus();
  std::vector<double> med(kNumScenarios), spread(kNumScenarios);
  std::ostringstream d;
  for (std::size_t s = 0; s < kNumScenarios; ++s) {
    std::vector<double> counts, mags;
    for (auto seed : kSeeds) {
      auto& run = suite.run(kFull, seed);
      const auto curve = tug_vs_background(run.model, data.test, static_cast<Scenario>(s));
      counts.push_back(static_cast<double>(active_filter_count(curve, kActiveThreshold)));
      double m = 0.0;
      for (double x : curve.delta) m += std::abs(x);
      mags.push_back(m / static_cast<double>(curve.delta.size()));
    }
    med[s] = median(counts);
    spread[s] = median(mags);
  }
  Verdict v;
  v.pass = med[1] <= med[0] && med[2] <= med[1];
  d << "median active filters S1 " << num(med[0]) << ", S2 " << num(med[1]) << ", S3 "
    << num(med[2]) << " (non-increasing required); median mean|delta| " << num(spread[0], 3)
    << ", " << num(spread[1], 3) << ", " << num(spread[2], 3);
  v.detail = d.str();
  return v;
}

// --- 6. Frontend numeric invariants ------------------------------------------

Verdict criterion_invariants(Suite& suite) {
  auto& data = suite.corpus();
  ModelConfig cfg;
  auto model = init_model<double>(cfg, 3);
  std::vector<std::vector<double>> audio;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& src = data.train[i * 131 % data.train.size()].audio;
    audio.emplace_back(src.begin(), src.end());
  }
  std::vector<std::span<const double>> views(audio.begin(), audio.end());

  // Train-mode TBN moments; gamma = 1 and beta = 0 at initialization.
  auto maps = frontend_forward<double>(views, model.frontend, Mode::kTrain, nullptr, false);
  double worst_mean = 0.0, worst_var = 0.0;
  const std::size_t K = maps.front().channels();
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0, count = 0.0;
    for (const auto& m : maps) {
      for (double v : m.values.row(k)) s += v;
      count += static_cast<double>(m.frames());
    }
    const double mean = s / count;
    double ss = 0.0;
    for (const auto& m : maps) {
      for (double v : m.values.row(k)) ss += (v - mean) * (v - mean);
    }
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_var = std::max(worst_var, std::abs(ss / count - 1.0));
  }

  // Attention weights over the encoder output of the same batch.
  auto features = encode<double>(maps, model.encoder, Mode::kTrain, nullptr, false);
  double worst_simplex = 0.0;
  bool nonnegative = true;
  for (const auto& f : features) {
    const auto pooled = attention_pool(f, model.attention);
    double s = 0.0;
    for (double w : pooled.weights) {
      s += w;
      nonnegative = nonnegative && w >= 0.0;
    }
    worst_simplex = std::max(worst_simplex, std::abs(s - 1.0));
  }

  // Cross-entropy of equal logits.
  double worst_ce = 0.0;
  for (double c : {0.0, 3.7, -12.5}) {
    const std::vector<double> logits(kNumClasses, c);
    for (std::size_t label = 0; label < kNumClasses; ++label) {
      const auto ce = cross_entropy<double>(logits, label);
      worst_ce = std::max(worst_ce, std::abs(ce.loss - std::log(5.0)));
    }
  }

  // Gaussian pooling of constant rows.
  double worst_pool = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rho(1.0, 400.0), level(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = level(rng);
    const std::size_t n = 4000 + 37 * static_cast<std::size_t>(trial);
    std::vector<double> row(n, c), out(pooled_frames(n, 160));
    gaussian_pool_row<double>(row, rho(rng), 160, 4.0, out);
    for (double v : out) worst_pool = std::max(worst_pool, std::abs(v - c));
  }

  Verdict v;
  v.pass = worst_mean <= kMomentTol && worst_var <= kMomentTol && worst_simplex <= kSimplexTol &&
           nonnegative && worst_ce <= kCrossEntropyTol && worst_pool <= kPoolConstTol;
  v.detail = "TBN |mean| " + num(worst_mean, 3) + ", |var-1| " + num(worst_var, 3) +
             "; attention |sum-1| " + num(worst_simplex, 3) +
             (nonnegative ? "" : " (negative weight)") + "; |CE-ln5| " + num(worst_ce, 3) +
             "; constant pooling |err| " + num(worst_pool, 3);
  return v;
}

// --- 7. Determinism and persistence -------------------------------------------

std::vector<std::vector<double>> history_values(const fs::path& p) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
    std::vector<double> r;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) r.push_back(cell.empty() ? -1.0 : std::stod(cell));
    rows.push_back(r);
  }
  return rows;
}

double history_gap(const fs::path& a, const fs::path& b) {
  const auto x = history_values(a);
  const auto y = history_values(b);
  if (x.empty() || x.size() != y.size()) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != y[i].size()) return std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x[i].size(); ++j) gap = std::max(gap, std::abs(x[i][j] - y[i][j]));
  }
  return gap;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sonarleaf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cout << "  cli failed: " << err.str();
  return code;
}

Verdict criterion_determinism(Suite& suite) {
  const fs::path dir = suite.work() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path ini = dir / "run.ini";
  std::ofstream(ini) << "[model]\nnum_filters=8\nencoder_channels=4,8\nattn_dim=8\nmeta_hidden=8\n"
                        "clip_seconds=0.5\n[data]\ndata_dir="
                     << (dir / "data").string()
                     << "\nclips_per_cell=10\ngen_seed=77\n[train]\nepochs=3\nbatch_size=16\n"
                        "seeds=9\n";
  const int saved_threads = num_threads();
  Verdict v;
  bool ok = cli({"gen", "-c", ini.string(), "--threads", "1"}) == 0;
  for (const char* name : {"a", "b"}) {
    ok = ok && cli({"train", "-c", ini.string(), "--threads", "1", "--out", (dir / name).string()}) == 0;
  }
  ok = ok && cli({"train", "-c", ini.string(), "--threads", "4", "--out", (dir / "mt").string()}) == 0;
  set_num_threads(saved_threads);
  if (!ok) {
    v.detail = "a command-line run failed";
    return v;
  }
  const double repeat_gap = history_gap(dir / "a" / "history.csv", dir / "b" / "history.csv");
  const double thread_gap = history_gap(dir / "a" / "history.csv", dir / "mt" / "history.csv");
  const bool same_ckpt = slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt");
  const bool same_mt_ckpt = slurp(dir / "a" / "model.ckpt") == slurp(dir / "mt" / "model.ckpt");

  auto loaded = load_checkpoint<float>(dir / "a" / "model.ckpt");
  save_checkpoint(loaded, dir / "resaved.ckpt");
  const bool bitwise = slurp(dir / "a" / "model.ckpt") == slurp(dir / "resaved.ckpt");
  auto again = load_checkpoint<float>(dir / "resaved.ckpt");
  bool same_values = true;
  auto ga = trainable_groups(loaded), gb = trainable_groups(again);
  auto ba = buffer_groups(loaded), bb = buffer_groups(again);
  for (std::size_t i = 0; i < ga.size(); ++i) same_values = same_values && *ga[i].values == *gb[i].values;
  for (std::size_t i = 0; i < ba.size(); ++i) same_values = same_values && *ba[i].values == *bb[i].values;

  v.pass = repeat_gap <= kHistoryTol && thread_gap <= kHistoryTol && same_ckpt && same_mt_ckpt &&
           bitwise && same_values;
  v.detail = "history gap 1-thread repeat " + num(repeat_gap, 3) + ", 4 vs 1 threads " +
             num(thread_gap, 3) + "; checkpoints " + (same_ckpt && same_mt_ckpt ? "identical" : "differ") +
             " across runs; save/load/save " + (bitwise && same_values ? "bitwise equal" : "differs");
  return v;
}

// --- 8. Analysis algebra ------------------------------------------------------

Verdict criterion_analysis(Suite& suite) {
  auto& data = suite.corpus();
  auto& run = suite.run(kFull, kSeeds[0]);
  double worst_mean = 0.0;
  bool negated = true;
  for (std::size_t s = 0; s < kNumScenarios; ++s) {
    std::vector<ActivationTensor> tensors;
    const auto curve = tug_vs_background(run.model, data.test, static_cast<Scenario>(s), &tensors);
    const auto spec = delta_spectrogram(tensors, ClassLabel::kTug, ClassLabel::kBackground, curve.order);
    const auto swapped = delta_spectrogram(tensors, ClassLabel::kBackground, ClassLabel::kTug, curve.order);
    const auto swapped_curve =
        delta_curve(class_mean_activation(tensors, ClassLabel::kBackground),
                    class_mean_activation(tensors, ClassLabel::kTug), curve.order);
    for (std::size_t k = 0; k < spec.delta.rows; ++k) {
      double m = 0.0;
      for (double x : spec.delta.row(k)) m += x;
      m /= static_cast<double>(spec.delta.cols);
      worst_mean = std::max(worst_mean, std::abs(m - curve.delta[k]));
      negated = negated && swapped_curve.delta[k] == -curve.delta[k];
    }
    for (std::size_t i = 0; i < spec.delta.size(); ++i) {
      negated = negated && swapped.delta.data[i] == -spec.delta.data[i];
    }
  }
  Verdict v;
  v.pass = worst_mean <= kDeltaMeanTol && negated;
  v.detail = "max |time-mean(delta_t) - delta| " + num(worst_mean, 3) + " over S1..S3; class swap " +
             (negated ? "negates exactly" : "does not negate exactly");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sonarleaf acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  int threads = 0;
  app.add_option("--work-dir", work, "scratch directory for datasets and runs");
  app.add_option("--only", only, "run only these criteria (1-8)")->delimiter(',');
  app.add_option("--threads", threads, "worker threads (0 = runtime default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_num_threads(threads);

  struct Criterion {
    int id;
    const char* title;
    std::function<Verdict(Suite&)> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_gradients},
      {2, "band-pass behavior", criterion_bandpass},
      {3, "desk-scale learnability", criterion_learnability},
      {4, "ablation ordering", criterion_ablation},
      {5, "delta contraction", criterion_contraction},
      {6, "frontend numeric invariants", criterion_invariants},
      {7, "determinism and persistence", criterion_determinism},
      {8, "analysis algebra", criterion_analysis},
  };

  Suite suite(work);
  fs::create_directories(work);
  std::vector<std::string> lines;
  bool all = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    std::cout << "[criterion " << c.id << "] " << c.title << std::endl;
    Verdict v;
    try {
      v = c.check(suite);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("error: ") + e.what();
    }
    all = all && v.pass;
    lines.push_back(std::string(v.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(c.id) +
                    " (" + c.title + "): " + v.detail);
    std::cout << lines.back() << std::endl;
  }
  std::cout << "\n==== acceptance summary ====\n";
  for (const auto& l : lines) std::cout << l << '\n';
  std::cout << (all ? "all criteria passed" : "some criteria FAILED") << std::endl;
  return all ? 0 : 1;
}
