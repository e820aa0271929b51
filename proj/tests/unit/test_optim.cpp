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


#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "small_model.hpp"
#include "sonarleaf/error.hpp"
#include "sonarleaf/optim.hpp"
#include "sonarleaf/parallel.hpp"
#include "temp_dir.hpp"

using namespace sonarleaf;

namespace {

template <typename T>
std::vector<std::vector<T>> snapshot(ModelState<T>& m) {
  std::vector<std::vector<T>> out;
  for (auto& g : trainable_groups(m)) out.push_back(*g.values);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

TrainConfig quick_train(std::size_t epochs, double lr = 1e-3) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.adam.lr = lr;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  auto model = init_model<double>(testing::small_config(PoolingMode::kAttention, true), 1);
  auto grads = zeros_like(model);
  auto state = init_adam(model, AdamConfig{});
  const auto before = snapshot(model);
  for (int i = 0; i < 3; ++i) adam_step(model, grads, state);
  CHECK(snapshot(model) == before);
  CHECK(state.step == 3);
}

TEST_CASE("first Adam step moves each parameter by about lr against the gradient") {
  auto model = init_model<double>(testing::small_config(PoolingMode::kAttention, true), 1);
  // Keep the frontend well inside its clamp ranges.
  auto grads = zeros_like(model);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mag(0.01, 2.0);
  for (auto& g : trainable_groups(grads)) {
    for (std::size_t i = 0; i < g.values->size(); ++i) {
      (*g.values)[i] = (i % 2 ? -1.0 : 1.0) * mag(rng);
    }
  }
  AdamConfig cfg;
  cfg.lr = 1e-4;
  auto state = init_adam(model, cfg);
  const auto before = snapshot(model);
  adam_step(model, grads, state);
  const auto after = snapshot(model);
  auto g = snapshot(grads);
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = 0; j < before[i].size(); ++j) {
      // m_hat = g, v_hat = g^2 at t = 1, so the step is lr * g / (|g| + eps).
      const double expected = -cfg.lr * g[i][j] / (std::abs(g[i][j]) + cfg.eps);
      REQUIRE(after[i][j] - before[i][j] == doctest::Approx(expected).epsilon(1e-6));
      REQUIRE(std::abs(std::abs(after[i][j] - before[i][j]) - cfg.lr) < 1e-9);
    }
  }
}

TEST_CASE("Adam clamps the frontend after the step") {
  auto model = init_model<double>(testing::small_config(PoolingMode::kMax, false), 1);
  model.frontend.gabor.mu[3] = 3.3;
  model.frontend.gabor.sigma[0] = 0.1;
  model.frontend.pooling.rho[1] = 0.0;
  auto grads = zeros_like(model);
  auto state = init_adam(model, AdamConfig{});
  adam_step(model, grads, state);
  CHECK(model.frontend.gabor.mu[3] == doctest::Approx(model.frontend.mu_max()).epsilon(1e-15));
  CHECK(model.frontend.gabor.sigma[0] >= model.frontend.gabor.sigma_min);
  CHECK(model.frontend.pooling.rho[1] >= 1.0);
}

TEST_CASE("non-finite gradients abort before any update") {
  auto model = init_model<double>(testing::small_config(PoolingMode::kAttention, true), 1);
  auto grads = zeros_like(model);
  for (auto& g : trainable_groups(grads)) std::fill(g.values->begin(), g.values->end(), 0.5);
  grads.encoder.blocks[1].gamma[2] = std::nan("");
  auto state = init_adam(model, AdamConfig{});
  const auto before = snapshot(model);
  CHECK_THROWS_WITH_AS(adam_step(model, grads, state), doctest::Contains("encoder.block1.gamma"),
                       NumericalError);
  CHECK(snapshot(model) == before);
  CHECK(state.step == 0);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(init_adam(model, bad), ConfigError);
}

TEST_CASE("learning rate zero keeps every parameter bitwise") {
  const auto cfg = testing::small_config(PoolingMode::kAttention, true);
  const auto train_set = testing::toy_clips<float>(20, cfg.clip_samples(), 1);
  const auto val_set = testing::toy_clips<float>(10, cfg.clip_samples(), 2);
  auto init = init_model<float>(cfg, 3);
  const auto res = train<float>(cfg, quick_train(2, 0.0), train_set, val_set);
  auto last = res.last;
  CHECK(snapshot(last) == snapshot(init));
}

TEST_CASE("training updates filters and classifier jointly") {
  const auto cfg = testing::small_config(PoolingMode::kAttention, true);
  const auto train_set = testing::toy_clips<float>(20, cfg.clip_samples(), 1);
  const auto val_set = testing::toy_clips<float>(10, cfg.clip_samples(), 2);
  auto init = init_model<float>(cfg, 3);
  auto res = train<float>(cfg, quick_train(1), train_set, val_set);
  CHECK(res.last.frontend.gabor.mu != init.frontend.gabor.mu);
  CHECK(res.last.frontend.gabor.sigma != init.frontend.gabor.sigma);
  CHECK(res.last.frontend.pooling.rho != init.frontend.pooling.rho);
  CHECK(res.last.head.fc_w != init.head.fc_w);
  CHECK(res.history.epochs.size() == 1);
  CHECK(res.history.train_rows == 20);
  CHECK(res.history.val_rows == 10);
  CHECK(res.history.best_epoch == 1);
}

TEST_CASE("repeated batch loss decreases") {
  const auto cfg = testing::small_config(PoolingMode::kAttention, true);
  auto model = init_model<double>(cfg, 9);
  const auto clips = testing::toy_clips<double>(10, cfg.clip_samples(), 4);
  std::vector<std::size_t> idx(10);
  std::iota(idx.begin(), idx.end(), 0);
  model.ctdsv = fit_ctdsv([&] {
    std::vector<ManifestRow> rows;
    for (const auto& c : clips) rows.push_back(c.row);
    return rows;
  }()).stats;
  const auto batch = make_batch(model, clips, idx, true);
  auto state = init_adam(model, AdamConfig{});
  double prev = std::numeric_limits<double>::infinity();
  double first = 0.0;
  for (int step = 0; step < 50; ++step) {
    auto grads = zeros_like(model);
    const double loss = model_loss_and_grad(model, batch, Mode::kTrain, true, grads).loss;
    if (step == 0) first = loss;
    INFO("step ", step);
    CHECK(loss <= prev + 1e-3);
    prev = loss;
    adam_step(model, grads, state);
  }
  CHECK(prev < first);
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto cfg = testing::small_config(PoolingMode::kAttention, true);
  const auto train_set = testing::toy_clips<float>(24, cfg.clip_samples(), 1);
  const auto val_set = testing::toy_clips<float>(10, cfg.clip_samples(), 2);
  const int saved = num_threads();
  set_num_threads(1);
  auto a = train<float>(cfg, quick_train(2), train_set, val_set);
  auto b = train<float>(cfg, quick_train(2), train_set, val_set);
  set_num_threads(3);
  auto c = train<float>(cfg, quick_train(2), train_set, val_set);
  set_num_threads(saved);
  for (auto* other : {&b, &c}) {
    REQUIRE(other->history.epochs.size() == a.history.epochs.size());
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
      CHECK(other->history.epochs[e].train_loss == a.history.epochs[e].train_loss);
      CHECK(other->history.epochs[e].val_accuracy == a.history.epochs[e].val_accuracy);
    }
    CHECK(snapshot(other->last) == snapshot(a.last));
  }
}

TEST_CASE("empty classes are reported as warnings") {
  const auto cfg = testing::small_config(PoolingMode::kMax, true);
  auto train_set = testing::toy_clips<float>(10, cfg.clip_samples(), 1);
  std::erase_if(train_set, [](const auto& c) { return c.row.label == ClassLabel::kCargo; });
  const auto val_set = testing::toy_clips<float>(5, cfg.clip_samples(), 2);
  const auto res = train<float>(cfg, quick_train(1), train_set, val_set);
  bool found = false;
  for (const auto& w : res.history.warnings) found = found || w.find("Cargo") != std::string::npos;
  CHECK(found);
  CHECK_THROWS_AS(train<float>(cfg, quick_train(1), {}, val_set), InputError);
}

TEST_CASE("metrics identities") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> cls(0, 4), sc(0, 2);
  std::vector<std::size_t> labels(200), preds(200);
  std::vector<Scenario> scen(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = cls(rng);
    preds[i] = i % 3 ? labels[i] : cls(rng);
    scen[i] = static_cast<Scenario>(sc(rng));
  }
  const auto m = compute_metrics(labels, preds, scen);
  CHECK(m.total == 200);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    trace += m.confusion[c][c];
    std::size_t row = 0;
    for (std::size_t p = 0; p < 5; ++p) row += m.confusion[c][p];
    CHECK(row == static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c)));
  }
  CHECK(m.accuracy == static_cast<double>(trace) / 200.0);
  double recomposed = 0.0;
  for (const auto& s : m.per_scenario) recomposed += s.accuracy() * static_cast<double>(s.count);
  CHECK(std::abs(recomposed / 200.0 - m.accuracy) < 1e-12);

  const auto perfect = compute_metrics(labels, labels, scen);
  CHECK(perfect.accuracy == 1.0);
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t p = 0; p < 5; ++p) {
      if (c != p) CHECK(perfect.confusion[c][p] == 0);
    }
    CHECK(perfect.precision[c] == 1.0);
    CHECK(perfect.recall[c] == 1.0);
  }
  // A class that never occurs and is never predicted scores zero.
  const auto sparse = compute_metrics({0, 0}, {0, 1}, {Scenario::kS1, Scenario::kS1});
  CHECK(sparse.precision[1] == 0.0);
  CHECK(sparse.recall[2] == 0.0);
  CHECK(sparse.recall[0] == 0.5);
  CHECK_THROWS_AS(compute_metrics({0}, {}, {Scenario::kS1}), InternalError);
}

TEST_CASE("checkpoint round trip is bitwise") {
  TempDir dir;
  const auto cfg = testing::small_config(PoolingMode::kAttention, true);
  const auto train_set = testing::toy_clips<float>(16, cfg.clip_samples(), 1);
  auto res = train<float>(cfg, quick_train(1), train_set, train_set);
  auto model = res.last;
  save_checkpoint(model, dir / "m.ckpt");
  auto back = load_checkpoint<float>(dir / "m.ckpt");
  CHECK(snapshot(back) == snapshot(model));
  auto bm = buffer_groups(model), bb = buffer_groups(back);
  REQUIRE(bm.size() == bb.size());
  for (std::size_t i = 0; i < bm.size(); ++i) CHECK(*bm[i].values == *bb[i].values);
  CHECK(back.ctdsv.mean == model.ctdsv.mean);
  CHECK(back.ctdsv.stddev == model.ctdsv.stddev);
  CHECK(back.frontend.compression.tracked_batches == model.frontend.compression.tracked_batches);
  CHECK(same_architecture(back.config, model.config));
  CHECK(!std::filesystem::exists(dir / "m.ckpt.tmp"));

  // Saving the loaded model reproduces the file byte for byte.
  save_checkpoint(back, dir / "again.ckpt");
  CHECK(slurp(dir / "again.ckpt") == slurp(dir / "m.ckpt"));

  // Predictions agree after reload.
  CHECK(predict_clips(back, train_set) == predict_clips(model, train_set));
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir;
  auto model = init_model<float>(testing::small_config(PoolingMode::kMax, false), 2);
  save_checkpoint(model, dir / "ok.ckpt");
  const std::string good = slurp(dir / "ok.ckpt");

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  spit(dir / "magic.ckpt", bad_magic);
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir / "magic.ckpt"), doctest::Contains("magic"), IoError);

  std::string bad_version = good;
  bad_version[8] = 9;
  spit(dir / "version.ckpt", bad_version);
  CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir / "version.ckpt"), doctest::Contains("version"), IoError);

  spit(dir / "short.ckpt", good.substr(0, good.size() - 10));
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "short.ckpt"), IoError);
  spit(dir / "long.ckpt", good + "xx");
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "long.ckpt"), IoError);
  CHECK_THROWS_AS(load_checkpoint<float>(dir / "none.ckpt"), IoError);
}

TEST_CASE("architecture mismatches are configuration errors") {
  const auto att = testing::small_config(PoolingMode::kAttention, true);
  auto req = att;
  req.pooling = PoolingMode::kMax;
  CHECK_THROWS_WITH_AS(check_compatible(att, req), doctest::Contains("pooling"), ConfigError);
  req = att;
  req.use_ctdsv = false;
  CHECK_THROWS_WITH_AS(check_compatible(att, req), doctest::Contains("CTDSV"), ConfigError);
  req = att;
  req.frontend.num_filters = 8;
  CHECK_THROWS_AS(check_compatible(att, req), ConfigError);
  CHECK_NOTHROW(check_compatible(att, att));
}
