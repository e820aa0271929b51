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
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sonarleaf/error.hpp"
#include "sonarleaf/head.hpp"

using namespace sonarleaf;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("class labels") {
  CHECK(static_cast<int>(parse_class_label("Tug")) == 0);
  CHECK(static_cast<int>(parse_class_label("Background")) == 4);
  CHECK(std::string(class_name(ClassLabel::kPassengership)) == "Passengership");
  CHECK_THROWS_AS(parse_class_label("Sailboat"), InputError);
}

TEST_CASE("meta branch") {
  std::mt19937_64 rng(1);
  auto head = init_head<double>(8, true, 16, rng);
  CHECK(head.fc_in() == 24);

  auto zero = head;
  for (auto* v : {&zero.meta_b1, &zero.meta_b2}) std::fill(v->begin(), v->end(), 0.0);
  std::vector<double> z(5, 0.0);
  for (double v : meta_branch<double>(z, zero)) CHECK(v == 0.0);

  auto x = random_vector(5, 2);
  CHECK(meta_branch<double>(x, head) == meta_branch<double>(x, head));

  auto off = init_head<double>(8, false, 16, rng);
  CHECK(off.fc_in() == 8);
  CHECK_THROWS_AS(meta_branch<double>(x, off), ConfigError);
}

TEST_CASE("meta branch gradients match central differences") {
  std::mt19937_64 rng(3);
  auto head = init_head<double>(4, true, 16, rng);
  for (auto* v : {&head.meta_b1, &head.meta_b2}) {
    const auto r = random_vector(v->size(), 4, 0.3);
    std::copy(r.begin(), r.end(), v->begin());
  }
  auto x = random_vector(5, 5);
  const auto probe = random_vector(16, 6);
  auto loss = [&] {
    auto out = meta_branch<double>(x, head);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += probe[i] * out[i];
    return s;
  };
  MetaCache<double> cache;
  meta_branch<double>(x, head, &cache);
  auto g = meta_branch_backward<double>(probe, head, cache);
  auto fd = [&](double& slot) { return oracle::central_difference(loss, slot); };
  for (std::size_t i = 0; i < head.meta_w1.size(); ++i) CHECK(oracle::grad_close(g.w1[i], fd(head.meta_w1[i])));
  for (std::size_t i = 0; i < head.meta_b1.size(); ++i) CHECK(oracle::grad_close(g.b1[i], fd(head.meta_b1[i])));
  for (std::size_t i = 0; i < head.meta_w2.size(); ++i) CHECK(oracle::grad_close(g.w2[i], fd(head.meta_w2[i])));
  for (std::size_t i = 0; i < head.meta_b2.size(); ++i) CHECK(oracle::grad_close(g.b2[i], fd(head.meta_b2[i])));
}

TEST_CASE("classifier") {
  std::mt19937_64 rng(7);
  auto head = init_head<double>(6, true, 16, rng);
  const auto audio = random_vector(6, 8);
  const auto meta = random_vector(16, 9);

  SUBCASE("zero weights give uniform softmax") {
    auto zero = head;
    std::fill(zero.fc_w.begin(), zero.fc_w.end(), 0.0);
    auto logits = classify<double>(audio, meta, zero);
    for (double v : logits) CHECK(v == 0.0);
    for (double p : softmax<double>(logits)) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(classify<double>(audio, std::span<const double>{}, head), ConfigError);
    auto off = init_head<double>(6, false, 16, rng);
    CHECK_THROWS_AS(classify<double>(audio, meta, off), ConfigError);
  }
  SUBCASE("ties resolve toward the lower index") {
    std::vector<double> logits{0.5, 2.0, 2.0, -1.0, 2.0};
    CHECK(predict<double>(logits) == 1);
    std::vector<double> flat(5, 0.0);
    CHECK(predict<double>(flat) == 0);
  }
  SUBCASE("gradients match central differences") {
    auto a = audio;
    auto m = meta;
    const auto probe = random_vector(5, 10);
    auto loss = [&] {
      auto out = classify<double>(a, m, head);
      double s = 0;
      for (std::size_t i = 0; i < 5; ++i) s += probe[i] * out[i];
      return s;
    };
    auto g = classify_backward<double>(probe, a, m, head);
    auto fd = [&](double& slot) { return oracle::central_difference(loss, slot); };
    for (std::size_t i = 0; i < head.fc_w.size(); ++i) CHECK(oracle::grad_close(g.fc_w[i], fd(head.fc_w[i])));
    for (std::size_t i = 0; i < 5; ++i) CHECK(oracle::grad_close(g.fc_b[i], fd(head.fc_b[i])));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(oracle::grad_close(g.audio[i], fd(a[i])));
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(oracle::grad_close(g.meta[i], fd(m[i])));
  }
}

TEST_CASE("cross entropy") {
  std::vector<double> uniform(5, 0.3);
  auto ce = cross_entropy<double>(uniform, 2);
  CHECK(std::abs(ce.loss - std::log(5.0)) < 1e-12);

  std::vector<double> saturated{0.0, 0.0, 0.0, 1000.0, 0.0};
  CHECK(cross_entropy<double>(saturated, 3).loss < 1e-6);
  CHECK(std::isfinite(cross_entropy<double>(saturated, 0).loss));

  for (unsigned seed = 0; seed < 20; ++seed) {
    auto logits = random_vector(5, seed, 4.0);
    const std::size_t label = seed % 5;
    auto base = cross_entropy<double>(logits, label);
    CHECK(base.loss >= 0.0);
    double sum = 0;
    for (double g : base.grad) sum += g;
    CHECK(std::abs(sum) < 1e-12);

    auto shifted = logits;
    for (auto& v : shifted) v += 7.5;
    auto moved = cross_entropy<double>(shifted, label);
    CHECK(moved.loss == doctest::Approx(base.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(moved.grad[i] - base.grad[i]) < 1e-12);

    for (std::size_t i = 0; i < 5; ++i) {
      const double fd = oracle::central_difference(
          [&] { return cross_entropy<double>(logits, label).loss; }, logits[i]);
      CHECK(oracle::grad_close(base.grad[i], fd));
    }
  }

  std::vector<double> bad{0.0, NAN, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(cross_entropy<double>(bad, 0), NumericalError);
  CHECK_THROWS_AS(cross_entropy<double>(uniform, 5), InputError);
}
