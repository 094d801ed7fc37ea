// Copyright 2026 The histocap Authors.
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
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "histocap/error.hpp"
#include "histocap/pool.hpp"

using namespace histocap;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

struct Setup {
  std::mt19937_64 rng;
  PoolParams pool;
  ProjectionParams proj;
  explicit Setup(std::uint64_t seed, std::size_t d = 6, std::size_t ha = 4, std::size_t h = 5)
      : rng(seed), pool(PoolParams::init(d, ha, rng)), proj(ProjectionParams::init(d, h, rng)) {}
};

}  // namespace

TEST_CASE("pool with one patch returns that patch with weight 1") {
  Setup s(1);
  auto f = Tensor::randn({1, 3, 6}, 1.0, s.rng);
  auto out = pool(f, s.pool);
  CHECK(out.pooled.shape() == Shape{1, 3, 6});
  CHECK(out.weights.shape() == Shape{1});
  CHECK(out.weights.data()[0] == 1.0);
  CHECK(values(out.pooled) == values(f));
}

TEST_CASE("zeroed score parameters average the patches") {
  Setup s(2);
  for (auto& v : s.pool.score_hidden.data()) v = 0;
  for (auto& v : s.pool.score_out.data()) v = 0;
  auto f = Tensor::randn({2, 3, 6}, 1.0, s.rng);
  auto out = pool(f, s.pool);
  CHECK(out.weights.data()[0] == 0.5);
  CHECK(out.weights.data()[1] == 0.5);
  for (std::size_t i = 0; i < 18; ++i) {
    CHECK(out.pooled.data()[i] == doctest::Approx(0.5 * (f.data()[i] + f.data()[18 + i])).epsilon(1e-14));
  }
}

TEST_CASE("engineered scores ln 2 and 0 give weights 2/3 and 1/3") {
  // D = 2, H_a = 1: score = tanh(mean_col0) * w_out
  PoolParams p{Tensor::from({2, 1}, {1.0, 0.0}, true), Tensor::from({1, 1}, {2.0 * std::log(2.0)}, true)};
  const double a = std::atanh(0.5);
  auto f = Tensor::from({2, 2, 2}, {a, 3.0, a, -1.0, 0.0, 4.0, 0.0, 8.0});
  auto out = pool(f, p);
  CHECK(out.weights.data()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(out.weights.data()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(out.pooled.data()[i] == doctest::Approx(2.0 / 3.0 * f.data()[i] + 1.0 / 3.0 * f.data()[4 + i]).epsilon(1e-12));
  }
}

TEST_CASE("pool weights form a simplex and pooled stays in the convex hull") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Setup s(seed);
    const std::size_t m = 1 + seed % 6;
    auto f = Tensor::randn({m, 3, 6}, 2.0, s.rng);
    auto out = pool(f, s.pool);
    double total = 0;
    for (double w : out.weights.data()) {
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
    for (std::size_t i = 0; i < 18; ++i) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t k = 0; k < m; ++k) {
        lo = std::min(lo, f.data()[k * 18 + i]);
        hi = std::max(hi, f.data()[k * 18 + i]);
      }
      CHECK(out.pooled.data()[i] >= lo - 1e-12);
      CHECK(out.pooled.data()[i] <= hi + 1e-12);
    }
  }
}

TEST_CASE("permuting patches permutes weights and leaves pooled unchanged") {
  Setup s(3);
  auto f = Tensor::randn({4, 3, 6}, 1.0, s.rng);
  const std::size_t perm[] = {2, 0, 3, 1};
  std::vector<double> permuted;
  for (auto k : perm) permuted.insert(permuted.end(), f.data().begin() + k * 18, f.data().begin() + (k + 1) * 18);
  auto a = pool(f, s.pool);
  auto b = pool(Tensor::from({4, 3, 6}, permuted), s.pool);
  for (std::size_t i = 0; i < 4; ++i) CHECK(b.weights.data()[i] == doctest::Approx(a.weights.data()[perm[i]]).epsilon(1e-14));
  for (std::size_t i = 0; i < 18; ++i) CHECK(b.pooled.data()[i] == doctest::Approx(a.pooled.data()[i]).epsilon(1e-12));
}

TEST_CASE("project examples") {
  Setup s(4, 3, 2, 3);
  auto pooled = Tensor::from({1, 2, 3}, {0.5, 1.0, 2.0, 0.0, 3.0, 0.25});
  for (auto& v : s.proj.weight.data()) v = 0;
  CHECK(values(project(pooled, s.proj)) == std::vector<double>(6, 0.0));

  std::mt19937_64 rng(5);
  ProjectionParams dead{Tensor::randn({3, 3}, 1.0, rng), Tensor::full({3}, -1e3)};
  CHECK(values(project(pooled, dead)) == std::vector<double>(6, 0.0));

  ProjectionParams eye{Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor::zeros({3})};
  auto mem = project(pooled, eye);
  CHECK(mem.shape() == Shape{2, 3});
  CHECK(values(mem) == values(pooled));

  CHECK_THROWS_AS(project(Tensor::zeros({2, 2, 3}), eye), ShapeError);
  CHECK_THROWS_AS(pool(Tensor::zeros({2, 3}), s.pool), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({0, 2, 3}), ShapeError);  // M = 0 cannot be represented
}

TEST_CASE("gradients flow through pool, project and a loss") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Setup s(seed);
    auto f = Tensor::randn({3, 4, 6}, 1.0, s.rng);
    // positive bias keeps every ReLU input away from its kink
    auto w = Tensor::randn({6, 5}, 0.1, s.rng);
    auto b = Tensor::full({5}, 2.0);
    auto r = testing::gradcheck(
        {s.pool.score_hidden.detach(), s.pool.score_out.detach(), w, b, f},
        [](const std::vector<Tensor>& x) {
          auto out = pool(x[4], PoolParams{x[0], x[1]});
          return project(out.pooled, ProjectionParams{x[2], x[3]});
        },
        seed);
    INFO(r.worst);
    CHECK(r.max_rel <= 1e-4);
  }
}

TEST_CASE("parameter names") {
  Setup s(6);
  auto names = s.pool.named_parameters();
  CHECK(names[0].first == "pool.score_hidden");
  CHECK(s.proj.named_parameters()[1].first == "proj.bias");
  CHECK(s.pool.score_hidden.requires_grad());
  CHECK(s.proj.weight.requires_grad());
}
