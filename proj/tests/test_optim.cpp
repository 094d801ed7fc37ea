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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "histocap/checkpoint.hpp"
#include "histocap/error.hpp"
#include "histocap/optim.hpp"
#include "test_util.hpp"

using namespace histocap;

TEST_CASE("clip_grad_value examples") {
  auto p = Tensor::zeros({3}, true);
  auto g = p.grad();
  g[0] = -5;
  g[1] = 0.1;
  g[2] = 5;
  std::vector<Tensor> ps{p};
  clip_grad_value(ps, 1.0);
  CHECK(p.grad()[0] == -1.0);
  CHECK(p.grad()[1] == 0.1);
  CHECK(p.grad()[2] == 1.0);

  // idempotent, and a no-op inside the band
  std::vector<double> before(p.grad().begin(), p.grad().end());
  clip_grad_value(ps, 1.0);
  CHECK(std::equal(before.begin(), before.end(), p.grad().begin()));

  CHECK_THROWS_AS(clip_grad_value(ps, 0.0), InvalidArgument);
  CHECK_THROWS_AS(clip_grad_value(ps, -1.0), InvalidArgument);
}

TEST_CASE("adam first step moves each component by lr against the gradient sign") {
  auto p = Tensor::from({4}, {0.5, -1, 2, 0}, true);
  for (auto& g : p.grad()) g = 1.0;
  std::vector<Tensor> ps{p};
  AdamState st(AdamOptions{0.1});
  adam_step(ps, st);
  CHECK(st.step == 1);
  const double want[] = {0.4, -1.1, 1.9, -0.1};
  // m_hat = 1, v_hat = 1, update = lr / (1 + eps)
  for (int i = 0; i < 4; ++i) CHECK(p.data()[i] == doctest::Approx(want[i]).epsilon(1e-7));
  for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  auto p = Tensor::from({3}, {1, 2, 3}, true);
  p.grad();  // allocates a zero-filled buffer
  std::vector<Tensor> ps{p};
  AdamState st;
  adam_step(ps, st);
  CHECK(p.data()[0] == 1.0);
  CHECK(p.data()[1] == 2.0);
  CHECK(p.data()[2] == 3.0);
}

TEST_CASE("two identical adam steps follow the unrolled update") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
  auto p = Tensor::from({1}, {1.0}, true);
  std::vector<Tensor> ps{p};
  AdamState st(AdamOptions{lr, b1, b2, eps});
  double theta = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    p.grad()[0] = g;
    double before = p.data()[0];
    adam_step(ps, st);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    CHECK(p.data()[0] < before);
    CHECK(p.data()[0] == doctest::Approx(theta).epsilon(1e-12));
  }
  CHECK(st.step == 2);
  REQUIRE(st.m.size() == 1);
  CHECK(st.m[0].size() == 1);
}

TEST_CASE("adam rejects missing gradients and bad options") {
  auto p = Tensor::from({2}, {1, 2}, true);
  std::vector<Tensor> ps{p};
  AdamState st;
  CHECK_THROWS_AS(adam_step(ps, st), InvalidArgument);
  CHECK_THROWS(AdamState(AdamOptions{0.0}));
  CHECK_THROWS(AdamState(AdamOptions{1e-3, 1.0}));
  CHECK_THROWS(AdamState(AdamOptions{1e-3, 0.9, 0.999, 0.0}));
}

TEST_CASE("adam aborts on a non-finite update") {
  auto p = Tensor::from({1}, {1.0}, true);
  p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<Tensor> ps{p};
  AdamState st;
  CHECK_THROWS_AS(adam_step(ps, st), NumericError);
}

TEST_CASE("checksum tracks every value bit") {
  auto a = Tensor::from({2}, {1, 2});
  std::vector<Tensor> ps{a};
  auto before = checksum(ps);
  CHECK(checksum(ps) == before);
  a.data()[1] = std::nextafter(2.0, 3.0);
  CHECK(checksum(ps) != before);
}

TEST_CASE("checkpoint round trip at f32 precision") {
  testutil::TempDir dir;
  std::mt19937_64 rng(1);
  NamedTensors params{{"a.w", Tensor::randn({3, 4}, 1.0, rng)}, {"b", Tensor::randn({5}, 1.0, rng)}};
  save_checkpoint(dir.path / "x.hcpt", params);
  auto back = read_checkpoint(dir.path / "x.hcpt");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].first == params[i].first);
    CHECK(back[i].second.shape() == params[i].second.shape());
    for (std::size_t j = 0; j < params[i].second.numel(); ++j) {
      CHECK(back[i].second.data()[j] == static_cast<double>(static_cast<float>(params[i].second.data()[j])));
    }
  }

  NamedTensors targets{{"b", Tensor::zeros({5})}, {"a.w", Tensor::zeros({3, 4})}};
  load_checkpoint_into(dir.path / "x.hcpt", targets);
  CHECK(targets[0].second.data()[0] == back[1].second.data()[0]);

  NamedTensors wrong_shape{{"b", Tensor::zeros({6})}};
  CHECK_THROWS_AS(load_checkpoint_into(dir.path / "x.hcpt", wrong_shape), DataError);
  NamedTensors missing{{"c", Tensor::zeros({1})}};
  CHECK_THROWS_AS(load_checkpoint_into(dir.path / "x.hcpt", missing), DataError);
}

TEST_CASE("checkpoint layout is the documented byte format") {
  testutil::TempDir dir;
  NamedTensors params{{"w", Tensor::from({1, 2}, {1.0, -2.0})}};
  save_checkpoint(dir.path / "x.hcpt", params);
  auto bytes = testutil::read_bytes(dir.path / "x.hcpt");
  std::vector<unsigned char> want = {'H', 'C', 'P', 'T', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 'w', 2, 0, 0, 0,
                                     1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0};
  CHECK(bytes == want);
}

TEST_CASE("corrupt checkpoints raise corruption errors") {
  testutil::TempDir dir;
  NamedTensors params{{"w", Tensor::from({2, 2}, {1, 2, 3, 4})}};
  auto path = dir.path / "x.hcpt";
  save_checkpoint(path, params);
  auto bytes = testutil::read_bytes(path);

  auto bad = bytes;
  bad[0] = 'X';
  testutil::write_bytes(path, bad);
  CHECK_THROWS_AS(read_checkpoint(path), CorruptionError);

  bad = bytes;
  bad[4] = 9;
  testutil::write_bytes(path, bad);
  CHECK_THROWS_AS(read_checkpoint(path), CorruptionError);

  bad.assign(bytes.begin(), bytes.end() - 3);
  testutil::write_bytes(path, bad);
  CHECK_THROWS_AS(read_checkpoint(path), CorruptionError);

  bad = bytes;
  bad.push_back(0);
  testutil::write_bytes(path, bad);
  CHECK_THROWS_AS(read_checkpoint(path), CorruptionError);

  CHECK_THROWS_AS(read_checkpoint(dir.path / "missing.hcpt"), DataError);
}
