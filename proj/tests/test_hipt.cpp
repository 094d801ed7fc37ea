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
#include <random>

#include "doctest.h"
#include "histocap/error.hpp"
#include "histocap/hipt.hpp"
#include "histocap/optim.hpp"
#include "test_util.hpp"

using namespace histocap;

namespace {

RgbImage noise_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

RgbImage crop(const RgbImage& img, std::size_t x0, std::size_t y0, std::size_t s) {
  RgbImage out(s, s);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) std::copy_n(img.at(x0 + x, y0 + y), 3, out.at(x, y));
  return out;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("ViT config validation") {
  ViTConfig c{64, 16, 768, 48, 1, 4, 4.0};
  CHECK(c.num_tokens() == 16);
  CHECK_NOTHROW(c.validate());
  c.input_size = 60;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ViTConfig{64, 16, 768, 50, 1, 4, 4.0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("vit_forward rejects a token-count mismatch") {
  std::mt19937_64 rng(1);
  ViT vit(ViTConfig{64, 16, 12, 8, 1, 2, 2.0}, rng);
  CHECK_THROWS_AS(vit.forward(Tensor::zeros({15, 12})), ShapeError);
  CHECK_THROWS_AS(vit.forward(Tensor::zeros({16, 11})), ShapeError);
  auto out = vit.forward(Tensor::zeros({16, 12}));
  CHECK(out.cls.shape() == Shape{1, 8});
  CHECK(out.tokens.shape() == Shape{16, 8});
}

TEST_CASE("depth-0 ViT returns the CLS embedding plus its position embedding") {
  std::mt19937_64 rng(2);
  ViT vit(ViTConfig{32, 16, 6, 8, 0, 2, 2.0}, rng);
  std::mt19937_64 in_rng(3);
  auto out = vit_forward(Tensor::randn({4, 6}, 1.0, in_rng), vit);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(out.cls.data()[j] == vit.cls_token.data()[j] + vit.pos_embed.data()[j]);
  }
}

TEST_CASE("full-size level-1 and level-2 presets give 384- and 192-wide CLS rows") {
  auto full = HiptConfig::full(1, 1);
  CHECK(full.level1.input_size == 256);
  CHECK(full.level1.token_size == 16);
  CHECK(full.level2.input_size == 4096);
  CHECK(full.level2.token_size == 256);
  CHECK(full.rows() == 256);
  CHECK(full.feature_dim() == 576);

  std::mt19937_64 rng(4);
  ViT l1(full.level1, rng);
  std::mt19937_64 in_rng(5);
  auto o1 = l1.forward(Tensor::randn({256, 768}, 1.0, in_rng));
  CHECK(o1.cls.shape() == Shape{1, 384});
  ViT l2(full.level2, rng);
  auto o2 = l2.forward(Tensor::randn({256, 384}, 1.0, in_rng));
  CHECK(o2.cls.shape() == Shape{1, 192});
}

TEST_CASE("toy encode_patch shape, determinism and broadcast structure") {
  HiptEncoder enc(HiptConfig::toy());
  auto patch = noise_image(256, 256, 7);
  auto a = enc.encode_patch(patch);
  CHECK(a.shape() == Shape{16, 72});
  CHECK(values(a) == values(enc.encode_patch(patch)));
  // the level-2 CLS occupies the last d2 columns of every row
  for (std::size_t r = 1; r < 16; ++r)
    for (std::size_t c = 48; c < 72; ++c) CHECK(a.at({r, c}) == a.at({0, c}));
  // level-1 CLS rows differ between sub-patches of a noisy image
  CHECK(a.at({0, 0}) != a.at({1, 0}));

  CHECK_THROWS_AS(enc.encode_patch(noise_image(128, 128, 1)), ShapeError);
}

TEST_CASE("two encoders with the same seed agree; the weights are frozen") {
  HiptEncoder a(HiptConfig::toy()), b(HiptConfig::toy());
  CHECK(checksum(a.parameters()) == checksum(b.parameters()));
  for (const auto& t : a.parameters()) CHECK_FALSE(t.requires_grad());
  for (const auto& [name, t] : a.named_parameters()) {
    CHECK((name.rfind("enc.l1.", 0) == 0 || name.rfind("enc.l2.", 0) == 0));
  }
}

TEST_CASE("encode_slide stacks patches in origin order") {
  HiptEncoder enc(HiptConfig::toy());
  auto slide = noise_image(512, 512, 11);
  PatchSet ps{"s", 256, {{0, 0}, {256, 0}, {256, 256}}};
  auto f = enc.encode_slide(ps, slide);
  CHECK(f.M == 3);
  CHECK(f.R == 16);
  CHECK(f.D == 72);
  CHECK(f.values.size() == 3 * 16 * 72);
  CHECK(f.to_tensor().shape() == Shape{3, 16, 72});

  // per-patch purity: each slice equals encoding the cropped patch alone,
  // in whatever order the patches are visited
  std::vector<std::size_t> order{2, 0, 1};
  for (auto m : order) {
    auto rows = enc.encode_patch(crop(slide, ps.origins[m].first, ps.origins[m].second, 256));
    for (std::size_t i = 0; i < 16 * 72; ++i) CHECK(f.values[m * 16 * 72 + i] == static_cast<float>(rows.data()[i]));
  }

  PatchSet one{"s", 256, {{256, 0}}};
  auto f1 = enc.encode_slide(one, slide);
  CHECK(f1.M == 1);
  CHECK(std::equal(f1.values.begin(), f1.values.end(), f.values.begin() + 16 * 72));

  PatchSet none{"empty", 256, {}};
  CHECK_THROWS_WITH_AS(enc.encode_slide(none, slide), doctest::Contains("slide has no tissue patches"),
                       InvalidArgument);
}

TEST_CASE("feature cache round trip and corruption handling") {
  testutil::TempDir dir;
  SlideFeatures f{"slide-00001", 2, 3, 4, {}};
  for (std::size_t i = 0; i < 24; ++i) f.values.push_back(0.1f * static_cast<float>(i) - 1.0f);
  auto path = dir.path / "f.hcfe";
  cache_write(f, path);
  CHECK(cache_read(path) == f);

  auto bytes = testutil::read_bytes(path);
  CHECK(bytes.size() == 20 + 24 * 4 + 4 + f.slide_id.size());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "HCFE");

  auto truncated = std::vector<unsigned char>(bytes.begin(), bytes.begin() + 60);
  testutil::write_bytes(path, truncated);
  CHECK_THROWS_WITH_AS(cache_read(path), doctest::Contains("expected at least 120 bytes but file has 60"),
                       CorruptionError);

  auto zero_m = bytes;
  zero_m[8] = 0;
  testutil::write_bytes(path, zero_m);
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  auto bad_magic = bytes;
  bad_magic[3] = 'X';
  testutil::write_bytes(path, bad_magic);
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  testutil::write_bytes(path, bad_version);
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  auto huge = bytes;
  huge[8] = huge[9] = huge[10] = huge[11] = 0xFF;
  testutil::write_bytes(path, huge);
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  auto trailing = bytes;
  trailing.push_back(7);
  testutil::write_bytes(path, trailing);
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  testutil::write_bytes(path, {'H', 'C'});
  CHECK_THROWS_AS(cache_read(path), CorruptionError);

  SlideFeatures empty{"x", 0, 3, 4, {}};
  CHECK_THROWS(cache_write(empty, path));
}
