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
#include <queue>
#include <set>

#include "doctest.h"
#include "histocap/error.hpp"
#include "histocap/slide.hpp"
#include "test_util.hpp"

using namespace histocap;

namespace {

// 4-connected components of the mask, by breadth-first flood fill.
int connected_components(const TissueMask& m) {
  std::vector<char> seen(m.bits.size(), 0);
  int count = 0;
  for (std::size_t start = 0; start < m.bits.size(); ++start) {
    if (!m.bits[start] || seen[start]) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      std::size_t i = q.front();
      q.pop();
      std::size_t x = i % m.width, y = i / m.width;
      auto visit = [&](std::size_t nx, std::size_t ny) {
        std::size_t j = ny * m.width + nx;
        if (m.bits[j] && !seen[j]) {
          seen[j] = 1;
          q.push(j);
        }
      };
      if (x > 0) visit(x - 1, y);
      if (x + 1 < m.width) visit(x + 1, y);
      if (y > 0) visit(x, y - 1);
      if (y + 1 < m.height) visit(x, y + 1);
    }
  }
  return count;
}

SlideRecord record(const std::string& tissue, int k, std::uint64_t seed) {
  SlideRecord r;
  r.slide_id = "s";
  r.tissue_type = tissue;
  r.sex = "female";
  r.pathology_notes = std::to_string(k) + " pieces.";
  r.seed = seed;
  return r;
}

RgbImage half_split(std::size_t w, std::size_t h) {
  RgbImage img(w, h, 255);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w / 2; ++x) {
      auto* p = img.at(x, y);
      p[0] = p[1] = p[2] = 20;
    }
  return img;
}

}  // namespace

TEST_CASE("default tissue list has 40 distinct names free of template delimiters") {
  const auto& names = default_tissue_types();
  CHECK(names.size() == 40);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 40);
  for (const auto& n : names) {
    CHECK(n.find(" tissue from a ") == std::string::npos);
    CHECK(n.find(" patient and it has ") == std::string::npos);
  }
  auto cfg = default_synth_config();
  CHECK(cfg.styles.size() == 40);
}

TEST_CASE("blob count parsing") {
  CHECK(blob_count_from_notes("3 pieces.") == 3);
  CHECK(blob_count_from_notes("1 piece") == 1);
  CHECK(blob_count_from_notes("6 pieces, prominent lymphoid component in 4 of 6 pieces.") == 6);
  CHECK_THROWS_AS(blob_count_from_notes("no count here"), InvalidArgument);
}

TEST_CASE("synth_slide is deterministic in the record") {
  auto cfg = default_synth_config();
  auto r = record("liver", 3, 42);
  CHECK(synth_slide(r, cfg) == synth_slide(r, cfg));
  auto other = r;
  other.seed = 43;
  CHECK_FALSE(synth_slide(r, cfg) == synth_slide(other, cfg));
  // sex has no visual correlate
  auto male = r;
  male.sex = "male";
  CHECK(synth_slide(r, cfg) == synth_slide(male, cfg));
}

TEST_CASE("mask component count equals the blob count in the notes") {
  auto cfg = default_synth_config();
  const auto& names = default_tissue_types();
  for (int k = 1; k <= 6; ++k) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto r = record(names[(k * 7 + seed * 3) % names.size()], k, seed * 1000 + k);
      auto mask = tissue_mask(synth_slide(r, cfg));
      INFO("k=" << k << " seed=" << seed << " tissue=" << r.tissue_type);
      CHECK(connected_components(mask) == k);
    }
  }
}

TEST_CASE("every tissue style renders exactly the requested blobs") {
  auto cfg = default_synth_config();
  for (const auto& name : default_tissue_types()) {
    auto r = record(name, 3, 5);
    r.width = r.height = 768;
    INFO(name);
    CHECK(connected_components(tissue_mask(synth_slide(r, cfg))) == 3);
  }
}

TEST_CASE("zero blob coverage renders pure background") {
  auto cfg = default_synth_config();
  cfg.blob_coverage = 0.0;
  auto img = synth_slide(record("lung", 4, 1), cfg);
  CHECK(tissue_mask(img).count() == 0);
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](auto v) { return v == 255; }));
}

TEST_CASE("synth_slide rejects unknown tissue and bad dimensions") {
  auto cfg = default_synth_config();
  CHECK_THROWS_AS(synth_slide(record("unobtainium", 2, 1), cfg), InvalidArgument);
  auto r = record("lung", 2, 1);
  r.width = 1000;
  CHECK_THROWS_AS(synth_slide(r, cfg), InvalidArgument);
}

TEST_CASE("tissue_mask examples") {
  RgbImage white(8, 8, 255), dark(8, 8, 10);
  CHECK(tissue_mask(white).count() == 0);
  CHECK(tissue_mask(dark).count() == 64);

  auto split = half_split(8, 4);
  auto m = tissue_mask(split);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 8; ++x) CHECK(m.at(x, y) == (x < 4));

  // threshold is on Rec.601 luminance at 0.9 of full scale
  RgbImage px(1, 1);
  px.pixels = {230, 230, 230};  // 230 < 229.5 is false
  CHECK(tissue_mask(px).count() == 0);
  px.pixels = {229, 229, 229};
  CHECK(tissue_mask(px).count() == 1);
  CHECK_THROWS(tissue_mask(RgbImage{}));
}

TEST_CASE("tile examples") {
  RgbImage dark(8, 8, 0);
  auto ps = tile(dark, tissue_mask(dark), 4, "d");
  CHECK(ps.M() == 4);
  std::vector<std::pair<std::size_t, std::size_t>> want{{0, 0}, {4, 0}, {0, 4}, {4, 4}};
  CHECK(ps.origins == want);
  CHECK(ps.slide_id == "d");

  RgbImage white(8, 8, 255);
  CHECK(tile(white, tissue_mask(white), 4).M() == 0);

  CHECK_THROWS_AS(tile(RgbImage(10, 8, 0), tissue_mask(RgbImage(10, 8, 0)), 4), InvalidArgument);
}

TEST_CASE("a patch with exactly half tissue is excluded") {
  auto img = half_split(16, 16);
  auto mask = tissue_mask(img);
  CHECK(tissue_fraction(mask, 0, 0, 16) == 0.5);
  CHECK(tile(img, mask, 16).M() == 0);
  // one more tissue pixel tips it over
  img.at(8, 0)[0] = img.at(8, 0)[1] = img.at(8, 0)[2] = 0;
  CHECK(tile(img, tissue_mask(img), 16).M() == 1);
}

TEST_CASE("tiling partitions the grid by an independently recomputed fraction") {
  auto cfg = default_synth_config();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto img = synth_slide(record("thyroid", static_cast<int>(seed), seed), cfg);
    auto mask = tissue_mask(img);
    auto ps = tile(img, mask, 256);
    std::set<std::pair<std::size_t, std::size_t>> kept(ps.origins.begin(), ps.origins.end());
    CHECK(kept.size() == ps.M());
    CHECK(std::is_sorted(ps.origins.begin(), ps.origins.end(),
                         [](auto a, auto b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); }));
    for (std::size_t y0 = 0; y0 < 1024; y0 += 256)
      for (std::size_t x0 = 0; x0 < 1024; x0 += 256) {
        std::size_t n = 0;
        for (std::size_t y = y0; y < y0 + 256; ++y)
          for (std::size_t x = x0; x < x0 + 256; ++x) {
            const auto* p = img.at(x, y);
            double lum = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            n += lum < 0.9 * 255.0;
          }
        bool retained = 2 * n > 256 * 256;
        CHECK(kept.count({x0, y0}) == (retained ? 1u : 0u));
      }
    // one blob per grid cell, each large enough to be retained
    CHECK(ps.M() == seed);
  }
}

TEST_CASE("png round trip is lossless") {
  testutil::TempDir dir;
  auto img = synth_slide(record("thyroid", 2, 9), default_synth_config());
  write_png(dir.path / "s.png", img);
  CHECK(read_png(dir.path / "s.png") == img);
  CHECK_THROWS_AS(read_png(dir.path / "missing.png"), DataError);
  testutil::write_bytes(dir.path / "junk.png", {1, 2, 3, 4});
  CHECK_THROWS_AS(read_png(dir.path / "junk.png"), DataError);
}
