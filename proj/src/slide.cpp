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
#include "histocap/slide.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <regex>

#include "histocap/error.hpp"

namespace histocap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1), a pure function of (seed, x, y).
double pixel_noise(std::uint64_t seed, std::size_t x, std::size_t y) {
  const auto h = splitmix64(seed ^ splitmix64((static_cast<std::uint64_t>(y) << 32) | x));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hp)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  const double m = v - c;
  for (auto& ch : rgb) ch += m;
  return rgb;
}

}  // namespace

const std::vector<std::string>& default_tissue_types() {
  static const std::vector<std::string> kTissues = {
      "adipose - subcutaneous",
      "adipose - visceral",
      "adrenal gland",
      "artery - aorta",
      "artery - coronary",
      "artery - tibial",
      "bladder",
      "brain - cerebellum",
      "brain - cortex",
      "breast - mammary tissue",
      "cervix - ectocervix",
      "cervix - endocervix",
      "colon - sigmoid",
      "colon - transverse",
      "esophagus - gastroesophageal junction",
      "esophagus - mucosa",
      "esophagus - muscularis",
      "fallopian tube",
      "heart - atrial appendage",
      "heart - left ventricle",
      "kidney - cortex",
      "kidney - medulla",
      "liver",
      "lung",
      "minor salivary gland",
      "muscle - skeletal",
      "nerve - tibial",
      "ovary",
      "pancreas",
      "pituitary",
      "prostate",
      "skin - not sun exposed",
      "skin - sun exposed",
      "small intestine - terminal ileum",
      "spleen",
      "stomach",
      "testis",
      "thyroid",
      "uterus",
      "vagina",
  };
  return kTissues;
}

SynthConfig default_synth_config(std::size_t cell_size) {
  SynthConfig cfg;
  cfg.cell_size = cell_size;
  cfg.tissue_types = default_tissue_types();
  // Eight hues per group; groups differ in saturation/value. Periods and
  // stripe angles cycle on coprime strides so neighbours differ in texture too.
  constexpr double kSat[] = {0.85, 0.55, 0.85, 0.55, 0.35};
  constexpr double kVal[] = {0.78, 0.78, 0.50, 0.50, 0.64};
  constexpr double kPeriod[] = {6.0, 9.0, 13.0, 19.0, 27.0};
  for (std::size_t i = 0; i < cfg.tissue_types.size(); ++i) {
    const std::size_t group = (i / 8) % 5;
    TissueStyle style;
    style.color = hsv_to_rgb(45.0 * static_cast<double>(i % 8) + 9.0 * static_cast<double>(group),
                             kSat[group], kVal[group]);
    style.texture_period = kPeriod[(i * 3) % 5];
    style.texture_angle = std::numbers::pi / 3.0 * static_cast<double>(i % 3);
    cfg.styles.push_back(style);
  }
  return cfg;
}

std::size_t SynthConfig::tissue_index(const std::string& tissue_type) const {
  auto it = std::find(tissue_types.begin(), tissue_types.end(), tissue_type);
  if (it == tissue_types.end()) throw InvalidArgument("unknown tissue type: '" + tissue_type + "'");
  return static_cast<std::size_t>(it - tissue_types.begin());
}

int blob_count_from_notes(const std::string& notes) {
  static const std::regex kPieces(R"(^\s*(\d+) pieces?\b)");
  std::smatch m;
  if (!std::regex_search(notes, m, kPieces)) {
    throw InvalidArgument("pathology notes do not start with '{k} pieces': '" + notes + "'");
  }
  return std::stoi(m[1].str());
}

RgbImage synth_slide(const SlideRecord& record, const SynthConfig& config) {
  const std::size_t cell = config.cell_size;
  if (cell == 0 || record.width == 0 || record.height == 0 || record.width % cell || record.height % cell) {
    throw InvalidArgument("slide " + record.slide_id + ": dimensions must be positive multiples of " +
                          std::to_string(cell));
  }
  if (config.styles.size() != config.tissue_types.size()) throw InvalidArgument("synth config: one style per tissue type");
  const auto& style = config.styles[config.tissue_index(record.tissue_type)];
  const int k = blob_count_from_notes(record.pathology_notes);
  const std::size_t cols = record.width / cell, rows = record.height / cell;
  if (k < 0 || static_cast<std::size_t>(k) > cols * rows) {
    throw InvalidArgument("slide " + record.slide_id + ": " + std::to_string(k) + " blobs do not fit a " +
                          std::to_string(cols) + "x" + std::to_string(rows) + " grid");
  }

  RgbImage img(record.width, record.height, 255);
  if (config.blob_coverage <= 0.0 || k == 0) return img;

  std::mt19937_64 rng(record.seed);
  std::vector<std::size_t> cells(cols * rows);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  std::shuffle(cells.begin(), cells.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double c = static_cast<double>(cell);
  const double cos_a = std::cos(style.texture_angle), sin_a = std::sin(style.texture_angle);
  constexpr double kWobble = 0.04;
  for (int b = 0; b < k; ++b) {
    const std::size_t cx0 = (cells[static_cast<std::size_t>(b)] % cols) * cell;
    const std::size_t cy0 = (cells[static_cast<std::size_t>(b)] / cols) * cell;
    const double rx = c * (0.42 + 0.03 * unit(rng)) * config.blob_coverage;
    const double ry = c * (0.42 + 0.03 * unit(rng)) * config.blob_coverage;
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    // Keep the blob strictly inside its cell so blobs never touch.
    const double reach = std::max(rx, ry) * (1.0 + kWobble);
    const double slack = std::max(0.0, 0.5 * c - reach - 2.0);
    const double mx = static_cast<double>(cx0) + 0.5 * c + slack * (2.0 * unit(rng) - 1.0);
    const double my = static_cast<double>(cy0) + 0.5 * c + slack * (2.0 * unit(rng) - 1.0);
    for (std::size_t y = cy0; y < cy0 + cell; ++y) {
      for (std::size_t x = cx0; x < cx0 + cell; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - mx) / rx;
        const double dy = (static_cast<double>(y) + 0.5 - my) / ry;
        const double wobble = 1.0 + kWobble * std::sin(3.0 * std::atan2(dy, dx) + phase);
        if (dx * dx + dy * dy > wobble * wobble) continue;
        const double along = static_cast<double>(x) * cos_a + static_cast<double>(y) * sin_a;
        const double stripe = 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * along / style.texture_period));
        const double shade = 1.0 - config.texture_amplitude * stripe;
        const double noise = config.noise_amplitude * pixel_noise(record.seed, x, y);
        auto* px = img.at(x, y);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = std::clamp(style.color[static_cast<std::size_t>(ch)] * shade + noise, 0.0, 1.0);
          px[ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
  }
  return img;
}

std::size_t TissueMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

TissueMask tissue_mask(const RgbImage& image, const MaskConfig& config) {
  if (image.empty()) throw InvalidArgument("tissue_mask: empty image");
  TissueMask mask{image.width, image.height, std::vector<std::uint8_t>(image.width * image.height, 0)};
  const double limit = config.background_threshold * 255.0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    const auto* p = image.pixels.data() + 3 * i;
    const double lum = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    mask.bits[i] = lum < limit ? 1 : 0;
  }
  return mask;
}

double tissue_fraction(const TissueMask& mask, std::size_t x0, std::size_t y0, std::size_t size) {
  std::size_t n = 0;
  for (std::size_t y = y0; y < y0 + size; ++y) {
    const auto* row = mask.bits.data() + y * mask.width;
    for (std::size_t x = x0; x < x0 + size; ++x) n += row[x];
  }
  return static_cast<double>(n) / static_cast<double>(size * size);
}

PatchSet tile(const RgbImage& image, const TissueMask& mask, std::size_t level2_size, std::string slide_id) {
  if (level2_size == 0 || image.width % level2_size || image.height % level2_size || image.empty()) {
    throw InvalidArgument("tile: image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                          " is not a positive multiple of patch size " + std::to_string(level2_size));
  }
  if (mask.width != image.width || mask.height != image.height) {
    throw InvalidArgument("tile: mask dimensions differ from image");
  }
  PatchSet set{std::move(slide_id), level2_size, {}};
  const std::size_t half = level2_size * level2_size / 2;
  for (std::size_t y = 0; y < image.height; y += level2_size) {
    for (std::size_t x = 0; x < image.width; x += level2_size) {
      std::size_t n = 0;
      for (std::size_t yy = y; yy < y + level2_size; ++yy) {
        const auto* row = mask.bits.data() + yy * mask.width;
        for (std::size_t xx = x; xx < x + level2_size; ++xx) n += row[xx];
      }
      // Integer comparison: strictly more than half the pixels.
      if (n > half) set.origins.emplace_back(x, y);
    }
  }
  return set;
}

}  // namespace histocap
