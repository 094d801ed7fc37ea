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
// Synthetic whole-slide images, tissue masks and level-2 tiling.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace histocap {

// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }
  bool operator==(const RgbImage&) const = default;
};

void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

struct SlideRecord {
  std::string slide_id;
  std::size_t width = 1024;
  std::size_t height = 1024;
  std::string tissue_type;
  std::string sex;
  std::string pathology_notes;
  std::uint64_t seed = 0;
};

struct TissueStyle {
  std::array<double, 3> color{};  // linear RGB in [0, 1]
  double texture_period = 8.0;    // pixels
  double texture_angle = 0.0;     // radians
};

struct SynthConfig {
  std::vector<std::string> tissue_types;
  std::vector<TissueStyle> styles;  // parallel to tissue_types
  std::size_t cell_size = 256;      // blobs are placed one per grid cell of this size
  double blob_coverage = 1.0;       // radius scale; 0 renders background only
  double texture_amplitude = 0.25;
  double noise_amplitude = 0.03;

  std::size_t tissue_index(const std::string& tissue_type) const;  // throws on unknown names
};

// The 40 GTEx-style tissue names used by the synthetic corpus.
const std::vector<std::string>& default_tissue_types();
SynthConfig default_synth_config(std::size_t cell_size = 256);

// Leading "{k} pieces" count of a notes string; throws InvalidArgument if absent.
int blob_count_from_notes(const std::string& notes);

// Deterministic in (record, config): k non-touching textured blobs on white,
// with k taken from the record's notes.
RgbImage synth_slide(const SlideRecord& record, const SynthConfig& config);

struct MaskConfig {
  double background_threshold = 0.9;  // fraction of full-scale luminance
};

struct TissueMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 1 = tissue

  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  std::size_t count() const;
};

// A pixel is tissue iff its Rec.601 luminance is below the threshold.
TissueMask tissue_mask(const RgbImage& image, const MaskConfig& config = {});

double tissue_fraction(const TissueMask& mask, std::size_t x0, std::size_t y0, std::size_t size);

struct PatchSet {
  std::string slide_id;
  std::size_t level2_size = 0;
  std::vector<std::pair<std::size_t, std::size_t>> origins;  // (x, y), row-major order

  std::size_t M() const { return origins.size(); }
};

// Non-overlapping grid tiling that keeps patches with tissue fraction > 0.5.
PatchSet tile(const RgbImage& image, const TissueMask& mask, std::size_t level2_size,
              std::string slide_id = {});

}  // namespace histocap
