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
// Frozen two-level ViT encoder producing per-slide feature tensors of shape
// (M patches, R sub-patch rows, D = d1 + d2), plus the binary feature cache.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "histocap/checkpoint.hpp"
#include "histocap/slide.hpp"
#include "histocap/tensor.hpp"

namespace histocap {

struct ViTConfig {
  std::size_t input_size = 64;  // L: side of the square input, in pixels
  std::size_t token_size = 16;  // l: side of each non-overlapping token
  std::size_t token_dim = 768;  // width of one flattened input token
  std::size_t embed_dim = 48;
  std::size_t depth = 2;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;

  std::size_t grid() const { return input_size / token_size; }
  std::size_t num_tokens() const { return grid() * grid(); }
  std::size_t mlp_dim() const;
  void validate() const;
};

// Pre-norm ViT: linear token embedding, prepended CLS, learned positions,
// `depth` blocks of (LN, MHSA, residual, LN, GELU MLP, residual).
class ViT {
 public:
  struct Output {
    Tensor cls;     // [1, embed_dim]
    Tensor tokens;  // [T, embed_dim]
  };

  ViT(const ViTConfig& config, std::mt19937_64& rng);

  const ViTConfig& config() const { return config_; }
  Output forward(const Tensor& tokens) const;
  NamedTensors named_parameters(const std::string& prefix) const;
  std::vector<Tensor> parameters() const;

  Tensor cls_token;        // [1, E]
  Tensor pos_embed;        // [T + 1, E]
  Tensor embed_weight;     // [token_dim, E]
  Tensor embed_bias;       // [E]

 private:
  struct Block {
    Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b, w1, b1, w2, b2;
  };
  ViTConfig config_;
  std::vector<Block> blocks_;
};

ViT::Output vit_forward(const Tensor& tokens, const ViT& vit);

struct HiptConfig {
  std::size_t level2_size = 256;  // patch side fed to the level-2 ViT
  std::size_t level1_size = 64;   // sub-patch side fed to the level-1 ViT
  ViTConfig level1;
  ViTConfig level2;
  std::uint64_t seed = 7;

  // 256 / 64 / 16 geometry with d1 = 48, d2 = 24, depth 2.
  static HiptConfig toy();
  // 4096 / 256 / 16 geometry with d1 = 384, d2 = 192.
  static HiptConfig full(std::size_t depth1 = 12, std::size_t depth2 = 6);

  std::size_t rows() const { return level2.num_tokens(); }
  std::size_t feature_dim() const { return level1.embed_dim + level2.embed_dim; }
  void validate() const;
};

struct SlideFeatures {
  std::string slide_id;
  std::size_t M = 0;
  std::size_t R = 0;
  std::size_t D = 0;
  std::vector<float> values;  // (M, R, D) row-major

  Tensor to_tensor() const;
  bool operator==(const SlideFeatures&) const = default;
};

class HiptEncoder {
 public:
  explicit HiptEncoder(const HiptConfig& config);

  const HiptConfig& config() const { return config_; }
  const ViT& level1() const { return vit1_; }
  const ViT& level2() const { return vit2_; }

  // patch must be level2_size x level2_size. Returns [R, d1 + d2].
  Tensor encode_patch(const RgbImage& patch) const;
  Tensor encode_patch_at(const RgbImage& slide, std::size_t x0, std::size_t y0) const;
  // Stacks encode_patch outputs in origin order. Throws if the set is empty.
  SlideFeatures encode_slide(const PatchSet& patches, const RgbImage& slide) const;

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;

 private:
  Tensor sub_patch_tokens(const RgbImage& img, std::size_t x0, std::size_t y0) const;

  HiptConfig config_;
  std::mt19937_64 rng_;
  ViT vit1_;
  ViT vit2_;
};

// Feature cache ("HCFE"): magic | version u32 | M, R, D u32 | M*R*D f32 LE |
// slide_id as u32 length + UTF-8 bytes. All little-endian.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;
void cache_write(const SlideFeatures& features, const std::filesystem::path& path);
SlideFeatures cache_read(const std::filesystem::path& path);

}  // namespace histocap
