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
#include "histocap/hipt.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "histocap/error.hpp"

namespace histocap {

namespace {

Tensor weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return Tensor::randn({fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace

std::size_t ViTConfig::mlp_dim() const {
  return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(embed_dim)));
}

void ViTConfig::validate() const {
  if (token_size == 0 || input_size == 0 || input_size % token_size != 0) {
    throw InvalidArgument("ViT: input size " + std::to_string(input_size) + " not divisible by token size " +
                          std::to_string(token_size));
  }
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw InvalidArgument("ViT: embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                          std::to_string(heads));
  }
  if (token_dim == 0) throw InvalidArgument("ViT: token_dim must be positive");
  if (!(mlp_ratio > 0.0)) throw InvalidArgument("ViT: mlp_ratio must be positive");
}

ViT::ViT(const ViTConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const std::size_t e = config_.embed_dim, t = config_.num_tokens(), f = config_.mlp_dim();
  embed_weight = weight(config_.token_dim, e, rng);
  embed_bias = Tensor::randn({e}, 0.02, rng);
  cls_token = Tensor::randn({1, e}, 0.02, rng);
  pos_embed = Tensor::randn({t + 1, e}, 0.02, rng);
  for (std::size_t i = 0; i < config_.depth; ++i) {
    Block b;
    b.ln1_g = Tensor::full({e}, 1.0);
    b.ln1_b = Tensor::zeros({e});
    b.wq = weight(e, e, rng);
    b.bq = Tensor::zeros({e});
    b.wk = weight(e, e, rng);
    b.bk = Tensor::zeros({e});
    b.wv = weight(e, e, rng);
    b.bv = Tensor::zeros({e});
    b.wo = weight(e, e, rng);
    b.bo = Tensor::zeros({e});
    b.ln2_g = Tensor::full({e}, 1.0);
    b.ln2_b = Tensor::zeros({e});
    b.w1 = weight(e, f, rng);
    b.b1 = Tensor::zeros({f});
    b.w2 = weight(f, e, rng);
    b.b2 = Tensor::zeros({e});
    blocks_.push_back(std::move(b));
  }
}

ViT::Output ViT::forward(const Tensor& tokens) const {
  const std::size_t t = config_.num_tokens();
  if (tokens.rank() != 2 || tokens.dim(0) != t || tokens.dim(1) != config_.token_dim) {
    throw ShapeError("vit_forward: expected " + std::to_string(t) + " tokens of width " +
                     std::to_string(config_.token_dim) + ", got " + shape_str(tokens.shape()));
  }
  Tensor x = concat_rows({cls_token, linear(tokens, embed_weight, embed_bias)});
  x = add(x, pos_embed);
  for (const auto& b : blocks_) {
    const Tensor h = layer_norm(x, b.ln1_g, b.ln1_b);
    const Tensor a = attention(linear(h, b.wq, b.bq), linear(h, b.wk, b.bk), linear(h, b.wv, b.bv),
                               config_.heads, /*causal=*/false);
    x = add(x, linear(a, b.wo, b.bo));
    const Tensor h2 = layer_norm(x, b.ln2_g, b.ln2_b);
    x = add(x, linear(gelu(linear(h2, b.w1, b.b1)), b.w2, b.b2));
  }
  return {slice_rows(x, 0, 1), slice_rows(x, 1, t)};
}

NamedTensors ViT::named_parameters(const std::string& prefix) const {
  NamedTensors out = {{prefix + "embed.weight", embed_weight},
                      {prefix + "embed.bias", embed_bias},
                      {prefix + "cls", cls_token},
                      {prefix + "pos", pos_embed}};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = prefix + "block" + std::to_string(i) + ".";
    out.insert(out.end(), {{p + "ln1.gamma", b.ln1_g}, {p + "ln1.beta", b.ln1_b},
                           {p + "attn.q.weight", b.wq}, {p + "attn.q.bias", b.bq},
                           {p + "attn.k.weight", b.wk}, {p + "attn.k.bias", b.bk},
                           {p + "attn.v.weight", b.wv}, {p + "attn.v.bias", b.bv},
                           {p + "attn.o.weight", b.wo}, {p + "attn.o.bias", b.bo},
                           {p + "ln2.gamma", b.ln2_g}, {p + "ln2.beta", b.ln2_b},
                           {p + "mlp.in.weight", b.w1}, {p + "mlp.in.bias", b.b1},
                           {p + "mlp.out.weight", b.w2}, {p + "mlp.out.bias", b.b2}});
  }
  return out;
}

std::vector<Tensor> ViT::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters("")) out.push_back(t);
  return out;
}

ViT::Output vit_forward(const Tensor& tokens, const ViT& vit) { return vit.forward(tokens); }

HiptConfig HiptConfig::toy() {
  HiptConfig c;
  c.level2_size = 256;
  c.level1_size = 64;
  c.level1 = ViTConfig{64, 16, 16 * 16 * 3, 48, 2, 4, 4.0};
  c.level2 = ViTConfig{256, 64, 48, 24, 2, 2, 4.0};
  return c;
}

HiptConfig HiptConfig::full(std::size_t depth1, std::size_t depth2) {
  HiptConfig c;
  c.level2_size = 4096;
  c.level1_size = 256;
  c.level1 = ViTConfig{256, 16, 16 * 16 * 3, 384, depth1, 6, 4.0};
  c.level2 = ViTConfig{4096, 256, 384, 192, depth2, 3, 4.0};
  return c;
}

void HiptConfig::validate() const {
  level1.validate();
  level2.validate();
  if (level1.input_size != level1_size || level2.input_size != level2_size || level2.token_size != level1_size) {
    throw InvalidArgument("hipt: level sizes disagree with ViT geometry");
  }
  if (level1.token_dim != level1.token_size * level1.token_size * 3) {
    throw InvalidArgument("hipt: level-1 token_dim must equal token_size^2 * 3");
  }
  if (level2.token_dim != level1.embed_dim) {
    throw InvalidArgument("hipt: level-2 token_dim must equal level-1 embed_dim");
  }
}

Tensor SlideFeatures::to_tensor() const {
  return Tensor::from({M, R, D}, std::vector<double>(values.begin(), values.end()));
}

HiptEncoder::HiptEncoder(const HiptConfig& config)
    : config_((config.validate(), config)), rng_(config.seed), vit1_(config_.level1, rng_), vit2_(config_.level2, rng_) {
  for (auto& t : parameters()) t.set_requires_grad(false);
}

Tensor HiptEncoder::sub_patch_tokens(const RgbImage& img, std::size_t x0, std::size_t y0) const {
  const std::size_t ts = config_.level1.token_size, g = config_.level1.grid();
  std::vector<double> v;
  v.reserve(g * g * ts * ts * 3);
  for (std::size_t ty = 0; ty < g; ++ty) {
    for (std::size_t tx = 0; tx < g; ++tx) {
      for (std::size_t y = 0; y < ts; ++y) {
        const auto* row = img.at(x0 + tx * ts, y0 + ty * ts + y);
        for (std::size_t i = 0; i < ts * 3; ++i) v.push_back(static_cast<double>(row[i]) / 127.5 - 1.0);
      }
    }
  }
  return Tensor::from({g * g, ts * ts * 3}, std::move(v));
}

Tensor HiptEncoder::encode_patch_at(const RgbImage& slide, std::size_t x0, std::size_t y0) const {
  const std::size_t s2 = config_.level2_size, s1 = config_.level1_size, g = s2 / s1;
  if (x0 + s2 > slide.width || y0 + s2 > slide.height) throw ShapeError("encode_patch: patch exceeds image bounds");
  NoGradGuard no_grad;
  std::vector<Tensor> cls_rows;
  cls_rows.reserve(g * g);
  for (std::size_t sy = 0; sy < g; ++sy) {
    for (std::size_t sx = 0; sx < g; ++sx) {
      cls_rows.push_back(vit1_.forward(sub_patch_tokens(slide, x0 + sx * s1, y0 + sy * s1)).cls);
    }
  }
  const Tensor p256 = concat_rows(cls_rows);
  const Tensor cls2 = vit2_.forward(p256).cls;
  return concat_cols({p256, repeat_rows(cls2, g * g)});
}

Tensor HiptEncoder::encode_patch(const RgbImage& patch) const {
  if (patch.width != config_.level2_size || patch.height != config_.level2_size) {
    throw ShapeError("encode_patch: patch is " + std::to_string(patch.width) + "x" + std::to_string(patch.height) +
                     ", expected " + std::to_string(config_.level2_size) + " square");
  }
  return encode_patch_at(patch, 0, 0);
}

SlideFeatures HiptEncoder::encode_slide(const PatchSet& patches, const RgbImage& slide) const {
  if (patches.M() == 0) throw InvalidArgument("slide has no tissue patches: " + patches.slide_id);
  if (patches.level2_size != config_.level2_size) throw ShapeError("encode_slide: patch size disagrees with encoder");
  SlideFeatures f{patches.slide_id, patches.M(), config_.rows(), config_.feature_dim(), {}};
  f.values.reserve(f.M * f.R * f.D);
  for (const auto& [x, y] : patches.origins) {
    const Tensor rows = encode_patch_at(slide, x, y);
    for (double v : rows.data()) f.values.push_back(static_cast<float>(v));
  }
  return f;
}

NamedTensors HiptEncoder::named_parameters() const {
  auto out = vit1_.named_parameters("enc.l1.");
  auto l2 = vit2_.named_parameters("enc.l2.");
  out.insert(out.end(), l2.begin(), l2.end());
  return out;
}

std::vector<Tensor> HiptEncoder::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void cache_write(const SlideFeatures& f, const std::filesystem::path& path) {
  if (f.M == 0 || f.R == 0 || f.D == 0) throw InvalidArgument("cache_write: empty feature extents");
  if (f.values.size() != f.M * f.R * f.D) throw ShapeError("cache_write: value count disagrees with (M, R, D)");
  io::ByteWriter w;
  w.bytes("HCFE");
  w.u32(kFeatureCacheVersion);
  w.u32(static_cast<std::uint32_t>(f.M));
  w.u32(static_cast<std::uint32_t>(f.R));
  w.u32(static_cast<std::uint32_t>(f.D));
  for (float v : f.values) w.f32(v);
  w.str(f.slide_id);
  io::write_file_atomic(path, w.buffer());
}

SlideFeatures cache_read(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  if (r.size() < 20) {
    throw CorruptionError(path.string() + ": truncated header, expected 20 bytes but file has " +
                          std::to_string(r.size()));
  }
  if (r.bytes(4) != "HCFE") throw CorruptionError(path.string() + ": bad feature-cache magic");
  const auto version = r.u32();
  if (version != kFeatureCacheVersion) {
    throw CorruptionError(path.string() + ": unsupported feature-cache version " + std::to_string(version));
  }
  SlideFeatures f;
  f.M = r.u32();
  f.R = r.u32();
  f.D = r.u32();
  if (f.M == 0 || f.R == 0 || f.D == 0) {
    throw CorruptionError(path.string() + ": header has a zero extent (M=" + std::to_string(f.M) + ")");
  }
  const unsigned __int128 wide = static_cast<unsigned __int128>(f.M) * f.R * f.D;
  const unsigned __int128 expected_wide = 20 + 4 * wide + 4;
  if (expected_wide > r.size()) {
    const std::string expected = expected_wide > std::numeric_limits<std::uint64_t>::max()
                                     ? std::string("more than 2^64")
                                     : std::to_string(static_cast<std::uint64_t>(expected_wide));
    throw CorruptionError(path.string() + ": truncated, expected at least " + expected + " bytes but file has " +
                          std::to_string(r.size()));
  }
  const std::size_t n = static_cast<std::size_t>(wide);
  f.values.resize(n);
  for (auto& v : f.values) v = r.f32();
  f.slide_id = r.str();
  if (r.remaining() != 0) {
    throw CorruptionError(path.string() + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return f;
}

}  // namespace histocap
