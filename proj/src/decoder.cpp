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
#include "histocap/decoder.hpp"

#include <cmath>

#include "histocap/error.hpp"

namespace histocap {

namespace {

Tensor weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  return Tensor::randn({fan_in, fan_out}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng, true);
}

}  // namespace

DecoderConfig DecoderConfig::toy(std::size_t vocab_size) {
  DecoderConfig c;
  c.vocab_size = vocab_size;
  return c;
}

DecoderConfig DecoderConfig::bert_base(std::size_t vocab_size, std::size_t max_len) {
  return DecoderConfig{12, 768, 12, 3072, vocab_size, max_len, true};
}

void DecoderConfig::validate() const {
  if (hidden == 0 || heads == 0 || hidden % heads != 0) throw InvalidArgument("decoder: hidden not divisible by heads");
  if (ffn < hidden) throw InvalidArgument("decoder: ffn must be at least hidden");
  if (vocab_size <= static_cast<std::size_t>(Vocab::kNumSpecial)) throw InvalidArgument("decoder: vocabulary too small");
  if (max_len < 3) throw InvalidArgument("decoder: max_len must be at least 3");
}

std::vector<Tensor> DecoderLayerParams::core() const {
  return {ln_self_g, ln_self_b, self_wq, self_bq, self_wk, self_bk, self_wv, self_bv, self_wo, self_bo,
          ln_ffn_g,  ln_ffn_b,  ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b};
}

std::vector<Tensor> DecoderLayerParams::cross() const {
  return {ln_cross_g, ln_cross_b, cross_wq, cross_bq, cross_wk, cross_bk, cross_wv, cross_bv, cross_wo, cross_bo};
}

NamedTensors DecoderLayerParams::named_parameters(const std::string& p) const {
  return {{p + "self.ln.gamma", ln_self_g},   {p + "self.ln.beta", ln_self_b},
          {p + "self.q.weight", self_wq},     {p + "self.q.bias", self_bq},
          {p + "self.k.weight", self_wk},     {p + "self.k.bias", self_bk},
          {p + "self.v.weight", self_wv},     {p + "self.v.bias", self_bv},
          {p + "self.o.weight", self_wo},     {p + "self.o.bias", self_bo},
          {p + "xattn.ln.gamma", ln_cross_g}, {p + "xattn.ln.beta", ln_cross_b},
          {p + "xattn.q.weight", cross_wq},   {p + "xattn.q.bias", cross_bq},
          {p + "xattn.k.weight", cross_wk},   {p + "xattn.k.bias", cross_bk},
          {p + "xattn.v.weight", cross_wv},   {p + "xattn.v.bias", cross_bv},
          {p + "xattn.o.weight", cross_wo},   {p + "xattn.o.bias", cross_bo},
          {p + "ffn.ln.gamma", ln_ffn_g},     {p + "ffn.ln.beta", ln_ffn_b},
          {p + "ffn.in.weight", ffn_in_w},    {p + "ffn.in.bias", ffn_in_b},
          {p + "ffn.out.weight", ffn_out_w},  {p + "ffn.out.bias", ffn_out_b}};
}

Decoder::Decoder(const DecoderConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const std::size_t h = config_.hidden, f = config_.ffn, v = config_.vocab_size;
  tok_embed = Tensor::randn({v, h}, 0.02, rng, true);
  pos_embed = Tensor::randn({config_.max_len, h}, 0.02, rng, true);
  const auto ones = [h] { return Tensor::full({h}, 1.0, true); };
  const auto zeros = [](std::size_t n) { return Tensor::zeros({n}, true); };
  for (std::size_t i = 0; i < config_.layers; ++i) {
    DecoderLayerParams l;
    l.ln_self_g = ones();
    l.ln_self_b = zeros(h);
    l.self_wq = weight(h, h, rng);
    l.self_bq = zeros(h);
    l.self_wk = weight(h, h, rng);
    l.self_bk = zeros(h);
    l.self_wv = weight(h, h, rng);
    l.self_bv = zeros(h);
    l.self_wo = weight(h, h, rng);
    l.self_bo = zeros(h);
    l.ln_cross_g = ones();
    l.ln_cross_b = zeros(h);
    l.cross_wq = weight(h, h, rng);
    l.cross_bq = zeros(h);
    l.cross_wk = weight(h, h, rng);
    l.cross_bk = zeros(h);
    l.cross_wv = weight(h, h, rng);
    l.cross_bv = zeros(h);
    l.cross_wo = weight(h, h, rng);
    l.cross_bo = zeros(h);
    l.ln_ffn_g = ones();
    l.ln_ffn_b = zeros(h);
    l.ffn_in_w = weight(h, f, rng);
    l.ffn_in_b = zeros(f);
    l.ffn_out_w = weight(f, h, rng);
    l.ffn_out_b = zeros(h);
    layers.push_back(std::move(l));
  }
  head_ln_g = ones();
  head_ln_b = zeros(h);
  head_bias = zeros(v);
  if (!config_.tie_lm_head) head_weight = weight(h, v, rng);
}

Tensor Decoder::logits(const Tensor& memory, std::span<const int> input_ids, AttentionTrace* trace,
                       bool use_cross_attention) const {
  const std::size_t t = input_ids.size(), h = config_.hidden;
  if (t == 0) throw InvalidArgument("decoder: empty input sequence");
  if (t > config_.max_len) {
    throw InvalidArgument("decoder: sequence of " + std::to_string(t) + " exceeds max_len " +
                          std::to_string(config_.max_len));
  }
  if (memory.rank() != 2 || memory.dim(1) != h) {
    throw ShapeError("decoder: memory must be (R, " + std::to_string(h) + "), got " + shape_str(memory.shape()));
  }
  Tensor x = add(embedding(tok_embed, input_ids), slice_rows(pos_embed, 0, t));
  std::vector<double> probs;
  for (const auto& l : layers) {
    const Tensor a = layer_norm(x, l.ln_self_g, l.ln_self_b);
    const Tensor sa = attention(linear(a, l.self_wq, l.self_bq), linear(a, l.self_wk, l.self_bk),
                                linear(a, l.self_wv, l.self_bv), config_.heads, /*causal=*/true,
                                trace ? &probs : nullptr);
    if (trace) trace->self_probs.push_back(probs);
    x = add(x, linear(sa, l.self_wo, l.self_bo));
    if (use_cross_attention) {
      const Tensor c = layer_norm(x, l.ln_cross_g, l.ln_cross_b);
      const Tensor ca = attention(linear(c, l.cross_wq, l.cross_bq), linear(memory, l.cross_wk, l.cross_bk),
                                  linear(memory, l.cross_wv, l.cross_bv), config_.heads, /*causal=*/false,
                                  trace ? &probs : nullptr);
      if (trace) trace->cross_probs.push_back(probs);
      x = add(x, linear(ca, l.cross_wo, l.cross_bo));
    }
    const Tensor f = layer_norm(x, l.ln_ffn_g, l.ln_ffn_b);
    x = add(x, linear(gelu(linear(f, l.ffn_in_w, l.ffn_in_b)), l.ffn_out_w, l.ffn_out_b));
  }
  const Tensor out = layer_norm(x, head_ln_g, head_ln_b);
  const Tensor proj = config_.tie_lm_head ? matmul(out, transpose(tok_embed)) : matmul(out, head_weight);
  return add_bias(proj, head_bias);
}

Decoder::Output Decoder::forward_teacher_forced(const Tensor& memory, const TokenSeq& target, AttentionTrace* trace,
                                                bool use_cross_attention) const {
  if (target.ids.size() < 2 || target.ids.front() != Vocab::kBos || target.ids.back() != Vocab::kEos) {
    throw InvalidArgument("decoder: target must be [BOS, ..., EOS]");
  }
  if (target.ids.size() > config_.max_len) {
    throw InvalidArgument("decoder: target of length " + std::to_string(target.ids.size()) + " exceeds max_len " +
                          std::to_string(config_.max_len));
  }
  const auto inputs = target.inputs();
  const auto labels = target.labels();
  Tensor lg = logits(memory, inputs, trace, use_cross_attention);
  Tensor loss = cross_entropy(lg, labels, Vocab::kPad);
  return {std::move(lg), std::move(loss)};
}

TokenSeq Decoder::greedy_decode(const Tensor& memory, std::size_t max_len) const {
  if (max_len < 2) throw InvalidArgument("greedy_decode: max_len must be at least 2");
  max_len = std::min(max_len, config_.max_len);
  NoGradGuard no_grad;
  TokenSeq seq{{Vocab::kBos}};
  while (seq.ids.size() < max_len - 1) {
    const Tensor lg = logits(memory, seq.ids);
    const auto row = lg.data().subspan((seq.ids.size() - 1) * config_.vocab_size, config_.vocab_size);
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    }
    seq.ids.push_back(best);
    if (best == Vocab::kEos) return seq;
  }
  seq.ids.push_back(Vocab::kEos);
  return seq;
}

TokenSeq greedy_decode(const Decoder& decoder, const Tensor& memory, std::size_t max_len) {
  return decoder.greedy_decode(memory, max_len);
}

std::vector<Tensor> Decoder::embedding_and_head() const {
  std::vector<Tensor> out{tok_embed, pos_embed, head_ln_g, head_ln_b, head_bias};
  if (head_weight.defined()) out.push_back(head_weight);
  return out;
}

std::pair<std::size_t, std::size_t> Decoder::apply_freeze(const FreezeSpec& spec) {
  if (spec.unfreeze_last_n > config_.layers) {
    throw InvalidArgument("apply_freeze: cannot unfreeze " + std::to_string(spec.unfreeze_last_n) + " of " +
                          std::to_string(config_.layers) + " layers");
  }
  std::size_t trainable = 0, frozen = 0;
  const auto mark = [&](std::vector<Tensor> group, bool on) {
    for (auto& t : group) {
      t.set_requires_grad(on);
      if (!on) t.clear_grad();
      (on ? trainable : frozen) += t.numel();
    }
  };
  mark(embedding_and_head(), spec.unfreeze_embeddings);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    mark(layers[i].core(), i + spec.unfreeze_last_n >= config_.layers);
    mark(layers[i].cross(), spec.unfreeze_all_xattn);
  }
  return {trainable, frozen};
}

NamedTensors Decoder::named_parameters() const {
  NamedTensors out = {{"dec.embed.tok", tok_embed}, {"dec.embed.pos", pos_embed}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto l = layers[i].named_parameters("dec.layer" + std::to_string(i) + ".");
    out.insert(out.end(), l.begin(), l.end());
  }
  out.emplace_back("dec.head.ln.gamma", head_ln_g);
  out.emplace_back("dec.head.ln.beta", head_ln_b);
  out.emplace_back("dec.head.bias", head_bias);
  if (head_weight.defined()) out.emplace_back("dec.head.weight", head_weight);
  return out;
}

std::vector<Tensor> Decoder::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

ParamBreakdown count_params(const ModelDims& dims, const FreezeSpec& spec) {
  const auto& c = dims.decoder;
  if (spec.unfreeze_last_n > c.layers) throw InvalidArgument("count_params: unfreeze_last_n exceeds layer count");
  const std::size_t h = c.hidden, f = c.ffn, v = c.vocab_size;
  const std::size_t attn = 4 * (h * h + h);
  const std::size_t norm = 2 * h;
  ParamBreakdown b;
  b.embeddings = v * h + c.max_len * h;
  b.layer_core = attn + (h * f + f) + (f * h + h) + 2 * norm;
  b.layer_cross = attn + norm;
  b.head = norm + v + (c.tie_lm_head ? 0 : h * v);
  b.pool = dims.feature_dim * dims.pool_hidden + dims.pool_hidden;
  b.projection = dims.feature_dim * h + h;
  b.layers = c.layers;
  b.total = b.embeddings + c.layers * (b.layer_core + b.layer_cross) + b.head + b.pool + b.projection;
  b.trainable = b.pool + b.projection + spec.unfreeze_last_n * b.layer_core +
                (spec.unfreeze_all_xattn ? c.layers * b.layer_cross : 0) +
                (spec.unfreeze_embeddings ? b.embeddings + b.head : 0);
  b.frozen = b.total - b.trainable;
  return b;
}

}  // namespace histocap
