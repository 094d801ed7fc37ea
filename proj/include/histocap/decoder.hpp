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
// Pre-norm transformer LM decoder with per-layer cross-attention over the
// projected slide memory.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "histocap/caption.hpp"
#include "histocap/checkpoint.hpp"
#include "histocap/tensor.hpp"

namespace histocap {

struct DecoderConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  bool tie_lm_head = true;

  static DecoderConfig toy(std::size_t vocab_size);
  // 12 layers, width 768, 12 heads, FFN 3072; bert-base-cased vocabulary.
  static DecoderConfig bert_base(std::size_t vocab_size = 28996, std::size_t max_len = 512);
  void validate() const;
};

struct FreezeSpec {
  std::size_t unfreeze_last_n = 0;
  bool unfreeze_all_xattn = false;
  bool unfreeze_embeddings = false;  // also governs the LM head

  static FreezeSpec all(std::size_t layers) { return {layers, true, true}; }
};

struct DecoderLayerParams {
  Tensor ln_self_g, ln_self_b;
  Tensor self_wq, self_bq, self_wk, self_bk, self_wv, self_bv, self_wo, self_bo;
  Tensor ln_cross_g, ln_cross_b;
  Tensor cross_wq, cross_bq, cross_wk, cross_bk, cross_wv, cross_bv, cross_wo, cross_bo;
  Tensor ln_ffn_g, ln_ffn_b;
  Tensor ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;

  // Self-attention, FFN and their two norms.
  std::vector<Tensor> core() const;
  // Cross-attention projections and the norm in front of them.
  std::vector<Tensor> cross() const;
  NamedTensors named_parameters(const std::string& prefix) const;
};

// Attention weights captured during a forward pass, [heads * Tq * Tk] per layer.
struct AttentionTrace {
  std::vector<std::vector<double>> self_probs;
  std::vector<std::vector<double>> cross_probs;
};

class Decoder {
 public:
  struct Output {
    Tensor logits;  // [T, vocab]
    Tensor loss;    // scalar
  };

  Decoder(const DecoderConfig& config, std::mt19937_64& rng);

  const DecoderConfig& config() const { return config_; }

  // Next-token logits for every position of `input_ids`. With
  // `use_cross_attention` false the cross-attention sublayers are skipped.
  Tensor logits(const Tensor& memory, std::span<const int> input_ids, AttentionTrace* trace = nullptr,
                bool use_cross_attention = true) const;

  // Inputs are target without its final EOS; labels are target without BOS.
  Output forward_teacher_forced(const Tensor& memory, const TokenSeq& target, AttentionTrace* trace = nullptr,
                                bool use_cross_attention = true) const;

  // Argmax decoding from [BOS]; ties go to the lowest id. Stops at EOS or
  // forces EOS as the final element once max_len is reached.
  TokenSeq greedy_decode(const Tensor& memory, std::size_t max_len) const;

  // Sets requires_grad per `spec`; returns {trainable, frozen} counts.
  std::pair<std::size_t, std::size_t> apply_freeze(const FreezeSpec& spec);

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;

  Tensor tok_embed;  // [V, H]
  Tensor pos_embed;  // [max_len, H]
  std::vector<DecoderLayerParams> layers;
  Tensor head_ln_g, head_ln_b;
  Tensor head_bias;    // [V]
  Tensor head_weight;  // [H, V], only when the head is untied

 private:
  std::vector<Tensor> embedding_and_head() const;
  DecoderConfig config_;
};

TokenSeq greedy_decode(const Decoder& decoder, const Tensor& memory, std::size_t max_len);

struct ModelDims {
  DecoderConfig decoder;
  std::size_t feature_dim = 72;  // D
  std::size_t pool_hidden = 32;  // H_a
};

struct ParamBreakdown {
  std::size_t embeddings = 0;
  std::size_t layer_core = 0;   // one layer: self-attention + FFN + 2 norms
  std::size_t layer_cross = 0;  // one layer: cross-attention + its norm
  std::size_t head = 0;
  std::size_t pool = 0;
  std::size_t projection = 0;
  std::size_t layers = 0;
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
};

// Closed-form parameter counts; pooling and projection are always trainable.
ParamBreakdown count_params(const ModelDims& dims, const FreezeSpec& spec);

}  // namespace histocap
