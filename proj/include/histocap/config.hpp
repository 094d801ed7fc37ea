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
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "histocap/decoder.hpp"
#include "histocap/hipt.hpp"

namespace histocap {

// Every knob of a run. Serialised with kebab-case keys; the JSON text is
// hashed into reports and checkpoints.
struct RunConfig {
  // geometry
  std::size_t slide_size = 1024;
  std::size_t level2_size = 256;
  std::size_t level1_size = 64;
  std::size_t token_size = 16;
  // encoders
  std::size_t d1 = 48;
  std::size_t d2 = 24;
  std::size_t depth1 = 2;
  std::size_t depth2 = 2;
  std::size_t heads1 = 4;
  std::size_t heads2 = 2;
  double mlp_ratio = 4.0;
  std::uint64_t encoder_seed = 7;
  // pooling + decoder
  std::size_t pool_hidden = 32;
  std::size_t decoder_layers = 2;
  std::size_t decoder_hidden = 64;
  std::size_t decoder_heads = 4;
  std::size_t decoder_ffn = 256;
  std::size_t max_len = 64;
  bool tie_lm_head = true;
  // freezing; unfreeze_last_n < 0 means every layer
  long unfreeze_last_n = -1;
  bool unfreeze_all_xattn = true;
  bool unfreeze_embeddings = true;
  // optimisation
  double lr = 3e-4;
  double reference_lr = 2e-5;  // fine-tuning rate for pretrained decoders; not used by the trainer
  std::size_t accumulation = 16;
  std::size_t epochs = 20;
  double clip = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;  // mixed with `seed` for decoder/pooling init
  // corpus
  std::size_t train_size = 2000;
  std::size_t val_size = 200;
  std::size_t test_size = 200;
  double blob_coverage = 1.0;
  double background_threshold = 0.9;
  bool write_images = false;  // slides are re-synthesised on demand otherwise
  // experiment table
  std::size_t runs = 3;
  // paths
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "reports";

  HiptConfig hipt() const;
  DecoderConfig decoder(std::size_t vocab_size) const;
  FreezeSpec freeze() const;
  ModelDims dims(std::size_t vocab_size) const;
  SynthConfig synth() const;

  // Rebases relative paths onto `root`.
  void set_root(const std::filesystem::path& root);
  void validate() const;

  std::string to_json(bool include_paths = true) const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  // FNV-1a of the path-free JSON form, as 16 hex digits.
  std::string hash() const;
};

}  // namespace histocap
