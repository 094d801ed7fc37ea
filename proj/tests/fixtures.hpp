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
// Small models, synthetic samples and run configs shared by the training tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "histocap/caption.hpp"
#include "histocap/config.hpp"
#include "histocap/model.hpp"
#include "histocap/train.hpp"

namespace fixtures {

using namespace histocap;


inline ModelDims tiny_dims(std::size_t vocab, std::size_t layers = 1) {
  ModelDims d;
  d.decoder.layers = layers;
  d.decoder.hidden = 16;
  d.decoder.heads = 2;
  d.decoder.ffn = 32;
  d.decoder.vocab_size = vocab;
  d.decoder.max_len = 40;
  d.feature_dim = 8;
  d.pool_hidden = 8;
  return d;
}

struct TinyData {
  Vocab vocab;
  std::vector<TrainSample> train, val;
};

inline TinyData tiny_data(std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  const std::vector<std::string> tissues{"liver", "lung", "colon", "spleen"};
  std::mt19937_64 rng(seed);
  std::vector<Caption> caps;
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    caps.push_back(make_caption(tissues[rng() % tissues.size()], rng() % 2 ? "male" : "female",
                                std::to_string(1 + rng() % 6) + " pieces."));
  }
  std::vector<std::string> texts;
  for (const auto& c : caps) texts.push_back(c.text);
  TinyData d{Vocab::build(texts), {}, {}};
  for (std::size_t i = 0; i < caps.size(); ++i) {
    const std::size_t m = 1 + i % 3;
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(m * 3 * 8);
    for (auto& x : v) x = nd(rng);
    TrainSample s{"s" + std::to_string(i), Tensor::from({m, 3, 8}, v), encode_ids(caps[i].text, d.vocab, 40)};
    (i < n_train ? d.train : d.val).push_back(std::move(s));
  }
  return d;
}

inline std::vector<std::vector<double>> snapshot(const CaptionModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.named_parameters()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

// Worst elementwise |a - b| / max(|a|, |b|, floor). The floor keeps values
// that are zero up to rounding (e.g. key biases, whose gradient vanishes
// under softmax shift invariance) from dominating.
inline double max_rel_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                           double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double d = std::abs(a[i][j] - b[i][j]) / std::max({std::abs(a[i][j]), std::abs(b[i][j]), floor});
      worst = std::max(worst, d);
    }
  return worst;
}

inline RunConfig small_run_config(const std::filesystem::path& root) {
  RunConfig c;
  c.train_size = 8;
  c.val_size = 4;
  c.test_size = 4;
  c.epochs = 2;
  c.accumulation = 4;
  c.decoder_layers = 1;
  c.decoder_hidden = 16;
  c.decoder_heads = 2;
  c.decoder_ffn = 32;
  c.pool_hidden = 8;
  c.lr = 1e-3;
  c.seed = 3;
  c.set_root(root);
  return c;
}

}  // namespace fixtures
