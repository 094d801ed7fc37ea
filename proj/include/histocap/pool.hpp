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
// Trainable attention pooling over slide patches and the ReLU projection
// into decoder width.

#pragma once

#include <random>

#include "histocap/checkpoint.hpp"
#include "histocap/tensor.hpp"

namespace histocap {

struct PoolParams {
  Tensor score_hidden;  // [D, H_a]
  Tensor score_out;     // [H_a, 1]

  static PoolParams init(std::size_t feature_dim, std::size_t hidden, std::mt19937_64& rng);
  NamedTensors named_parameters() const;
};

struct ProjectionParams {
  Tensor weight;  // [D, H_dec]
  Tensor bias;    // [H_dec]

  static ProjectionParams init(std::size_t feature_dim, std::size_t decoder_width, std::mt19937_64& rng);
  NamedTensors named_parameters() const;
};

struct PoolResult {
  Tensor pooled;   // [1, R, D]
  Tensor weights;  // [M]
};

// h_m = mean_r features[m, r, :]; s_m = tanh(h_m W_h) w_o; alpha = softmax(s);
// pooled = sum_m alpha_m features[m].
PoolResult pool(const Tensor& features, const PoolParams& params);

// ReLU(pooled W + b) with the leading unit axis removed: [R, H_dec].
Tensor project(const Tensor& pooled, const ProjectionParams& params);

}  // namespace histocap
