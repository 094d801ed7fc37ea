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
#include "histocap/pool.hpp"

#include <cmath>

#include "histocap/error.hpp"

namespace histocap {

PoolParams PoolParams::init(std::size_t feature_dim, std::size_t hidden, std::mt19937_64& rng) {
  return {Tensor::randn({feature_dim, hidden}, 1.0 / std::sqrt(static_cast<double>(feature_dim)), rng, true),
          Tensor::randn({hidden, 1}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng, true)};
}

NamedTensors PoolParams::named_parameters() const {
  return {{"pool.score_hidden", score_hidden}, {"pool.score_out", score_out}};
}

ProjectionParams ProjectionParams::init(std::size_t feature_dim, std::size_t decoder_width, std::mt19937_64& rng) {
  return {Tensor::randn({feature_dim, decoder_width}, 1.0 / std::sqrt(static_cast<double>(feature_dim)), rng, true),
          Tensor::zeros({decoder_width}, true)};
}

NamedTensors ProjectionParams::named_parameters() const {
  return {{"proj.weight", weight}, {"proj.bias", bias}};
}

PoolResult pool(const Tensor& features, const PoolParams& params) {
  if (features.rank() != 3) throw ShapeError("pool: features must be (M, R, D), got " + shape_str(features.shape()));
  const std::size_t m = features.dim(0), r = features.dim(1), d = features.dim(2);
  if (params.score_hidden.dim(0) != d) throw ShapeError("pool: score_hidden rows must equal D");
  const Tensor summary = mean_dim1(features);                                        // [M, D]
  const Tensor scores = matmul(tanh(matmul(summary, params.score_hidden)), params.score_out);  // [M, 1]
  const Tensor alpha = softmax_lastdim(reshape(scores, {1, m}));                     // [1, M]
  const Tensor pooled = matmul(alpha, reshape(features, {m, r * d}));                // [1, R*D]
  return {reshape(pooled, {1, r, d}), reshape(alpha, {m})};
}

Tensor project(const Tensor& pooled, const ProjectionParams& params) {
  if (pooled.rank() != 3 || pooled.dim(0) != 1) {
    throw ShapeError("project: expected (1, R, D), got " + shape_str(pooled.shape()));
  }
  const Tensor rows = reshape(pooled, {pooled.dim(1), pooled.dim(2)});
  return relu(linear(rows, params.weight, params.bias));
}

}  // namespace histocap
