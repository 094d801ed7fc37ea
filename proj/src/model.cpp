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
#include "histocap/model.hpp"

namespace histocap {

CaptionModel::CaptionModel(const ModelDims& dims, std::uint64_t seed) : CaptionModel(dims, std::mt19937_64(seed)) {}

CaptionModel::CaptionModel(const ModelDims& dims, std::mt19937_64 rng)
    : dims_(dims),
      rng_(rng),
      pool_params(PoolParams::init(dims.feature_dim, dims.pool_hidden, rng_)),
      proj_params(ProjectionParams::init(dims.feature_dim, dims.decoder.hidden, rng_)),
      decoder(dims.decoder, rng_) {}

Tensor CaptionModel::memory(const Tensor& features) const {
  return project(pool(features, pool_params).pooled, proj_params);
}

Decoder::Output CaptionModel::forward(const Tensor& features, const TokenSeq& target) const {
  return decoder.forward_teacher_forced(memory(features), target);
}

TokenSeq CaptionModel::generate(const Tensor& features, std::size_t max_len) const {
  NoGradGuard no_grad;
  return decoder.greedy_decode(memory(features), max_len);
}

std::pair<std::size_t, std::size_t> CaptionModel::apply_freeze(const FreezeSpec& spec) {
  auto counts = decoder.apply_freeze(spec);
  for (auto& [name, t] : pool_params.named_parameters()) {
    t.set_requires_grad(true);
    counts.first += t.numel();
  }
  for (auto& [name, t] : proj_params.named_parameters()) {
    t.set_requires_grad(true);
    counts.first += t.numel();
  }
  return counts;
}

NamedTensors CaptionModel::named_parameters() const {
  NamedTensors out = pool_params.named_parameters();
  auto proj = proj_params.named_parameters();
  auto dec = decoder.named_parameters();
  out.insert(out.end(), proj.begin(), proj.end());
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

std::vector<Tensor> CaptionModel::trainable_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

std::vector<Tensor> CaptionModel::frozen_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) {
    if (!t.requires_grad()) out.push_back(t);
  }
  return out;
}

}  // namespace histocap
