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
// Trainable captioning head: attention pooling, ReLU projection and decoder.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "histocap/decoder.hpp"
#include "histocap/pool.hpp"

namespace histocap {

class CaptionModel {
 public:
  CaptionModel(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }

  // features [M, R, D] -> memory [R, hidden]
  Tensor memory(const Tensor& features) const;
  Decoder::Output forward(const Tensor& features, const TokenSeq& target) const;
  TokenSeq generate(const Tensor& features, std::size_t max_len) const;

  // Pooling and projection stay trainable; the decoder follows `spec`.
  // Returns {trainable, frozen} parameter counts.
  std::pair<std::size_t, std::size_t> apply_freeze(const FreezeSpec& spec);

  NamedTensors named_parameters() const;
  std::vector<Tensor> trainable_parameters() const;
  std::vector<Tensor> frozen_parameters() const;

 private:
  CaptionModel(const ModelDims& dims, std::mt19937_64 rng);

  ModelDims dims_;
  std::mt19937_64 rng_;

 public:
  PoolParams pool_params;
  ProjectionParams proj_params;
  Decoder decoder;
};

}  // namespace histocap
