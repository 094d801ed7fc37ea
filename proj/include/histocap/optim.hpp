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
#include <vector>

#include "histocap/tensor.hpp"

namespace histocap {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers are created lazily on the first step, one per parameter
// in the order the parameters are passed.
struct AdamState {
  explicit AdamState(AdamOptions opts = {});

  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Bias-corrected Adam update followed by zeroing every gradient.
// Throws InvalidArgument if a parameter has no gradient buffer, and
// NumericError if an updated value is not finite.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// Clamps every gradient component into [-clip, clip].
void clip_grad_value(std::vector<Tensor>& params, double clip);

// Multiplies every populated gradient by `factor`.
void scale_grads(std::vector<Tensor>& params, double factor);

void zero_grads(std::vector<Tensor>& params);

// FNV-1a over the raw bytes of every value, in order.
std::uint64_t checksum(const std::vector<Tensor>& params);

}  // namespace histocap
