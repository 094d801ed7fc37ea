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
#include "histocap/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "histocap/error.hpp"

namespace histocap {

AdamState::AdamState(AdamOptions opts) : options(opts) {
  if (!(options.lr > 0.0)) throw InvalidArgument("adam: lr must be positive");
  if (!(options.beta1 > 0.0 && options.beta1 < 1.0) || !(options.beta2 > 0.0 && options.beta2 < 1.0)) {
    throw InvalidArgument("adam: betas must lie in (0, 1)");
  }
  if (!(options.eps > 0.0)) throw InvalidArgument("adam: eps must be positive");
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw InvalidArgument("adam: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw InvalidArgument("adam: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].size() != params[i].numel()) throw InvalidArgument("adam: moment shape mismatch");
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
      if (!std::isfinite(w[j])) {
        throw NumericError("adam: parameter " + std::to_string(i) + " became non-finite at step " +
                           std::to_string(state.step));
      }
    }
    std::fill(g.begin(), g.end(), 0.0);
  }
}

void clip_grad_value(std::vector<Tensor>& params, double clip) {
  if (!(clip > 0.0)) throw InvalidArgument("clip_grad_value: clip must be positive");
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (auto& g : p.grad()) g = std::min(std::max(g, -clip), clip);
  }
}

void scale_grads(std::vector<Tensor>& params, double factor) {
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (auto& g : p.grad()) g *= factor;
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

std::uint64_t checksum(const std::vector<Tensor>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (double x : p.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace histocap
