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
// Parameter checkpoint file ("HCPT").
//
// Layout, all integers u32 little-endian:
//   "HCPT" | version | count | count x { name_len | name (UTF-8) | rank |
//   rank x extent | numel x f32 LE values, row-major }

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "histocap/tensor.hpp"

namespace histocap {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params);
NamedTensors read_checkpoint(const std::filesystem::path& path);

// Copies stored values into `targets` by name. Every target must be present
// with an identical shape; extra stored entries are ignored.
void load_checkpoint_into(const std::filesystem::path& path, NamedTensors& targets);

}  // namespace histocap
