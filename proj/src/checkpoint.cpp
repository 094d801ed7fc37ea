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
#include "histocap/checkpoint.hpp"

#include <algorithm>
#include <map>

#include "binary_io.hpp"
#include "histocap/error.hpp"

namespace histocap {

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params) {
  io::ByteWriter w;
  w.bytes("HCPT");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double x : t.data()) w.f32(static_cast<float>(x));
  }
  io::write_file_atomic(path, w.buffer());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  if (r.bytes(4) != "HCPT") throw CorruptionError(path.string() + ": bad checkpoint magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CorruptionError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.u32();
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto rank = r.u32();
    Shape shape;
    for (std::uint32_t a = 0; a < rank; ++a) {
      shape.push_back(r.u32());
      if (shape.back() == 0) throw CorruptionError(path.string() + ": zero extent in " + name);
    }
    const std::size_t n = shape_numel(shape);
    r.need(n * 4);
    std::vector<double> values(n);
    for (auto& v : values) v = r.f32();
    out.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) {
    throw CorruptionError(path.string() + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return out;
}

void load_checkpoint_into(const std::filesystem::path& path, NamedTensors& targets) {
  std::map<std::string, Tensor> stored;
  for (auto& [name, t] : read_checkpoint(path)) stored.emplace(name, t);
  for (auto& [name, target] : targets) {
    auto it = stored.find(name);
    if (it == stored.end()) throw DataError(path.string() + ": missing parameter " + name);
    if (it->second.shape() != target.shape()) {
      throw DataError(path.string() + ": shape of " + name + " is " + shape_str(it->second.shape()) +
                      ", expected " + shape_str(target.shape()));
    }
    std::copy(it->second.data().begin(), it->second.data().end(), target.data().begin());
  }
}

}  // namespace histocap
