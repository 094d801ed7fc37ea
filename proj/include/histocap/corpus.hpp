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
// Synthetic corpus records and the JSON-lines manifest.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "histocap/caption.hpp"
#include "histocap/config.hpp"
#include "histocap/slide.hpp"

namespace histocap {

struct CorpusEntry {
  SlideRecord record;
  std::string split;  // "train" | "val" | "test"

  Caption caption() const {
    return make_caption(record.tissue_type, record.sex, record.pathology_notes);
  }
};

// Deterministic in (config.seed, sizes, slide size). Tissue types are
// uniform over the default list, sex is uniform and independent of the
// image, notes are "{k} pieces." with k uniform in [1, 6].
std::vector<CorpusEntry> generate_corpus(const RunConfig& config);

void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path);

std::vector<CorpusEntry> select_split(const std::vector<CorpusEntry>& entries, const std::string& split);

}  // namespace histocap
