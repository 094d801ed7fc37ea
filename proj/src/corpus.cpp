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
#include "histocap/corpus.hpp"

#include <fstream>
#include <random>

#include "histocap/error.hpp"
#include "json.hpp"

namespace histocap {

using nlohmann::json;

std::vector<CorpusEntry> generate_corpus(const RunConfig& config) {
  const auto& tissues = default_tissue_types();
  std::mt19937_64 rng(config.seed ^ 0xC0FFEEULL);
  std::uniform_int_distribution<std::size_t> tissue(0, tissues.size() - 1);
  std::uniform_int_distribution<int> pieces(1, 6);
  std::bernoulli_distribution male(0.5);
  std::vector<CorpusEntry> out;
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", config.train_size}, {"val", config.val_size}, {"test", config.test_size}};
  std::size_t index = 0;
  for (const auto& [split, count] : splits) {
    for (std::size_t i = 0; i < count; ++i) {
      CorpusEntry e;
      char id[32];
      std::snprintf(id, sizeof(id), "slide-%05zu", index++);
      e.record.slide_id = id;
      e.record.width = config.slide_size;
      e.record.height = config.slide_size;
      e.record.tissue_type = tissues[tissue(rng)];
      e.record.sex = male(rng) ? "male" : "female";
      e.record.pathology_notes = std::to_string(pieces(rng)) + " pieces.";
      e.record.seed = rng();
      e.split = split;
      out.push_back(std::move(e));
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<CorpusEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : entries) {
    json j = {{"slide_id", e.record.slide_id},
              {"tissue_type", e.record.tissue_type},
              {"sex", e.record.sex},
              {"pathology_notes", e.record.pathology_notes},
              {"seed", e.record.seed},
              {"split", e.split},
              {"width", e.record.width},
              {"height", e.record.height}};
    out << j.dump() << '\n';
  }
}

std::vector<CorpusEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<CorpusEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      CorpusEntry e;
      e.record.slide_id = j.at("slide_id").get<std::string>();
      e.record.tissue_type = j.at("tissue_type").get<std::string>();
      e.record.sex = j.at("sex").get<std::string>();
      e.record.pathology_notes = j.at("pathology_notes").get<std::string>();
      e.record.seed = j.at("seed").get<std::uint64_t>();
      e.split = j.at("split").get<std::string>();
      e.record.width = j.value("width", std::size_t{1024});
      e.record.height = j.value("height", std::size_t{1024});
      if (e.split != "train" && e.split != "val" && e.split != "test") {
        throw DataError("unknown split '" + e.split + "'");
      }
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<CorpusEntry> select_split(const std::vector<CorpusEntry>& entries, const std::string& split) {
  std::vector<CorpusEntry> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

}  // namespace histocap
