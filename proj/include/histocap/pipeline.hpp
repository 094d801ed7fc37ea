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
// End-to-end stages behind the command-line tool: corpus generation,
// cached feature extraction, training, evaluation and the experiment table.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "histocap/config.hpp"
#include "histocap/corpus.hpp"
#include "histocap/metrics.hpp"
#include "histocap/model.hpp"
#include "histocap/train.hpp"

namespace histocap {

std::filesystem::path manifest_path(const RunConfig& config);
std::filesystem::path image_path(const RunConfig& config, const std::string& slide_id);
// Cache files live under a directory keyed by everything the features depend on.
std::filesystem::path feature_path(const RunConfig& config, const std::string& slide_id);

std::vector<CorpusEntry> gen_corpus(const RunConfig& config, std::ostream* log = nullptr);
// Throws DataError when the manifest is missing.
std::vector<CorpusEntry> load_corpus(const RunConfig& config);

// The stored PNG if present, otherwise the deterministic synthesis.
RgbImage load_slide_image(const RunConfig& config, const SlideRecord& record);

struct ExtractStats {
  std::size_t encoded = 0;
  std::size_t cached = 0;
  std::size_t skipped = 0;  // no tissue patches
};

// Reads the cache or encodes on demand (writing the cache). Returns nullopt,
// with a warning on `log`, for slides without tissue patches.
std::optional<SlideFeatures> slide_features(const RunConfig& config, const CorpusEntry& entry,
                                            const HiptEncoder& encoder, std::ostream* log = nullptr);
ExtractStats extract_features(const RunConfig& config, const std::vector<CorpusEntry>& entries,
                              std::ostream* log = nullptr);

std::uint64_t model_seed(const RunConfig& config);

struct TrainOutcome {
  TrainResult result;
  std::size_t trainable = 0;
  std::size_t frozen = 0;
  EvalReport test_report;
};

// Trains on the train split, selects the best validation epoch, writes
// best.hcpt / vocab.txt / config.json / epochs.json into the checkpoint
// directory, then evaluates the reloaded checkpoint on the test split.
TrainOutcome run_train(const RunConfig& config, std::ostream* log = nullptr);

struct LoadedModel {
  Vocab vocab;
  CaptionModel model;
};
LoadedModel load_model(const RunConfig& config);

// Greedy captions for `split`, scored against the gold records; writes
// report.json, report.txt and samples.csv into the report directory.
EvalReport run_evaluate(const RunConfig& config, const std::string& split = "test", std::ostream* log = nullptr);
EvalReport evaluate_model(const RunConfig& config, const LoadedModel& loaded, const std::string& split,
                          std::ostream* log = nullptr);

std::string run_caption(const RunConfig& config, const std::string& slide_id);

std::string report_json(const EvalReport& report, const RunConfig& config);
std::string report_table(const EvalReport& report);
// One row per sample; reals printed with 17 significant digits.
std::string samples_csv(const EvalReport& report);
void write_report(const EvalReport& report, const RunConfig& config, const std::filesystem::path& dir);

struct Variant {
  std::string name;
  FreezeSpec freeze;
  std::vector<std::uint64_t> seeds;  // one run per seed
  std::uint64_t init_seed = 0;       // decoder/pooling initialisation family
};

struct VariantRow {
  std::string name;
  std::size_t trained_params = 0;
  std::vector<CorpusMeans> runs;
  CorpusMeans mean;
  CorpusMeans std;  // population standard deviation
};

struct ExperimentReport {
  std::vector<VariantRow> rows;
};

// Three fully fine-tuned decoders that differ only in initialisation, then
// the last-n-layers + cross-attention variants for every n the decoder depth
// allows. `runs` seeds each, starting at config.seed.
std::vector<Variant> default_variants(const RunConfig& config);

ExperimentReport run_experiment_table(const RunConfig& config, const std::vector<Variant>& variants,
                                      std::ostream* log = nullptr);
std::string experiment_table_text(const ExperimentReport& report);
std::string experiment_json(const ExperimentReport& report, const RunConfig& config);

// Population mean and standard deviation per column.
std::pair<CorpusMeans, CorpusMeans> mean_and_std(const std::vector<CorpusMeans>& runs);

}  // namespace histocap
