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
// Caption metrics: BLEU-4, ROUGE-L, METEOR and tissue-type accuracy, on the
// full caption and on the pathology-notes section alone.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histocap/caption.hpp"

namespace histocap {

struct MetricConfig {
  int bleu_max_n = 4;
  bool bleu_add_one_smoothing = true;  // applied to orders n >= 2
  double rouge_beta = 1.0;
  double meteor_alpha = 0.9;
  double meteor_penalty_gamma = 0.5;
  double meteor_penalty_power = 3.0;
};

double bleu4(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg = {});
double rouge_l(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg = {});
double meteor(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg = {});

// Token-level variants used by the string entry points.
double bleu4_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg = {});
double rouge_l_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg = {});
double meteor_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg = {});

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
// Exact-match unigram alignment with the maximum number of matches and,
// among those, the fewest chunks.
MeteorAlignment meteor_align(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// 1 iff the generated caption parses and its tissue equals `actual_tissue`
// after lowercase/trim.
int tissue_accuracy(std::string_view generated, std::string_view actual_tissue);

struct SampleScores {
  std::string slide_id;
  int tissue_correct = 0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double n_bleu4 = 0.0;
  double n_rouge_l = 0.0;
  double n_meteor = 0.0;
  bool parse_ok = false;
};

struct CorpusMeans {
  double tissue_accuracy = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double meteor = 0.0;
  double n_bleu4 = 0.0;
  double n_rouge_l = 0.0;
  double n_meteor = 0.0;
};

struct EvalReport {
  std::vector<SampleScores> samples;
  CorpusMeans means;
  MetricConfig config;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct EvalPair {
  std::string slide_id;
  std::string generated;
  Caption gold;
};

EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs, const MetricConfig& cfg = {});
CorpusMeans corpus_means(const std::vector<SampleScores>& samples);

}  // namespace histocap
