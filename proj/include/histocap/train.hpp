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
// Teacher-forced training with gradient accumulation and best-epoch selection.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "histocap/caption.hpp"
#include "histocap/model.hpp"
#include "histocap/optim.hpp"

namespace histocap {

struct TrainOptions {
  double lr = 3e-4;
  std::size_t accumulation = 16;
  std::size_t epochs = 20;
  double clip = 1.0;
  std::uint64_t seed = 0;  // shuffling order

  void validate() const;
};

struct TrainSample {
  std::string slide_id;
  Tensor features;  // [M, R, D]
  TokenSeq target;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
  std::uint64_t frozen_checksum = 0;
};

// Argmin of val_loss, earliest epoch on ties. Throws on an empty log.
std::size_t select_best_epoch(const std::vector<EpochLog>& logs);

struct TrainResult {
  std::vector<EpochLog> logs;
  std::size_t best_epoch = 0;
  std::size_t updates = 0;
};

class Trainer {
 public:
  // `watched` are extra frozen tensors (e.g. the encoder) folded into the
  // per-epoch frozen checksum.
  Trainer(CaptionModel& model, TrainOptions options, std::vector<Tensor> watched = {});

  // Forward + backward on one sample; gradients accumulate until step().
  double accumulate(const TrainSample& sample);
  // Averages the pending gradients, clips, and applies Adam. No-op when
  // nothing is pending.
  void step();
  std::size_t pending() const { return pending_; }

  double validation_loss(const std::vector<TrainSample>& samples) const;

  // Runs every epoch, then restores the parameters of the best one.
  TrainResult fit(const std::vector<TrainSample>& train, const std::vector<TrainSample>& val,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

  std::uint64_t frozen_checksum() const;
  const AdamState& adam() const { return adam_; }

 private:
  CaptionModel& model_;
  TrainOptions options_;
  std::vector<Tensor> trainable_;
  std::vector<Tensor> watched_;
  AdamState adam_;
  std::size_t pending_ = 0;
  std::size_t updates_ = 0;
};

}  // namespace histocap
