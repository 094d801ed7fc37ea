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
#include "histocap/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "histocap/error.hpp"

namespace histocap {

void TrainOptions::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (accumulation == 0) throw InvalidArgument("accumulation must be >= 1");
  if (epochs == 0) throw InvalidArgument("epochs must be >= 1");
  if (!(clip > 0.0)) throw InvalidArgument("clip must be positive");
}

std::size_t select_best_epoch(const std::vector<EpochLog>& logs) {
  if (logs.empty()) throw InvalidArgument("no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (logs[i].val_loss < logs[best].val_loss) best = i;
  }
  return logs[best].epoch;
}

Trainer::Trainer(CaptionModel& model, TrainOptions options, std::vector<Tensor> watched)
    : model_(model),
      options_(options),
      trainable_(model.trainable_parameters()),
      watched_(std::move(watched)),
      adam_(AdamOptions{options.lr}) {
  options_.validate();
  for (const auto& t : model_.frozen_parameters()) watched_.push_back(t);
}

double Trainer::accumulate(const TrainSample& sample) {
  auto out = model_.forward(sample.features, sample.target);
  backward(out.loss);
  ++pending_;
  return out.loss.item();
}

void Trainer::step() {
  if (pending_ == 0) return;
  scale_grads(trainable_, 1.0 / static_cast<double>(pending_));
  clip_grad_value(trainable_, options_.clip);
  adam_step(trainable_, adam_);
  pending_ = 0;
  ++updates_;
}

double Trainer::validation_loss(const std::vector<TrainSample>& samples) const {
  if (samples.empty()) throw DataError("validation split is empty");
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : samples) total += model_.forward(s.features, s.target).loss.item();
  return total / static_cast<double>(samples.size());
}

std::uint64_t Trainer::frozen_checksum() const { return checksum(watched_); }

TrainResult Trainer::fit(const std::vector<TrainSample>& train, const std::vector<TrainSample>& val,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw DataError("training split is empty");
  if (val.empty()) throw DataError("validation split is empty");

  std::mt19937_64 rng(options_.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<std::vector<double>> best_values;
  double best_val = 0.0;

  for (std::size_t epoch = 1; epoch <= options_.epochs; ++epoch) {
    auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& sample = train[order[i]];
      try {
        total += accumulate(sample);
        if (pending_ == options_.accumulation) step();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", sample " + std::to_string(i) + " (" +
                           sample.slide_id + "): " + e.what());
      }
    }
    try {
      step();
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ", final update: " + e.what());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(train.size());
    log.val_loss = validation_loss(val);
    log.frozen_checksum = frozen_checksum();
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.logs.push_back(log);

    if (epoch == 1 || log.val_loss < best_val) {
      best_val = log.val_loss;
      best_values.clear();
      for (const auto& t : trainable_) best_values.emplace_back(t.data().begin(), t.data().end());
    }
    if (on_epoch) on_epoch(log);
  }

  for (std::size_t i = 0; i < trainable_.size(); ++i) {
    std::copy(best_values[i].begin(), best_values[i].end(), trainable_[i].data().begin());
  }
  result.best_epoch = select_best_epoch(result.logs);
  result.updates = updates_;
  return result;
}

}  // namespace histocap
