// Copyright 2026 The fsat Authors.
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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fsat/adapt/mode.hpp"
#include "fsat/adapt/transforms.hpp"
#include "fsat/asr/model.hpp"
#include "fsat/asr/optimizer.hpp"
#include "fsat/frontend/logmel.hpp"
#include "fsat/pipeline/dataset.hpp"

namespace fsat::pipeline {

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  asr::AdamOptions adam{.learning_rate = 2e-3};
  bool spec_augment = true;
  frontend::SpecAugmentConfig augment{1, 4, 1, 2};
  std::uint64_t seed = 1;
  /// Called after every epoch with (epoch, mean utterance loss).
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainReport {
  /// Mean multitask loss per utterance, one entry per epoch.
  std::vector<double> epoch_loss;
};

/// Minibatch Adam on the canonical parameters with dropout and SpecAugment.
/// Every utterance needs a transcript.
TrainReport train_model(asr::ConformerModel& model, const AdaptationDataset& data,
                        const TrainOptions& options);

struct AdaptiveTrainResult {
  adapt::TransformSet transforms;
  TrainReport report;
};

/// Trains the canonical parameters together with one deterministic transform
/// per training speaker and per training environment (as the mode needs).
/// Each utterance is always seen through its own speaker and environment.
AdaptiveTrainResult adaptive_train(asr::ConformerModel& model, const AdaptationDataset& data,
                                   const adapt::AdaptationMode& mode,
                                   const TrainOptions& options, std::size_t layer = 0);

/// Transcripts as token ids. Throws FormatError for a missing transcript.
std::vector<std::vector<int>> transcript_tokens(const asr::ConformerModel& model,
                                                const AdaptationDataset& data);

/// Mean eval-mode multitask loss per utterance, optionally through transforms.
double mean_loss(const asr::ConformerModel& model, const AdaptationDataset& data,
                 adapt::TransformSet* transforms, const adapt::AdaptationMode& mode);

}  // namespace fsat::pipeline
