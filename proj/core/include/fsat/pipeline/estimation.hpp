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
#include <string>
#include <vector>

#include "fsat/adapt/mode.hpp"
#include "fsat/adapt/transforms.hpp"
#include "fsat/asr/decode.hpp"
#include "fsat/asr/model.hpp"
#include "fsat/asr/optimizer.hpp"
#include "fsat/config_io.hpp"
#include "fsat/pipeline/dataset.hpp"

namespace fsat::pipeline {

enum class Supervision { kGiven, kPseudo };
/// Joint updates every transform each step. Alternating updates speaker-side
/// and environment-side transforms in turn, which is the same as descending
/// each factor's own marginal objective with the other factor held fixed.
enum class EstimationSchedule { kJoint, kAlternating };
enum class EstimationOptimizer { kFullBatchDescent, kMinibatchAdam };

const char* supervision_name(Supervision s);
Supervision parse_supervision(const std::string& text);
const char* schedule_name(EstimationSchedule s);
EstimationSchedule parse_schedule(const std::string& text);
const char* optimizer_name(EstimationOptimizer o);
EstimationOptimizer parse_optimizer(const std::string& text);

struct EstimationOptions {
  adapt::AdaptationMode mode;
  adapt::Parameterization parameterization = adapt::Parameterization::kDeterministic;
  adapt::PriorSpec prior;
  std::size_t samples = 1;
  std::size_t epochs = 3;
  double lambda = 0.2;
  double kl_weight = 1.0;
  EstimationSchedule schedule = EstimationSchedule::kJoint;
  EstimationOptimizer optimizer = EstimationOptimizer::kFullBatchDescent;

  /// Full-batch descent along d = -P g, P scaling each transform by
  /// (all tokens / tokens the transform sees). The step is sized so that the
  /// largest coordinate moves by `delta`; delta starts at initial_step, is
  /// shrunk by `backtrack` until the Armijo condition holds and grows by
  /// 1 / backtrack (up to max_step) after every accepted step.
  double initial_step = 0.5;
  double max_step = 4.0;
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 20;

  asr::AdamOptions adam{.learning_rate = 0.02};
  std::size_t batch_size = 8;

  std::size_t layer = 0;
  std::uint64_t seed = 0;

  void validate() const;
  static EstimationOptions from_config(const KeyValueConfig& kv, const std::string& prefix);
  void to_config(KeyValueConfig& kv, const std::string& prefix) const;
};

struct EstimationReport {
  /// Objective before the first epoch, then after every epoch.
  std::vector<double> objective;
  std::vector<double> step_sizes;
  std::string checksum_before;
  std::string checksum_after;
  /// Utterances left out because their targets were empty.
  std::size_t skipped = 0;
};

/// Identity-initialised transforms for every owner the dataset needs.
adapt::TransformSet declare_for_dataset(const asr::ConformerModel& model,
                                        const AdaptationDataset& data,
                                        const EstimationOptions& options);

/// Decodes every utterance, through `transforms` when given (variational
/// transforms contribute their posterior mean).
std::vector<asr::Hypothesis> decode_dataset(const asr::ConformerModel& model,
                                            const AdaptationDataset& data,
                                            adapt::TransformSet* transforms,
                                            const adapt::AdaptationMode& mode,
                                            const asr::DecodeOptions& options);

std::vector<std::vector<int>> hypothesis_tokens(const std::vector<asr::Hypothesis>& hyps);

/// Minimises the adaptation objective over the transforms in `set` with the
/// canonical parameters frozen. targets[i] belongs to data[i]; utterances
/// with empty targets are skipped. Throws DomainError naming any transform
/// in `set` that no remaining utterance uses.
EstimationReport estimate_transforms(const asr::ConformerModel& model,
                                     const AdaptationDataset& data,
                                     const std::vector<std::vector<int>>& targets,
                                     adapt::TransformSet& set, const EstimationOptions& options);

}  // namespace fsat::pipeline
