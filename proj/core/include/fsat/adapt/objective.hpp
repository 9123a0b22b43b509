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
#include <span>
#include <string>
#include <vector>

#include "fsat/adapt/mode.hpp"
#include "fsat/asr/model.hpp"

namespace fsat::adapt {

/// One supervised utterance for transform estimation or adaptive training.
struct AdaptItem {
  /// Features (T x F), or the cached subsampling output (T' x D) when
  /// `subsampled` is set; caching is valid only for insertion layer 0 and a
  /// frozen subsampling module.
  ad::Tensor input;
  bool subsampled = false;
  std::vector<int> tokens;
  std::string speaker;
  std::string environment;
};

struct ObjectiveOptions {
  AdaptationMode mode;
  PriorSpec prior;
  /// Monte Carlo samples per evaluation (variational transforms only).
  std::size_t samples = 1;
  double lambda = 0.2;
  double kl_weight = 1.0;
  /// Share of the KL charged to this batch: batch tokens / adaptation tokens.
  double kl_scale = 1.0;
  /// Token count the objective is divided by; 0 uses the batch token count.
  std::size_t normaliser = 0;
  std::uint64_t seed = 0;
  ad::Mode tape_mode = ad::Mode::kEval;
};

struct ObjectiveValue {
  double total = 0.0;
  double data = 0.0;  // (1/K) sum_k sum_u L_u, before normalisation
  double kl = 0.0;    // sum of KL terms of the transforms the batch uses
  std::size_t tokens = 0;
};

std::size_t token_count(std::span<const AdaptItem> items);

/// Transforms the batch touches, each once, in key order.
std::vector<FactorTransform*> transforms_in_batch(TransformSet& set, const AdaptationMode& mode,
                                                  std::span<const AdaptItem> items);

/// [ (1/K) sum_k sum_u L_u(r_k, n_k) + kl_weight * kl_scale * sum KL(q || prior) ] / N
/// on a single tape. Deterministic sets contribute no KL and use K = 1.
ad::Var bayesian_objective(ad::Tape& tape, const asr::ConformerModel& model,
                           std::span<const AdaptItem> items, TransformSet& set,
                           const ObjectiveOptions& options, ObjectiveValue* parts = nullptr);

/// Same objective evaluated one utterance per tape. With accumulate_grad the
/// gradient is added into Parameter::grad of every trainable parameter used.
ObjectiveValue evaluate_objective(const asr::ConformerModel& model,
                                  std::span<const AdaptItem> items, TransformSet& set,
                                  const ObjectiveOptions& options, bool accumulate_grad);

}  // namespace fsat::adapt
