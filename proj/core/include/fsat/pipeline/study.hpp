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
#include <map>
#include <string>
#include <vector>

#include "fsat/asr/decode.hpp"
#include "fsat/asr/model_config.hpp"
#include "fsat/config_io.hpp"
#include "fsat/pipeline/estimation.hpp"
#include "fsat/pipeline/synthetic.hpp"
#include "fsat/pipeline/training.hpp"

namespace fsat::pipeline {

/// The synthetic adaptation study: a baseline trained on some speakers and
/// environments, then decoded on new speakers in seen and unseen
/// environments with and without test-time adaptation, plus cached-transform
/// reuse under matched and mismatched pairings.
struct StudySpec {
  SyntheticTaskSpec task;  // language and effect sizes; grid fields are set per split
  std::size_t train_speakers = 16;
  std::size_t train_environments = 4;
  std::size_t train_utterances = 6;
  std::size_t test_speakers = 6;
  std::size_t test_seen_environments = 2;    // taken from the training environments
  std::size_t test_unseen_environments = 3;
  std::size_t test_utterances = 10;
  /// Utterances per test cell used only to build the rapid-adaptation cache.
  std::size_t cache_utterances = 4;

  asr::ModelConfig model;
  TrainOptions train;
  EstimationOptions estimation;  // mode and parameterisation are set per system
  asr::DecodeOptions decode;
  double lfa_beta = 0.7;
  /// Pseudo labels from the first pass, or the reference transcripts.
  Supervision supervision = Supervision::kPseudo;

  static StudySpec defaults();
  static StudySpec from_config(const KeyValueConfig& kv);
  KeyValueConfig to_config() const;
};

struct StudyOutcome {
  /// Token error rate (%) per system name.
  std::map<std::string, double> error_rate;
  /// Canonical checksums must agree before and after every estimation.
  bool canonical_frozen = true;
  std::vector<double> train_loss;
  /// True when every estimation objective trace is non-increasing.
  bool monotone = true;
};

/// System names, in report order.
const std::vector<std::string>& study_systems();

/// Runs every system for one seed. `log` receives progress lines.
StudyOutcome run_study(const StudySpec& spec, std::uint64_t seed,
                       const std::function<void(const std::string&)>& log = {});

}  // namespace fsat::pipeline
