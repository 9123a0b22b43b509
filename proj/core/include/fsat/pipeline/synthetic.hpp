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

#include "fsat/autodiff/tensor.hpp"
#include "fsat/config_io.hpp"
#include "fsat/frontend/archive.hpp"

namespace fsat::pipeline {

/// A grid of speakers x environments rendered straight to feature frames.
///
/// Every frame is prototype(token) * tilt(speaker) + pattern(env) + noise(env).
/// Prototypes, speaker tilts and environment patterns are functions of the
/// seed and the global speaker / environment index only, so disjoint index
/// ranges (speaker_offset, environment_offset) drawn under one seed share a
/// language and differ only in who is talking where.
struct SyntheticTaskSpec {
  std::size_t speakers = 1;
  std::size_t environments = 1;
  std::size_t utterances_per_cell = 1;
  std::size_t speaker_offset = 0;
  std::size_t environment_offset = 0;
  /// Names the draw of utterance content, so "train" and "test" differ.
  std::string split = "train";

  std::string alphabet = "abcdef";
  std::size_t feature_dim = 16;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 6;
  std::size_t min_token_frames = 6;
  std::size_t max_token_frames = 9;
  std::size_t edge_frames = 2;  // token-free frames at both ends
  double frame_jitter = 0.15;

  /// tilt(f) = exp(a * (2f/(F-1) - 1) + b * g(f)), a ~ U(-slope, slope),
  /// g ~ N(0, 1) per bin.
  double speaker_slope = 0.6;
  double speaker_ripple = 0.2;
  /// pattern(f) = scale * (offset + smooth N(0, 1)), offset ~ U(0, env_offset).
  double env_scale = 0.8;
  double env_offset = 1.0;
  double min_noise = 0.1;
  double max_noise = 0.4;

  std::uint64_t seed = 1;

  void validate() const;
  static SyntheticTaskSpec from_config(const KeyValueConfig& kv, const std::string& prefix);
  void to_config(KeyValueConfig& kv, const std::string& prefix) const;
};

struct SyntheticTruth {
  std::vector<std::string> speaker_ids;
  std::vector<ad::Tensor> tilts;     // per speaker, length F
  std::vector<std::string> env_ids;
  std::vector<ad::Tensor> patterns;  // per environment, length F
  std::vector<double> noise_levels;
};

struct SyntheticCorpus {
  std::vector<frontend::FeatureSequence> utterances;
  SyntheticTruth truth;
};

std::string synthetic_speaker_id(std::size_t index);
std::string synthetic_env_id(std::size_t index);

/// Deterministic for a given SyntheticTaskSpec. Throws ConfigError for fewer than two
/// symbols or an empty grid.
SyntheticCorpus generate_synthetic_corpus(const SyntheticTaskSpec& spec);

}  // namespace fsat::pipeline
