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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsat/adapt/transforms.hpp"
#include "fsat/asr/model.hpp"

namespace fsat::adapt {

enum class ModeType { kSpeakerOnly, kEnvOnly, kJointSingle, kLfa, kCfa };

struct AdaptationMode {
  ModeType type = ModeType::kCfa;
  /// Kind of the speaker transform (also of the joint transform).
  TransformKind speaker_kind = TransformKind::kHub;
  TransformKind env_kind = TransformKind::kHub;
  double beta = 0.7;

  static AdaptationMode speaker_only(TransformKind kind);
  static AdaptationMode env_only(TransformKind kind);
  static AdaptationMode joint_single(TransformKind kind);
  static AdaptationMode lfa(double beta);
  static AdaptationMode cfa(TransformKind speaker_kind, TransformKind env_kind);

  /// Throws ConfigError (beta outside [0,1], LFA with a HUB factor).
  void validate() const;
  bool uses_speaker() const noexcept;
  bool uses_environment() const noexcept;
  bool uses_joint() const noexcept { return type == ModeType::kJointSingle; }
  std::string describe() const;
};

const char* mode_name(ModeType type);
ModeType parse_mode(const std::string& text);

/// Gaussian priors and variational initial deviations per transform kind.
/// Second parameters are standard deviations.
struct PriorSpec {
  double lhuc_mean = 0.0;
  double lhuc_sigma = 1.0;
  double hub_mean = 0.0;
  double hub_sigma = 0.001;
  double lhuc_initial_sigma = 0.1;
  double hub_initial_sigma = 0.001;

  void validate() const;
  ad::Tensor mean(TransformKind kind, std::size_t dim) const;
  ad::Tensor sigma(TransformKind kind, std::size_t dim) const;
  double initial_log_sigma(TransformKind kind) const;
};

/// The transforms one utterance uses under a mode.
struct TransformBinding {
  FactorTransform* speaker = nullptr;
  FactorTransform* environment = nullptr;
  FactorTransform* joint = nullptr;

  std::vector<FactorTransform*> used() const;
};

/// Looks up (never creates) the owners an utterance of (speaker, environment)
/// needs; throws StateError naming a missing owner.
TransformBinding bind(TransformSet& set, const AdaptationMode& mode, const std::string& speaker,
                      const std::string& environment);

/// Adds identity-initialised transforms for every owner the mode needs that is
/// not present yet.
void declare_transforms(TransformSet& set, const AdaptationMode& mode, const PriorSpec& prior,
                        const std::string& speaker, const std::string& environment);

/// Standard normal draws for variational transforms, keyed by parameter id.
using EpsilonTable = std::map<std::string, ad::Tensor>;

/// Draws are a function of (seed, owner, sample index) only, so a transform
/// sees the same draw regardless of which utterances share a batch.
ad::Tensor epsilon_for(const FactorTransform& t, std::uint64_t seed, std::size_t sample);

/// Applies a mode's transforms to the hidden sequence. Variational transforms
/// are sampled when an epsilon table is given, otherwise their mean is used.
class ModeTransform final : public asr::HiddenTransform {
 public:
  ModeTransform(AdaptationMode mode, TransformBinding binding, std::size_t layer, std::size_t dim,
                std::uint64_t sample_seed = 0, std::size_t sample_index = 0,
                bool sample = false);

  std::size_t layer() const override { return layer_; }
  std::size_t dim() const override { return dim_; }
  ad::Var apply(ad::Var hidden) const override;

 private:
  ad::Var vector_of(ad::Tape& tape, FactorTransform* t) const;

  AdaptationMode mode_;
  TransformBinding binding_;
  std::size_t layer_;
  std::size_t dim_;
  std::uint64_t sample_seed_;
  std::size_t sample_index_;
  bool sample_;
};

}  // namespace fsat::adapt
