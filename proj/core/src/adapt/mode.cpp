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

#include "fsat/adapt/mode.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::adapt {

AdaptationMode AdaptationMode::speaker_only(TransformKind kind) {
  AdaptationMode m;
  m.type = ModeType::kSpeakerOnly;
  m.speaker_kind = kind;
  return m;
}

AdaptationMode AdaptationMode::env_only(TransformKind kind) {
  AdaptationMode m;
  m.type = ModeType::kEnvOnly;
  m.env_kind = kind;
  return m;
}

AdaptationMode AdaptationMode::joint_single(TransformKind kind) {
  AdaptationMode m;
  m.type = ModeType::kJointSingle;
  m.speaker_kind = kind;
  return m;
}

AdaptationMode AdaptationMode::lfa(double beta) {
  AdaptationMode m;
  m.type = ModeType::kLfa;
  m.speaker_kind = TransformKind::kLhuc;
  m.env_kind = TransformKind::kLhuc;
  m.beta = beta;
  return m;
}

AdaptationMode AdaptationMode::cfa(TransformKind speaker_kind, TransformKind env_kind) {
  AdaptationMode m;
  m.type = ModeType::kCfa;
  m.speaker_kind = speaker_kind;
  m.env_kind = env_kind;
  return m;
}

void AdaptationMode::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("adaptation mode: beta must lie in [0,1], got " + std::to_string(beta));
  }
  if (type == ModeType::kLfa &&
      (speaker_kind != TransformKind::kLhuc || env_kind != TransformKind::kLhuc)) {
    throw ConfigError("adaptation mode: lfa combines lhuc factors only");
  }
}

bool AdaptationMode::uses_speaker() const noexcept {
  return type == ModeType::kSpeakerOnly || type == ModeType::kLfa || type == ModeType::kCfa;
}

bool AdaptationMode::uses_environment() const noexcept {
  return type == ModeType::kEnvOnly || type == ModeType::kLfa || type == ModeType::kCfa;
}

std::string AdaptationMode::describe() const {
  switch (type) {
    case ModeType::kSpeakerOnly: return std::string("speaker-") + kind_name(speaker_kind);
    case ModeType::kEnvOnly: return std::string("env-") + kind_name(env_kind);
    case ModeType::kJointSingle: return std::string("joint-") + kind_name(speaker_kind);
    case ModeType::kLfa: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "lfa-%.2f", beta);
      return buf;
    }
    case ModeType::kCfa:
      return std::string("cfa-") + kind_name(speaker_kind) + "-" + kind_name(env_kind);
  }
  return "?";
}

const char* mode_name(ModeType type) {
  switch (type) {
    case ModeType::kSpeakerOnly: return "speaker";
    case ModeType::kEnvOnly: return "env";
    case ModeType::kJointSingle: return "joint";
    case ModeType::kLfa: return "lfa";
    case ModeType::kCfa: return "cfa";
  }
  return "?";
}

ModeType parse_mode(const std::string& text) {
  if (text == "speaker") return ModeType::kSpeakerOnly;
  if (text == "env") return ModeType::kEnvOnly;
  if (text == "joint") return ModeType::kJointSingle;
  if (text == "lfa") return ModeType::kLfa;
  if (text == "cfa") return ModeType::kCfa;
  throw ConfigError("unknown adaptation mode '" + text + "' (speaker, env, joint, lfa, cfa)");
}

void PriorSpec::validate() const {
  if (!(lhuc_sigma > 0.0 && hub_sigma > 0.0 && lhuc_initial_sigma > 0.0 &&
        hub_initial_sigma > 0.0)) {
    throw ConfigError("prior: deviations must be strictly positive");
  }
}

ad::Tensor PriorSpec::mean(TransformKind kind, std::size_t dim) const {
  return ad::Tensor(ad::Shape{dim}, kind == TransformKind::kLhuc ? lhuc_mean : hub_mean);
}

ad::Tensor PriorSpec::sigma(TransformKind kind, std::size_t dim) const {
  return ad::Tensor(ad::Shape{dim}, kind == TransformKind::kLhuc ? lhuc_sigma : hub_sigma);
}

double PriorSpec::initial_log_sigma(TransformKind kind) const {
  return std::log(kind == TransformKind::kLhuc ? lhuc_initial_sigma : hub_initial_sigma);
}

std::vector<FactorTransform*> TransformBinding::used() const {
  std::vector<FactorTransform*> out;
  for (FactorTransform* t : {speaker, environment, joint}) {
    if (t) out.push_back(t);
  }
  return out;
}

TransformBinding bind(TransformSet& set, const AdaptationMode& mode, const std::string& speaker,
                      const std::string& environment) {
  TransformBinding b;
  if (mode.uses_speaker()) b.speaker = &set.get(OwnerType::kSpeaker, speaker);
  if (mode.uses_environment()) b.environment = &set.get(OwnerType::kEnvironment, environment);
  if (mode.uses_joint()) b.joint = &set.get(OwnerType::kJoint, joint_owner_id(speaker, environment));
  return b;
}

void declare_transforms(TransformSet& set, const AdaptationMode& mode, const PriorSpec& prior,
                        const std::string& speaker, const std::string& environment) {
  auto ensure = [&](OwnerType type, const std::string& id, TransformKind kind) {
    if (!set.contains(type, id)) set.add(type, id, kind, prior.initial_log_sigma(kind));
  };
  if (mode.uses_speaker()) ensure(OwnerType::kSpeaker, speaker, mode.speaker_kind);
  if (mode.uses_environment()) ensure(OwnerType::kEnvironment, environment, mode.env_kind);
  if (mode.uses_joint()) {
    ensure(OwnerType::kJoint, joint_owner_id(speaker, environment), mode.speaker_kind);
  }
}

ad::Tensor epsilon_for(const FactorTransform& t, std::uint64_t seed, std::size_t sample) {
  std::mt19937_64 rng(derive_seed(seed, t.mean().id, sample));
  std::normal_distribution<double> n(0.0, 1.0);
  ad::Tensor eps(ad::Shape{t.dim()});
  for (double& v : eps.values()) v = n(rng);
  return eps;
}

ModeTransform::ModeTransform(AdaptationMode mode, TransformBinding binding, std::size_t layer,
                             std::size_t dim, std::uint64_t sample_seed, std::size_t sample_index,
                             bool sample)
    : mode_(mode),
      binding_(binding),
      layer_(layer),
      dim_(dim),
      sample_seed_(sample_seed),
      sample_index_(sample_index),
      sample_(sample) {
  mode_.validate();
  auto check_kind = [&](FactorTransform* t, TransformKind expected) {
    if (t && t->kind() != expected) {
      throw ConfigError("transform for " + t->owner_id() + " is " + kind_name(t->kind()) +
                        " but mode " + mode_.describe() + " expects " + kind_name(expected));
    }
  };
  check_kind(binding_.speaker, mode_.speaker_kind);
  check_kind(binding_.environment, mode_.env_kind);
  check_kind(binding_.joint, mode_.speaker_kind);
  for (FactorTransform* t : binding_.used()) {
    if (t->dim() != dim_) {
      throw ShapeError("transform for " + t->owner_id() + " has dim " + std::to_string(t->dim()) +
                       ", expected " + std::to_string(dim_));
    }
  }
}

ad::Var ModeTransform::vector_of(ad::Tape& tape, FactorTransform* t) const {
  if (!t) throw StateError("adaptation mode " + mode_.describe() + " is missing a transform");
  ad::Var mu = tape.param(t->mean());
  if (!sample_ || !t->variational()) return mu;
  return sample_transform(mu, tape.param(t->log_sigma()),
                          epsilon_for(*t, sample_seed_, sample_index_));
}

ad::Var ModeTransform::apply(ad::Var h) const {
  ad::Tape& tape = h.tape();
  switch (mode_.type) {
    case ModeType::kSpeakerOnly:
      return apply_kind(mode_.speaker_kind, h, vector_of(tape, binding_.speaker));
    case ModeType::kEnvOnly:
      return apply_kind(mode_.env_kind, h, vector_of(tape, binding_.environment));
    case ModeType::kJointSingle:
      return apply_kind(mode_.speaker_kind, h, vector_of(tape, binding_.joint));
    case ModeType::kLfa:
      return lfa_apply(h, vector_of(tape, binding_.speaker), vector_of(tape, binding_.environment),
                       mode_.beta);
    case ModeType::kCfa:
      return cfa_apply(h, vector_of(tape, binding_.speaker), mode_.speaker_kind,
                       vector_of(tape, binding_.environment), mode_.env_kind);
  }
  return h;
}

}  // namespace fsat::adapt
