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

#include "fsat/pipeline/test_time.hpp"

#include <random>

#include "fsat/adapt/mode.hpp"
#include "fsat/error.hpp"
#include "fsat/pipeline/training.hpp"
#include "fsat/seed.hpp"

namespace fsat::pipeline {

TestTimeResult test_time_adapt(const asr::ConformerModel& model, const AdaptationDataset& data,
                               const TestTimeOptions& o) {
  if (o.passes != 1 && o.passes != 2) throw ConfigError("test_time_adapt: passes must be 1 or 2");
  if (data.empty()) throw DomainError("test_time_adapt: empty test set");
  TestTimeResult out{{}, {}, declare_for_dataset(model, data, o.estimation), {}};
  out.first_pass = decode_dataset(model, data, nullptr, o.estimation.mode, o.decode);
  if (o.passes == 1) {
    out.adapted = out.first_pass;
    return out;
  }
  const auto targets = o.supervision == Supervision::kPseudo ? hypothesis_tokens(out.first_pass)
                                                             : transcript_tokens(model, data);
  out.estimation = estimate_transforms(model, data, targets, out.transforms, o.estimation);
  out.transforms.provenance.corpus = "test-time";
  adapt::TransformSet means = out.transforms.posterior_mean();
  out.adapted = decode_dataset(model, data, &means, o.estimation.mode, o.decode);
  return out;
}

const char* pairing_name(Pairing p) {
  switch (p) {
    case Pairing::kMatched: return "matched";
    case Pairing::kMismatchedEnv: return "mm-env";
    case Pairing::kMismatchedSpeaker: return "mm-spk";
    case Pairing::kBothMismatched: return "mm-both";
  }
  return "?";
}

Pairing parse_pairing(const std::string& text) {
  if (text == "matched") return Pairing::kMatched;
  if (text == "mm-env") return Pairing::kMismatchedEnv;
  if (text == "mm-spk") return Pairing::kMismatchedSpeaker;
  if (text == "mm-both") return Pairing::kBothMismatched;
  throw ConfigError("unknown pairing '" + text + "' (matched, mm-env, mm-spk, mm-both)");
}

namespace {

std::string pick_other(const std::vector<std::string>& owners, const std::string& own,
                       std::mt19937_64& rng, const char* what) {
  std::vector<std::string> others;
  for (const auto& o : owners) {
    if (o != own) others.push_back(o);
  }
  if (others.empty()) {
    throw StateError(std::string("rapid_adapt: the cache holds no ") + what + " transform other than '" +
                     own + "'");
  }
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  return others[pick(rng)];
}

}  // namespace

RapidResult rapid_adapt_from_cache(const asr::ConformerModel& model,
                                   const adapt::TransformSet& cache, const AdaptationDataset& data,
                                   const adapt::AdaptationMode& mode, Pairing pairing,
                                   const asr::DecodeOptions& options, std::uint64_t seed) {
  mode.validate();
  if (mode.uses_joint() && pairing != Pairing::kMatched) {
    throw ConfigError("rapid_adapt: mismatched pairings need a factorised or single-factor mode");
  }
  adapt::TransformSet means = cache.posterior_mean();
  const auto speakers = means.owners(adapt::OwnerType::kSpeaker);
  const auto envs = means.owners(adapt::OwnerType::kEnvironment);
  const bool swap_spk = pairing == Pairing::kMismatchedSpeaker || pairing == Pairing::kBothMismatched;
  const bool swap_env = pairing == Pairing::kMismatchedEnv || pairing == Pairing::kBothMismatched;

  RapidResult out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& u = data[i];
    std::mt19937_64 rng(derive_seed(seed, "pairing", i));
    std::string spk = u.speaker_id, env = u.env_id;
    if (swap_spk && mode.uses_speaker()) spk = pick_other(speakers, u.speaker_id, rng, "speaker");
    if (swap_env && mode.uses_environment()) env = pick_other(envs, u.env_id, rng, "environment");
    adapt::ModeTransform transform(mode, adapt::bind(means, mode, spk, env), means.layer(),
                                   means.dim());
    out.hypotheses.push_back(asr::decode(model, u.frames, &transform, options));
    out.speaker_owner.push_back(mode.uses_speaker() || mode.uses_joint() ? spk : "");
    out.env_owner.push_back(mode.uses_environment() ? env : "");
  }
  return out;
}

}  // namespace fsat::pipeline
