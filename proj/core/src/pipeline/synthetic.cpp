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

#include "fsat/pipeline/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::pipeline {

void SyntheticTaskSpec::validate() const {
  if (std::set<char>(alphabet.begin(), alphabet.end()).size() < 2) {
    throw ConfigError("synthetic: the alphabet needs at least two distinct symbols");
  }
  if (speakers == 0 || environments == 0 || utterances_per_cell == 0) {
    throw ConfigError("synthetic: speakers, environments and utterances_per_cell must be >= 1");
  }
  if (feature_dim < 2) throw ConfigError("synthetic: feature_dim must be at least 2");
  if (min_tokens == 0 || min_tokens > max_tokens) {
    throw ConfigError("synthetic: need 1 <= min_tokens <= max_tokens");
  }
  if (min_token_frames == 0 || min_token_frames > max_token_frames) {
    throw ConfigError("synthetic: need 1 <= min_token_frames <= max_token_frames");
  }
  if (min_noise < 0.0 || min_noise > max_noise) {
    throw ConfigError("synthetic: need 0 <= min_noise <= max_noise");
  }
  if (speaker_slope < 0.0 || speaker_ripple < 0.0 || env_scale < 0.0 || env_offset < 0.0 ||
      frame_jitter < 0.0) {
    throw ConfigError("synthetic: effect sizes must be non-negative");
  }
}

SyntheticTaskSpec SyntheticTaskSpec::from_config(const KeyValueConfig& kv, const std::string& p) {
  SyntheticTaskSpec s;
  s.speakers = kv.get_size(p + "speakers", s.speakers);
  s.environments = kv.get_size(p + "environments", s.environments);
  s.utterances_per_cell = kv.get_size(p + "utterances_per_cell", s.utterances_per_cell);
  s.speaker_offset = kv.get_size(p + "speaker_offset", s.speaker_offset);
  s.environment_offset = kv.get_size(p + "environment_offset", s.environment_offset);
  s.split = kv.get_string(p + "split", s.split);
  s.alphabet = kv.get_string(p + "alphabet", s.alphabet);
  s.feature_dim = kv.get_size(p + "feature_dim", s.feature_dim);
  s.min_tokens = kv.get_size(p + "min_tokens", s.min_tokens);
  s.max_tokens = kv.get_size(p + "max_tokens", s.max_tokens);
  s.min_token_frames = kv.get_size(p + "min_token_frames", s.min_token_frames);
  s.max_token_frames = kv.get_size(p + "max_token_frames", s.max_token_frames);
  s.edge_frames = kv.get_size(p + "edge_frames", s.edge_frames);
  s.frame_jitter = kv.get_double(p + "frame_jitter", s.frame_jitter);
  s.speaker_slope = kv.get_double(p + "speaker_slope", s.speaker_slope);
  s.speaker_ripple = kv.get_double(p + "speaker_ripple", s.speaker_ripple);
  s.env_scale = kv.get_double(p + "env_scale", s.env_scale);
  s.env_offset = kv.get_double(p + "env_offset", s.env_offset);
  s.min_noise = kv.get_double(p + "min_noise", s.min_noise);
  s.max_noise = kv.get_double(p + "max_noise", s.max_noise);
  s.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(s.seed)));
  s.validate();
  return s;
}

void SyntheticTaskSpec::to_config(KeyValueConfig& kv, const std::string& p) const {
  kv.set_size(p + "speakers", speakers);
  kv.set_size(p + "environments", environments);
  kv.set_size(p + "utterances_per_cell", utterances_per_cell);
  kv.set_size(p + "speaker_offset", speaker_offset);
  kv.set_size(p + "environment_offset", environment_offset);
  kv.set(p + "split", split);
  kv.set(p + "alphabet", alphabet);
  kv.set_size(p + "feature_dim", feature_dim);
  kv.set_size(p + "min_tokens", min_tokens);
  kv.set_size(p + "max_tokens", max_tokens);
  kv.set_size(p + "min_token_frames", min_token_frames);
  kv.set_size(p + "max_token_frames", max_token_frames);
  kv.set_size(p + "edge_frames", edge_frames);
  kv.set(p + "frame_jitter", frame_jitter);
  kv.set(p + "speaker_slope", speaker_slope);
  kv.set(p + "speaker_ripple", speaker_ripple);
  kv.set(p + "env_scale", env_scale);
  kv.set(p + "env_offset", env_offset);
  kv.set(p + "min_noise", min_noise);
  kv.set(p + "max_noise", max_noise);
  kv.set(p + "seed", static_cast<long long>(seed));
}

std::string synthetic_speaker_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02zu", index);
  return buf;
}

std::string synthetic_env_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "env%02zu", index);
  return buf;
}

namespace {

ad::Tensor speaker_tilt(const SyntheticTaskSpec& s, std::size_t index) {
  std::mt19937_64 rng(derive_seed(s.seed, "speaker", index));
  std::uniform_real_distribution<double> slope(-s.speaker_slope, s.speaker_slope);
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = slope(rng);
  const double F = static_cast<double>(s.feature_dim);
  ad::Tensor t(ad::Shape{s.feature_dim});
  for (std::size_t f = 0; f < s.feature_dim; ++f) {
    const double x = F > 1 ? 2.0 * static_cast<double>(f) / (F - 1.0) - 1.0 : 0.0;
    t[f] = std::exp(a * x + s.speaker_ripple * n(rng));
  }
  return t;
}

ad::Tensor env_pattern(const SyntheticTaskSpec& s, std::size_t index, double* noise) {
  std::mt19937_64 rng(derive_seed(s.seed, "environment", index));
  std::uniform_real_distribution<double> offset(0.0, s.env_offset);
  std::uniform_real_distribution<double> level(s.min_noise, s.max_noise);
  std::normal_distribution<double> n(0.0, 1.0);
  const double o = offset(rng);
  *noise = level(rng);
  std::vector<double> raw(s.feature_dim + 2);
  for (double& v : raw) v = n(rng);
  ad::Tensor p(ad::Shape{s.feature_dim});
  for (std::size_t f = 0; f < s.feature_dim; ++f) {
    const double smooth = (raw[f] + 2.0 * raw[f + 1] + raw[f + 2]) / std::sqrt(6.0);
    p[f] = s.env_scale * (o + smooth);
  }
  return p;
}

std::vector<ad::Tensor> prototypes(const SyntheticTaskSpec& s) {
  std::mt19937_64 rng(derive_seed(s.seed, "prototype"));
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ad::Tensor> out;
  for (std::size_t k = 0; k < s.alphabet.size(); ++k) {
    ad::Tensor p(ad::Shape{s.feature_dim});
    for (double& v : p.values()) v = n(rng);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticTaskSpec& s) {
  s.validate();
  const std::size_t F = s.feature_dim;
  SyntheticCorpus out;
  SyntheticTruth& truth = out.truth;
  for (std::size_t i = 0; i < s.speakers; ++i) {
    truth.speaker_ids.push_back(synthetic_speaker_id(s.speaker_offset + i));
    truth.tilts.push_back(speaker_tilt(s, s.speaker_offset + i));
  }
  for (std::size_t j = 0; j < s.environments; ++j) {
    double noise = 0.0;
    truth.env_ids.push_back(synthetic_env_id(s.environment_offset + j));
    truth.patterns.push_back(env_pattern(s, s.environment_offset + j, &noise));
    truth.noise_levels.push_back(noise);
  }
  const std::vector<ad::Tensor> protos = prototypes(s);

  for (std::size_t i = 0; i < s.speakers; ++i) {
    for (std::size_t j = 0; j < s.environments; ++j) {
      for (std::size_t u = 0; u < s.utterances_per_cell; ++u) {
        const std::uint64_t cell = ((s.speaker_offset + i) * 1000003ULL + s.environment_offset + j);
        // Text depends on the speaker only, so utterance u of one speaker says
        // the same thing in every environment.
        std::mt19937_64 text_rng(
            derive_seed(derive_seed(s.seed, s.split, s.speaker_offset + i), "text", u));
        std::mt19937_64 noise_rng(derive_seed(derive_seed(s.seed, s.split, cell), "noise", u));
        std::uniform_int_distribution<std::size_t> length(s.min_tokens, s.max_tokens);
        std::uniform_int_distribution<std::size_t> symbol(0, s.alphabet.size() - 1);
        std::uniform_int_distribution<std::size_t> dur(s.min_token_frames, s.max_token_frames);
        std::normal_distribution<double> n(0.0, 1.0);

        std::string text;
        std::vector<std::size_t> durations;
        const std::size_t L = length(text_rng);
        for (std::size_t k = 0; k < L; ++k) {
          text.push_back(s.alphabet[symbol(text_rng)]);
          durations.push_back(dur(text_rng));
        }
        std::size_t T = 2 * s.edge_frames;
        for (std::size_t d : durations) T += d;

        ad::Tensor frames(ad::Shape{T, F});
        std::size_t t = 0;
        auto emit = [&](const ad::Tensor* proto) {
          for (std::size_t f = 0; f < F; ++f) {
            double base = 0.0;
            if (proto) base = (*proto)[f] + s.frame_jitter * n(noise_rng);
            frames.at(t, f) = base * truth.tilts[i][f] + truth.patterns[j][f] +
                              truth.noise_levels[j] * n(noise_rng);
          }
          ++t;
        };
        for (std::size_t e = 0; e < s.edge_frames; ++e) emit(nullptr);
        for (std::size_t k = 0; k < L; ++k) {
          const ad::Tensor& proto = protos[s.alphabet.find(text[k])];
          for (std::size_t d = 0; d < durations[k]; ++d) emit(&proto);
        }
        for (std::size_t e = 0; e < s.edge_frames; ++e) emit(nullptr);

        frontend::FeatureSequence seq;
        seq.speaker_id = truth.speaker_ids[i];
        seq.env_id = truth.env_ids[j];
        char id[96];
        std::snprintf(id, sizeof(id), "%s-%s-%s-%03zu", s.split.c_str(), seq.speaker_id.c_str(),
                      seq.env_id.c_str(), u);
        seq.utterance_id = id;
        seq.frames = std::move(frames);
        seq.transcript = text;
        out.utterances.push_back(std::move(seq));
      }
    }
  }
  return out;
}

}  // namespace fsat::pipeline
