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
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsat/frontend/archive.hpp"
#include "fsat/frontend/waveform.hpp"
#include "fsat/noise/noise_bank.hpp"

namespace fsat::noise {

/// Mean of squared amplitudes; throws DomainError on an empty signal.
double signal_power(std::span<const double> samples);

struct MixSpec {
  std::string utterance_id;
  std::string noise_id;
  double snr_db = 0.0;
  std::size_t noise_offset = 0;
  std::uint64_t seed = 0;
};

/// Environment identifier of a (noise, snr) condition, e.g. "pink@-5".
std::string condition_env_id(const std::string& noise_id, double snr_db);

/// (noise_id, snr_db) pairs seen in training.
class ConditionSet {
 public:
  static ConditionSet cross(const std::vector<std::string>& noise_ids, std::span<const double> snrs);
  void add(const std::string& noise_id, double snr_db) { conditions_.emplace(noise_id, snr_db); }
  bool contains(const std::string& noise_id, double snr_db) const {
    return conditions_.count({noise_id, snr_db}) != 0;
  }
  std::size_t size() const noexcept { return conditions_.size(); }

 private:
  std::set<std::pair<std::string, double>> conditions_;
};

struct CorruptedUtterance {
  frontend::Waveform mixed;
  std::string env_id;
  MixSpec spec;
  bool seen = false;
  bool wrapped = false;
  double gain = 0.0;
};

/// Noise samples [offset, offset + length) read cyclically; `wrapped` reports
/// whether the read passed the end of the noise.
std::vector<double> noise_segment(const frontend::Waveform& noise, std::size_t offset,
                                  std::size_t length, bool* wrapped);

/// g = sqrt(P_clean / (P_noise 10^(snr/10))); output = clean + g * segment,
/// powers measured over the whole utterance. Throws DomainError when either
/// power is zero or the sample rates differ.
CorruptedUtterance mix_at_snr(const frontend::Waveform& clean, const NoiseProfile& noise,
                              const MixSpec& spec, const ConditionSet& training);

/// 10 log10(P_clean / P(g * segment)) recomputed from a mix's provenance.
double remeasure_snr_db(const frontend::Waveform& clean, const NoiseProfile& noise,
                        const CorruptedUtterance& mix);

struct CorruptionPlanEntry {
  frontend::ManifestEntry clean;
  MixSpec spec;
  bool seen = false;
};

/// One uniformly drawn (noise, snr) condition and offset per utterance.
std::vector<CorruptionPlanEntry> build_nonaugmented_corpus(
    std::span<const frontend::ManifestEntry> clean, std::span<const NoiseProfile> noises,
    std::span<const double> snrs, const ConditionSet& training, std::uint64_t seed);

/// Every utterance under every (noise, snr) condition.
std::vector<CorruptionPlanEntry> build_augmented_corpus(
    std::span<const frontend::ManifestEntry> clean, std::span<const NoiseProfile> noises,
    std::span<const double> snrs, const ConditionSet& training, std::uint64_t seed = 0);

/// Utterance id of a corrupted copy: "<clean id>#<env id>".
std::string corrupted_utterance_id(const std::string& clean_id, const std::string& env_id);

}  // namespace fsat::noise
