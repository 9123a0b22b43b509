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
#include <filesystem>
#include <string>
#include <vector>

#include "fsat/frontend/waveform.hpp"

namespace fsat::noise {

struct NoiseProfile {
  std::string noise_id;
  frontend::Waveform wave;
  bool seen_in_training = true;
};

/// Identifiers of the built-in generators, in bank order.
const std::vector<std::string>& builtin_noise_ids();

/// Synthesises one built-in noise at unit RMS. Throws ConfigError for an
/// unknown id.
frontend::Waveform generate_noise(const std::string& noise_id, std::size_t samples,
                                  double sample_rate, std::uint64_t seed);

/// All built-in noises; `training_ids` marks which count as seen in training
/// (empty marks all).
std::vector<NoiseProfile> builtin_noise_bank(double sample_rate, double seconds,
                                             std::uint64_t seed,
                                             const std::vector<std::string>& training_ids = {});

/// Every *.wav in a directory, id = file stem, sorted by id.
std::vector<NoiseProfile> load_noise_dir(const std::filesystem::path& dir,
                                         const std::vector<std::string>& training_ids = {});

}  // namespace fsat::noise
