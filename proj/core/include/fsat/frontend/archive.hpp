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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsat/autodiff/tensor.hpp"

namespace fsat::frontend {

struct FeatureSequence {
  std::string utterance_id;
  std::string speaker_id;
  std::string env_id;
  ad::Tensor frames;  // T x F
  std::optional<std::string> transcript;
};

/// Binary container, little-endian:
///   "FSATFEAT" | u32 version | u32 count |
///   count x { str utt | str speaker | str env | u8 has_text [str text] |
///             u64 T | u64 F | f64 values[T*F] }
/// where str is u32 length followed by bytes.
inline constexpr std::uint32_t kFeatureArchiveVersion = 1;

void write_feature_archive(const std::filesystem::path& path,
                           std::span<const FeatureSequence> records);
std::vector<FeatureSequence> read_feature_archive(const std::filesystem::path& path);

/// Corruption bookkeeping carried by simulated manifests.
struct NoiseCondition {
  std::string noise_id;
  double snr_db = 0.0;
  bool seen = false;
};

/// One manifest line: utt_id, speaker_id, env_id, path, transcript
/// [, noise_id, snr_db, seen_flag], tab separated. `path` names the feature
/// archive holding the utterance (or a waveform for clean audio input).
struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string env_id;
  std::string path;
  std::string transcript;
  std::optional<NoiseCondition> condition;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

/// Resolves every entry against its archive (relative paths are taken from
/// the manifest's directory). Throws FormatError naming a missing utterance.
std::vector<FeatureSequence> load_features(std::span<const ManifestEntry> entries,
                                           const std::filesystem::path& manifest_dir);

}  // namespace fsat::frontend
