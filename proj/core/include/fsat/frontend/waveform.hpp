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

#include <filesystem>
#include <vector>

namespace fsat::frontend {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 8000.0;

  /// Throws DomainError unless sample_rate > 0 and samples is non-empty.
  void validate() const;
  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Reads mono RIFF/WAVE: 16-bit PCM (scaled to [-1, 1)) or 32-bit float.
Waveform read_wav(const std::filesystem::path& path);
/// Writes mono 32-bit float RIFF/WAVE so that mixes keep their exact SNR.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

}  // namespace fsat::frontend
