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
#include <vector>

#include "fsat/autodiff/tensor.hpp"
#include "fsat/frontend/waveform.hpp"

namespace fsat::frontend {

struct LogMelConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  std::size_t mel_bins = 40;
  /// Power of two, at least the frame length in samples. 0 picks the
  /// smallest such size.
  std::size_t fft_size = 0;
  double low_hz = 0.0;
  /// 0 means the Nyquist frequency.
  double high_hz = 0.0;
  double floor = 1e-10;
};

/// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters over the one-sided power spectrum: mel_bins x (fft/2+1).
/// Filter k peaks at mel_center_hz(k) with unit height.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t mel_bins, std::size_t fft_size, double sample_rate, double low_hz,
                double high_hz);

  double center_hz(std::size_t bin) const { return edges_hz_[bin + 1]; }
  std::size_t bins() const noexcept { return bins_; }
  const ad::Tensor& weights() const noexcept { return weights_; }

 private:
  std::size_t bins_;
  std::vector<double> edges_hz_;
  ad::Tensor weights_;
};

std::size_t frame_count(std::size_t samples, std::size_t frame_length, std::size_t frame_shift);

/// T x mel_bins log-mel energies with a Hamming window and |X|^2 spectrum,
/// T = 1 + floor((len - frame_len) / frame_shift). Throws DomainError when the
/// waveform is shorter than one frame.
ad::Tensor extract_logmel(const Waveform& wave, const LogMelConfig& config);

struct SpecAugmentConfig {
  std::size_t time_masks = 2;
  std::size_t time_width = 5;
  std::size_t freq_masks = 2;
  std::size_t freq_width = 4;
};

/// Fills `time_masks` bands of `time_width` frames and `freq_masks` bands of
/// `freq_width` bins with the utterance mean. Widths larger than the axis are
/// clamped to it; band starts are uniform under the seed.
ad::Tensor spec_augment_mask(const ad::Tensor& frames, const SpecAugmentConfig& config,
                             std::uint64_t seed);

}  // namespace fsat::frontend
