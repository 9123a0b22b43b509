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

#include "fsat/frontend/logmel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include <unsupported/Eigen/FFT>

#include "fsat/error.hpp"

namespace fsat::frontend {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t mel_bins, std::size_t fft_size, double sample_rate,
                             double low_hz, double high_hz)
    : bins_(mel_bins) {
  if (mel_bins == 0) throw ConfigError("mel filterbank: need at least one bin");
  if (!(low_hz >= 0.0 && high_hz > low_hz && high_hz <= sample_rate / 2.0)) {
    throw ConfigError("mel filterbank: band edges must satisfy 0 <= low < high <= nyquist");
  }
  const double lo = hz_to_mel(low_hz), hi = hz_to_mel(high_hz);
  edges_hz_.resize(mel_bins + 2);
  for (std::size_t i = 0; i < edges_hz_.size(); ++i) {
    edges_hz_[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(mel_bins + 1));
  }
  const std::size_t nfreq = fft_size / 2 + 1;
  weights_ = ad::Tensor(ad::Shape{mel_bins, nfreq});
  for (std::size_t k = 0; k < mel_bins; ++k) {
    const double l = edges_hz_[k], c = edges_hz_[k + 1], r = edges_hz_[k + 2];
    for (std::size_t j = 0; j < nfreq; ++j) {
      const double f = static_cast<double>(j) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > l && f <= c) w = (f - l) / (c - l);
      else if (f > c && f < r) w = (r - f) / (r - c);
      weights_.at(k, j) = w;
    }
  }
}

std::size_t frame_count(std::size_t samples, std::size_t frame_length, std::size_t frame_shift) {
  if (samples < frame_length) return 0;
  return 1 + (samples - frame_length) / frame_shift;
}

ad::Tensor extract_logmel(const Waveform& wave, const LogMelConfig& config) {
  wave.validate();
  const auto frame_len =
      static_cast<std::size_t>(std::lround(config.frame_length_ms * wave.sample_rate / 1000.0));
  const auto shift =
      static_cast<std::size_t>(std::lround(config.frame_shift_ms * wave.sample_rate / 1000.0));
  if (shift == 0 || frame_len < shift) {
    throw ConfigError("logmel: frame length must be at least the (non-zero) frame shift");
  }
  std::size_t N = config.fft_size;
  if (N == 0) N = std::bit_ceil(frame_len);
  if (N < frame_len || (N & (N - 1)) != 0) {
    throw ConfigError("logmel: fft size must be a power of two no smaller than " +
                      std::to_string(frame_len) + " samples");
  }
  if (!(config.floor > 0.0)) throw ConfigError("logmel: floor must be positive");
  const std::size_t T = frame_count(wave.samples.size(), frame_len, shift);
  if (T == 0) {
    throw DomainError("logmel: waveform of " + std::to_string(wave.samples.size()) +
                      " samples is shorter than one frame of " + std::to_string(frame_len));
  }
  const double high = config.high_hz > 0.0 ? config.high_hz : wave.sample_rate / 2.0;
  const MelFilterbank fb(config.mel_bins, N, wave.sample_rate, config.low_hz, high);

  std::vector<double> window(frame_len);
  for (std::size_t i = 0; i < frame_len; ++i) {
    window[i] = frame_len == 1 ? 1.0
                               : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                         static_cast<double>(frame_len - 1));
  }
  Eigen::FFT<double> fft;
  std::vector<double> buf(N);
  std::vector<std::complex<double>> spec;
  std::vector<double> power(N / 2 + 1);
  ad::Tensor out(ad::Shape{T, config.mel_bins});
  const ad::Tensor& W = fb.weights();
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < frame_len; ++i) buf[i] = wave.samples[t * shift + i] * window[i];
    fft.fwd(spec, buf);
    for (std::size_t j = 0; j <= N / 2; ++j) power[j] = std::norm(spec[j]);
    for (std::size_t k = 0; k < config.mel_bins; ++k) {
      double e = 0.0;
      for (std::size_t j = 0; j <= N / 2; ++j) e += W.at(k, j) * power[j];
      out.at(t, k) = std::log(std::max(e, config.floor));
    }
  }
  return out;
}

ad::Tensor spec_augment_mask(const ad::Tensor& frames, const SpecAugmentConfig& config,
                             std::uint64_t seed) {
  if (frames.rank() != 2) throw ShapeError("spec_augment: expected a T x F matrix");
  ad::Tensor out = frames;
  if (config.time_masks + config.freq_masks == 0) return out;
  const std::size_t T = frames.rows(), F = frames.cols();
  double mean = 0.0;
  for (double v : frames.values()) mean += v;
  mean /= static_cast<double>(frames.numel());
  std::mt19937_64 rng(seed);
  auto start_of = [&](std::size_t dim, std::size_t width) {
    std::uniform_int_distribution<std::size_t> u(0, dim - width);
    return u(rng);
  };
  const std::size_t tw = std::min(config.time_width, T);
  for (std::size_t m = 0; m < config.time_masks && tw > 0; ++m) {
    const std::size_t s = start_of(T, tw);
    for (std::size_t t = s; t < s + tw; ++t)
      for (std::size_t f = 0; f < F; ++f) out.at(t, f) = mean;
  }
  const std::size_t fw = std::min(config.freq_width, F);
  for (std::size_t m = 0; m < config.freq_masks && fw > 0; ++m) {
    const std::size_t s = start_of(F, fw);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = s; f < s + fw; ++f) out.at(t, f) = mean;
  }
  return out;
}

}  // namespace fsat::frontend
