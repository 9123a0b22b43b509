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

#include "fsat/noise/mixer.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::noise {
namespace {

void check_inputs(std::span<const frontend::ManifestEntry> clean,
                  std::span<const NoiseProfile> noises, std::span<const double> snrs) {
  if (clean.empty()) throw DomainError("corpus simulation: empty clean manifest");
  if (noises.empty()) throw DomainError("corpus simulation: empty noise set");
  if (snrs.empty()) throw DomainError("corpus simulation: empty SNR set");
  for (const NoiseProfile& n : noises) n.wave.validate();
}

CorruptionPlanEntry plan_entry(const frontend::ManifestEntry& clean, const NoiseProfile& noise,
                               double snr, std::size_t offset, std::uint64_t seed,
                               const ConditionSet& training) {
  CorruptionPlanEntry e;
  e.clean = clean;
  e.spec = {clean.utterance_id, noise.noise_id, snr, offset, seed};
  e.seen = training.contains(noise.noise_id, snr);
  return e;
}

}  // namespace

double signal_power(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("signal_power: empty signal");
  double p = 0.0;
  for (double v : samples) p += v * v;
  return p / static_cast<double>(samples.size());
}

std::string condition_env_id(const std::string& noise_id, double snr_db) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", snr_db);
  return noise_id + "@" + buf;
}

ConditionSet ConditionSet::cross(const std::vector<std::string>& noise_ids,
                                 std::span<const double> snrs) {
  ConditionSet c;
  for (const std::string& n : noise_ids)
    for (double s : snrs) c.add(n, s);
  return c;
}

std::vector<double> noise_segment(const frontend::Waveform& noise, std::size_t offset,
                                  std::size_t length, bool* wrapped) {
  const std::size_t n = noise.samples.size();
  if (n == 0) throw DomainError("noise_segment: empty noise");
  std::vector<double> seg(length);
  for (std::size_t i = 0; i < length; ++i) seg[i] = noise.samples[(offset + i) % n];
  if (wrapped) *wrapped = offset % n + length > n;
  return seg;
}

CorruptedUtterance mix_at_snr(const frontend::Waveform& clean, const NoiseProfile& noise,
                              const MixSpec& spec, const ConditionSet& training) {
  clean.validate();
  noise.wave.validate();
  if (clean.sample_rate != noise.wave.sample_rate) {
    throw DomainError("mix_at_snr: clean and noise sample rates differ");
  }
  if (!std::isfinite(spec.snr_db)) throw DomainError("mix_at_snr: SNR must be finite");
  CorruptedUtterance out;
  out.spec = spec;
  const std::vector<double> seg =
      noise_segment(noise.wave, spec.noise_offset, clean.samples.size(), &out.wrapped);
  const double pc = signal_power(clean.samples);
  const double pn = signal_power(seg);
  if (!(pc > 0.0)) throw DomainError("mix_at_snr: clean signal " + spec.utterance_id + " has zero power");
  if (!(pn > 0.0)) throw DomainError("mix_at_snr: noise segment of " + noise.noise_id + " has zero power");
  out.gain = std::sqrt(pc / (pn * std::pow(10.0, spec.snr_db / 10.0)));
  out.mixed.sample_rate = clean.sample_rate;
  out.mixed.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < seg.size(); ++i) out.mixed.samples[i] = clean.samples[i] + out.gain * seg[i];
  out.env_id = condition_env_id(noise.noise_id, spec.snr_db);
  out.seen = training.contains(noise.noise_id, spec.snr_db);
  return out;
}

double remeasure_snr_db(const frontend::Waveform& clean, const NoiseProfile& noise,
                        const CorruptedUtterance& mix) {
  std::vector<double> seg =
      noise_segment(noise.wave, mix.spec.noise_offset, clean.samples.size(), nullptr);
  for (double& v : seg) v *= mix.gain;
  return 10.0 * std::log10(signal_power(clean.samples) / signal_power(seg));
}

std::vector<CorruptionPlanEntry> build_nonaugmented_corpus(
    std::span<const frontend::ManifestEntry> clean, std::span<const NoiseProfile> noises,
    std::span<const double> snrs, const ConditionSet& training, std::uint64_t seed) {
  check_inputs(clean, noises, snrs);
  std::vector<CorruptionPlanEntry> plan;
  plan.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, "nonaug", i));
    std::uniform_int_distribution<std::size_t> pick_noise(0, noises.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_snr(0, snrs.size() - 1);
    const NoiseProfile& n = noises[pick_noise(rng)];
    const double snr = snrs[pick_snr(rng)];
    std::uniform_int_distribution<std::size_t> pick_offset(0, n.wave.samples.size() - 1);
    plan.push_back(plan_entry(clean[i], n, snr, pick_offset(rng), derive_seed(seed, "mix", i), training));
  }
  return plan;
}

std::vector<CorruptionPlanEntry> build_augmented_corpus(
    std::span<const frontend::ManifestEntry> clean, std::span<const NoiseProfile> noises,
    std::span<const double> snrs, const ConditionSet& training, std::uint64_t seed) {
  check_inputs(clean, noises, snrs);
  std::vector<CorruptionPlanEntry> plan;
  plan.reserve(clean.size() * noises.size() * snrs.size());
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    for (const NoiseProfile& n : noises) {
      for (double snr : snrs) {
        std::mt19937_64 rng(derive_seed(seed, "aug", k));
        std::uniform_int_distribution<std::size_t> pick_offset(0, n.wave.samples.size() - 1);
        plan.push_back(plan_entry(clean[i], n, snr, pick_offset(rng), derive_seed(seed, "mix", k), training));
        ++k;
      }
    }
  }
  return plan;
}

std::string corrupted_utterance_id(const std::string& clean_id, const std::string& env_id) {
  return clean_id + "#" + env_id;
}

}  // namespace fsat::noise
