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

#include "fsat/noise/noise_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::noise {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void normalise(std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p /= static_cast<double>(x.size());
  if (!(p > 0.0)) throw NumericError("noise generator produced a silent signal");
  const double g = 1.0 / std::sqrt(p);
  for (double& v : x) v *= g;
}

std::vector<double> white(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// Paul Kellet's economy pink filter.
std::vector<double> pink(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> w = white(n, rng), x(n);
  double b0 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    b0 = 0.99765 * b0 + w[i] * 0.0990460;
    b1 = 0.96300 * b1 + w[i] * 0.2965164;
    b2 = 0.57000 * b2 + w[i] * 1.0526913;
    x[i] = b0 + b1 + b2 + w[i] * 0.1848;
  }
  return x;
}

bool in_training(const std::string& id, const std::vector<std::string>& training) {
  return training.empty() || std::find(training.begin(), training.end(), id) != training.end();
}

}  // namespace

const std::vector<std::string>& builtin_noise_ids() {
  static const std::vector<std::string> ids{"white", "pink",  "brown",  "babble", "hum",
                                            "siren", "engine", "clicks", "amtone", "hiss"};
  return ids;
}

frontend::Waveform generate_noise(const std::string& id, std::size_t n, double sr,
                                  std::uint64_t seed) {
  if (n == 0) throw DomainError("generate_noise: zero length");
  std::mt19937_64 rng(derive_seed(seed, "noise/" + id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x;
  auto t = [sr](std::size_t i) { return static_cast<double>(i) / sr; };
  if (id == "white") {
    x = white(n, rng);
  } else if (id == "pink") {
    x = pink(n, rng);
  } else if (id == "brown") {
    std::vector<double> w = white(n, rng);
    x.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) x[i] = acc = 0.995 * acc + w[i];
  } else if (id == "babble") {
    x.assign(n, 0.0);
    for (int talker = 0; talker < 6; ++talker) {
      const std::vector<double> voice = pink(n, rng);
      const double rate = 3.0 + 3.0 * u(rng), phase = kTwoPi * u(rng);
      const double f0 = 100.0 + 120.0 * u(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double env = std::fabs(std::sin(kTwoPi * rate * t(i) + phase));
        x[i] += env * (voice[i] + 0.5 * std::sin(kTwoPi * f0 * t(i)));
      }
    }
  } else if (id == "hum") {
    const std::vector<double> floor = white(n, rng);
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::sin(kTwoPi * 50.0 * t(i)) + 0.5 * std::sin(kTwoPi * 100.0 * t(i)) +
             0.3 * std::sin(kTwoPi * 150.0 * t(i)) + 0.05 * floor[i];
    }
  } else if (id == "siren") {
    const std::vector<double> floor = white(n, rng);
    x.resize(n);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = 1000.0 + 400.0 * std::sin(kTwoPi * 0.8 * t(i));
      phase += kTwoPi * f / sr;
      x[i] = std::sin(phase) + 0.05 * floor[i];
    }
  } else if (id == "engine") {
    std::vector<double> w = white(n, rng);
    x.resize(n);
    double acc = 0.0;
    const double f0 = 30.0 + 10.0 * u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      acc = 0.99 * acc + w[i];
      double saw = 0.0;
      for (int h = 1; h <= 8; ++h) saw += std::sin(kTwoPi * f0 * h * t(i)) / h;
      x[i] = saw + 0.1 * acc;
    }
  } else if (id == "clicks") {
    x = white(n, rng);
    for (double& v : x) v *= 0.1;
    std::bernoulli_distribution click(20.0 / sr);
    for (std::size_t i = 0; i < n; ++i) {
      if (click(rng)) {
        const double a = (u(rng) < 0.5 ? -1.0 : 1.0) * (2.0 + 3.0 * u(rng));
        for (std::size_t k = 0; k < 16 && i + k < n; ++k) x[i + k] += a * std::exp(-0.4 * k);
      }
    }
  } else if (id == "amtone") {
    const std::vector<double> floor = white(n, rng);
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = (1.0 + 0.8 * std::sin(kTwoPi * 8.0 * t(i))) * std::sin(kTwoPi * 1000.0 * t(i)) +
             0.05 * floor[i];
    }
  } else if (id == "hiss") {
    const std::vector<double> w = white(n + 1, rng);
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = w[i + 1] - w[i];
  } else {
    throw ConfigError("unknown built-in noise '" + id + "'");
  }
  normalise(x);
  frontend::Waveform wave;
  wave.samples = std::move(x);
  wave.sample_rate = sr;
  return wave;
}

std::vector<NoiseProfile> builtin_noise_bank(double sample_rate, double seconds, std::uint64_t seed,
                                             const std::vector<std::string>& training_ids) {
  if (!(seconds > 0.0)) throw ConfigError("noise bank: duration must be positive");
  const auto n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  std::vector<NoiseProfile> bank;
  for (const std::string& id : builtin_noise_ids()) {
    bank.push_back({id, generate_noise(id, n, sample_rate, seed), in_training(id, training_ids)});
  }
  return bank;
}

std::vector<NoiseProfile> load_noise_dir(const std::filesystem::path& dir,
                                         const std::vector<std::string>& training_ids) {
  if (!std::filesystem::is_directory(dir)) throw IoError("noise directory " + dir.string() + " not found");
  std::vector<NoiseProfile> bank;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".wav") continue;
    const std::string id = entry.path().stem().string();
    bank.push_back({id, frontend::read_wav(entry.path()), in_training(id, training_ids)});
  }
  if (bank.empty()) throw IoError("noise directory " + dir.string() + " holds no .wav files");
  std::sort(bank.begin(), bank.end(),
            [](const NoiseProfile& a, const NoiseProfile& b) { return a.noise_id < b.noise_id; });
  return bank;
}

}  // namespace fsat::noise
