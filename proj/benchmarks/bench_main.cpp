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

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fsat/asr/decode.hpp"
#include "fsat/asr/losses.hpp"
#include "fsat/asr/model.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/autodiff/tape.hpp"
#include "fsat/eval/scoring.hpp"
#include "fsat/frontend/logmel.hpp"
#include "fsat/noise/mixer.hpp"
#include "fsat/noise/noise_bank.hpp"
#include "fsat/pipeline/study.hpp"

namespace {

using namespace fsat;

ad::Tensor gaussian(ad::Shape shape, std::uint64_t seed) {
  ad::Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (double& v : t.values()) v = n(rng);
  return t;
}

frontend::Waveform tone(std::size_t samples) {
  frontend::Waveform w;
  w.sample_rate = 8000.0;
  for (std::size_t n = 0; n < samples; ++n) w.samples.push_back(0.3 * std::sin(2.0 * std::numbers::pi * 220.0 * n / 8000.0));
  return w;
}

// Forward and backward of CTC over T frames, 30 symbols, 10 labels.
void BM_CtcLoss(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const ad::Tensor logits = gaussian({T, 30}, 1);
  const std::vector<int> labels = {3, 5, 5, 7, 1, 2, 9, 9, 4, 6};
  for (auto _ : state) {
    ad::Tape tape;
    ad::Parameter p("x", logits);
    ad::Var loss = asr::ctc_loss(ad::log_softmax(tape.param(p)), labels);
    tape.backward(loss);
    benchmark::DoNotOptimize(p.grad);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CtcLoss)->RangeMultiplier(2)->Range(32, 512)->Complexity();

// Encoder forward for the study-sized model.
void BM_Encode(benchmark::State& state) {
  const auto config = pipeline::StudySpec::defaults().model;
  const asr::ConformerModel model(config, 7);
  const ad::Tensor features = gaussian({static_cast<std::size_t>(state.range(0)), config.feature_dim}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(model.encode(tape, features, nullptr).hidden.value());
  }
}
BENCHMARK(BM_Encode)->Arg(64)->Arg(128)->Arg(256);

void BM_BeamDecode(benchmark::State& state) {
  const auto config = pipeline::StudySpec::defaults().model;
  const asr::ConformerModel model(config, 7);
  const ad::Tensor features = gaussian({96, config.feature_dim}, 3);
  asr::DecodeOptions o;
  o.beam = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(asr::decode(model, features, nullptr, o));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(4)->Arg(8);

void BM_EditAlign(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, 25);
  auto text = [&] {
    std::string s;
    for (int i = 0; i < state.range(0); ++i) s.push_back(static_cast<char>('a' + pick(rng)));
    return eval::char_tokens(s);
  };
  const auto ref = text(), hyp = text();
  for (auto _ : state) benchmark::DoNotOptimize(eval::edit_align(ref, hyp));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EditAlign)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_LogMel(benchmark::State& state) {
  const auto w = tone(static_cast<std::size_t>(state.range(0)));
  const frontend::LogMelConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(frontend::extract_logmel(w, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogMel)->Arg(8000)->Arg(80000);

void BM_MixAtSnr(benchmark::State& state) {
  const auto clean = tone(static_cast<std::size_t>(state.range(0)));
  const auto bank = noise::builtin_noise_bank(8000.0, 5.0, 5, {"pink"});
  const auto training = noise::ConditionSet::cross({"pink"}, std::vector<double>{0.0});
  const noise::MixSpec spec{"u", bank.front().noise_id, 5.0, 123, 9};
  for (auto _ : state) benchmark::DoNotOptimize(noise::mix_at_snr(clean, bank.front(), spec, training));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MixAtSnr)->Arg(8000)->Arg(80000);

}  // namespace

BENCHMARK_MAIN();
