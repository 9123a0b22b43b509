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

#include "fsat/pipeline/training.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::pipeline {
namespace {

void check_options(const TrainOptions& o) {
  if (o.batch_size == 0) throw ConfigError("train: batch_size must be positive");
}

std::vector<ad::Parameter*> canonical(asr::ConformerModel& model) {
  std::vector<ad::Parameter*> out;
  for (ad::Parameter* p : model.params().all()) {
    if (p->trainable) out.push_back(p);
  }
  return out;
}

TrainReport run_training(asr::ConformerModel& model, const AdaptationDataset& data,
                         const TrainOptions& o, adapt::TransformSet* set,
                         const adapt::AdaptationMode* mode) {
  check_options(o);
  if (data.empty()) throw DomainError("train: empty training set");
  const auto targets = transcript_tokens(model, data);
  std::vector<ad::Parameter*> params = canonical(model);
  if (set) {
    for (ad::Parameter* p : set->parameters()) params.push_back(p);
  }
  for (ad::Parameter* p : params) p->zero_grad();

  asr::Adam adam(o.adam);
  const double lambda = model.config().lambda_train;
  std::vector<std::size_t> order(data.size());
  TrainReport report;
  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(o.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += o.batch_size) {
      const std::size_t end = std::min(order.size(), start + o.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t u = order[b];
        const std::uint64_t step_seed = derive_seed(o.seed, "step", epoch * data.size() + u);
        ad::Tensor x = data[u].frames;
        if (o.spec_augment) x = frontend::spec_augment_mask(x, o.augment, step_seed);
        std::optional<adapt::ModeTransform> transform;
        if (set) {
          auto binding = adapt::bind(*set, *mode, data[u].speaker_id, data[u].env_id);
          transform.emplace(*mode, binding, set->layer(), set->dim());
        }
        ad::Tape tape(derive_seed(step_seed, "dropout"), ad::Mode::kTrain);
        auto enc = model.encode(tape, x, transform ? &*transform : nullptr);
        ad::Var loss = model.losses(enc.hidden, targets[u], lambda).total;
        total += loss.value().item();
        tape.backward(ad::scale(loss, weight));
      }
      adam.step(params);
      for (ad::Parameter* p : params) p->zero_grad();
    }
    report.epoch_loss.push_back(total / static_cast<double>(data.size()));
    if (o.on_epoch) o.on_epoch(epoch, report.epoch_loss.back());
  }
  return report;
}

}  // namespace

std::vector<std::vector<int>> transcript_tokens(const asr::ConformerModel& model,
                                                const AdaptationDataset& data) {
  std::vector<std::vector<int>> out;
  out.reserve(data.size());
  for (const auto& u : data.utterances()) {
    if (!u.transcript) throw FormatError("utterance '" + u.utterance_id + "' has no transcript");
    out.push_back(model.vocab().encode(*u.transcript));
    if (out.back().empty()) {
      throw FormatError("utterance '" + u.utterance_id + "' has an empty transcript");
    }
  }
  return out;
}

TrainReport train_model(asr::ConformerModel& model, const AdaptationDataset& data,
                        const TrainOptions& options) {
  return run_training(model, data, options, nullptr, nullptr);
}

AdaptiveTrainResult adaptive_train(asr::ConformerModel& model, const AdaptationDataset& data,
                                   const adapt::AdaptationMode& mode, const TrainOptions& options,
                                   std::size_t layer) {
  mode.validate();
  AdaptiveTrainResult out{
      adapt::TransformSet(model.config().model_dim, layer, adapt::Parameterization::kDeterministic),
      {}};
  adapt::PriorSpec prior;
  for (const auto& u : data.utterances()) {
    adapt::declare_transforms(out.transforms, mode, prior, u.speaker_id, u.env_id);
  }
  out.report = run_training(model, data, options, &out.transforms, &mode);
  out.transforms.provenance.epochs = options.epochs;
  out.transforms.provenance.objective =
      out.report.epoch_loss.empty() ? 0.0 : out.report.epoch_loss.back();
  out.transforms.provenance.corpus = "adaptive-training";
  return out;
}

double mean_loss(const asr::ConformerModel& model, const AdaptationDataset& data,
                 adapt::TransformSet* transforms, const adapt::AdaptationMode& mode) {
  if (data.empty()) throw DomainError("mean_loss: empty dataset");
  const auto targets = transcript_tokens(model, data);
  double total = 0.0;
  for (std::size_t u = 0; u < data.size(); ++u) {
    std::optional<adapt::ModeTransform> transform;
    if (transforms) {
      auto binding = adapt::bind(*transforms, mode, data[u].speaker_id, data[u].env_id);
      transform.emplace(mode, binding, transforms->layer(), transforms->dim());
    }
    ad::Tape tape;
    auto enc = model.encode(tape, data[u].frames, transform ? &*transform : nullptr);
    total += model.losses(enc.hidden, targets[u], model.config().lambda_train).total.value().item();
  }
  return total / static_cast<double>(data.size());
}

}  // namespace fsat::pipeline
