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

#include "fsat/pipeline/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>

#include "fsat/adapt/objective.hpp"
#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::pipeline {

const char* supervision_name(Supervision s) { return s == Supervision::kGiven ? "given" : "pseudo"; }

Supervision parse_supervision(const std::string& text) {
  if (text == "given") return Supervision::kGiven;
  if (text == "pseudo") return Supervision::kPseudo;
  throw ConfigError("unknown supervision '" + text + "' (given, pseudo)");
}

const char* schedule_name(EstimationSchedule s) {
  return s == EstimationSchedule::kJoint ? "joint" : "alternating";
}

EstimationSchedule parse_schedule(const std::string& text) {
  if (text == "joint") return EstimationSchedule::kJoint;
  if (text == "alternating") return EstimationSchedule::kAlternating;
  throw ConfigError("unknown estimation schedule '" + text + "' (joint, alternating)");
}

const char* optimizer_name(EstimationOptimizer o) {
  return o == EstimationOptimizer::kFullBatchDescent ? "descent" : "adam";
}

EstimationOptimizer parse_optimizer(const std::string& text) {
  if (text == "descent") return EstimationOptimizer::kFullBatchDescent;
  if (text == "adam") return EstimationOptimizer::kMinibatchAdam;
  throw ConfigError("unknown estimation optimizer '" + text + "' (descent, adam)");
}

void EstimationOptions::validate() const {
  mode.validate();
  prior.validate();
  if (samples == 0) throw ConfigError("estimation: samples must be at least 1");
  if (!(initial_step > 0.0) || !(max_step >= initial_step)) {
    throw ConfigError("estimation: need 0 < initial_step <= max_step");
  }
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("estimation: backtrack in (0,1)");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("estimation: armijo in (0,1)");
  if (batch_size == 0) throw ConfigError("estimation: batch_size must be positive");
  if (!(kl_weight >= 0.0)) throw ConfigError("estimation: kl_weight must be non-negative");
}

EstimationOptions EstimationOptions::from_config(const KeyValueConfig& kv, const std::string& p) {
  EstimationOptions o;
  o.mode.type = adapt::parse_mode(kv.get_string(p + "mode", adapt::mode_name(o.mode.type)));
  // LFA interpolates LHUC factors, so that is its default kind.
  const auto default_kind = o.mode.type == adapt::ModeType::kLfa ? adapt::TransformKind::kLhuc : o.mode.speaker_kind;
  o.mode.speaker_kind = adapt::parse_kind(kv.get_string(p + "spk_kind", adapt::kind_name(default_kind)));
  o.mode.env_kind = adapt::parse_kind(kv.get_string(
      p + "env_kind", adapt::kind_name(o.mode.type == adapt::ModeType::kLfa ? default_kind : o.mode.env_kind)));
  o.mode.beta = kv.get_double(p + "beta", o.mode.beta);
  o.parameterization = kv.get_bool(p + "bayesian", false) ? adapt::Parameterization::kVariational
                                                           : adapt::Parameterization::kDeterministic;
  o.prior.lhuc_mean = kv.get_double(p + "prior.lhuc_mean", o.prior.lhuc_mean);
  o.prior.lhuc_sigma = kv.get_double(p + "prior.lhuc_sigma", o.prior.lhuc_sigma);
  o.prior.hub_mean = kv.get_double(p + "prior.hub_mean", o.prior.hub_mean);
  o.prior.hub_sigma = kv.get_double(p + "prior.hub_sigma", o.prior.hub_sigma);
  o.prior.lhuc_initial_sigma = kv.get_double(p + "prior.lhuc_initial_sigma", o.prior.lhuc_initial_sigma);
  o.prior.hub_initial_sigma = kv.get_double(p + "prior.hub_initial_sigma", o.prior.hub_initial_sigma);
  o.samples = kv.get_size(p + "samples", o.samples);
  o.epochs = kv.get_size(p + "epochs", o.epochs);
  o.lambda = kv.get_double(p + "lambda", o.lambda);
  o.kl_weight = kv.get_double(p + "kl_weight", o.kl_weight);
  o.schedule = parse_schedule(kv.get_string(p + "schedule", schedule_name(o.schedule)));
  o.optimizer = parse_optimizer(kv.get_string(p + "optimizer", optimizer_name(o.optimizer)));
  o.initial_step = kv.get_double(p + "initial_step", o.initial_step);
  o.max_step = kv.get_double(p + "max_step", o.max_step);
  o.armijo = kv.get_double(p + "armijo", o.armijo);
  o.backtrack = kv.get_double(p + "backtrack", o.backtrack);
  o.max_backtracks = kv.get_size(p + "max_backtracks", o.max_backtracks);
  o.adam.learning_rate = kv.get_double(p + "adam_lr", o.adam.learning_rate);
  o.batch_size = kv.get_size(p + "batch_size", o.batch_size);
  o.layer = kv.get_size(p + "layer", o.layer);
  o.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(o.seed)));
  o.validate();
  return o;
}

void EstimationOptions::to_config(KeyValueConfig& kv, const std::string& p) const {
  kv.set(p + "mode", std::string(adapt::mode_name(mode.type)));
  kv.set(p + "spk_kind", std::string(adapt::kind_name(mode.speaker_kind)));
  kv.set(p + "env_kind", std::string(adapt::kind_name(mode.env_kind)));
  kv.set(p + "beta", mode.beta);
  kv.set(p + "bayesian", parameterization == adapt::Parameterization::kVariational);
  kv.set(p + "prior.lhuc_mean", prior.lhuc_mean);
  kv.set(p + "prior.lhuc_sigma", prior.lhuc_sigma);
  kv.set(p + "prior.hub_mean", prior.hub_mean);
  kv.set(p + "prior.hub_sigma", prior.hub_sigma);
  kv.set(p + "prior.lhuc_initial_sigma", prior.lhuc_initial_sigma);
  kv.set(p + "prior.hub_initial_sigma", prior.hub_initial_sigma);
  kv.set_size(p + "samples", samples);
  kv.set_size(p + "epochs", epochs);
  kv.set(p + "lambda", lambda);
  kv.set(p + "kl_weight", kl_weight);
  kv.set(p + "schedule", std::string(schedule_name(schedule)));
  kv.set(p + "optimizer", std::string(optimizer_name(optimizer)));
  kv.set(p + "initial_step", initial_step);
  kv.set(p + "max_step", max_step);
  kv.set(p + "armijo", armijo);
  kv.set(p + "backtrack", backtrack);
  kv.set_size(p + "max_backtracks", max_backtracks);
  kv.set(p + "adam_lr", adam.learning_rate);
  kv.set_size(p + "batch_size", batch_size);
  kv.set_size(p + "layer", layer);
  kv.set(p + "seed", static_cast<long long>(seed));
}

adapt::TransformSet declare_for_dataset(const asr::ConformerModel& model,
                                        const AdaptationDataset& data,
                                        const EstimationOptions& o) {
  o.validate();
  adapt::TransformSet set(model.config().model_dim, o.layer, o.parameterization);
  for (const auto& u : data.utterances()) {
    adapt::declare_transforms(set, o.mode, o.prior, u.speaker_id, u.env_id);
  }
  return set;
}

std::vector<asr::Hypothesis> decode_dataset(const asr::ConformerModel& model,
                                            const AdaptationDataset& data,
                                            adapt::TransformSet* transforms,
                                            const adapt::AdaptationMode& mode,
                                            const asr::DecodeOptions& options) {
  std::vector<asr::Hypothesis> out;
  out.reserve(data.size());
  for (const auto& u : data.utterances()) {
    std::optional<adapt::ModeTransform> transform;
    if (transforms) {
      transform.emplace(mode, adapt::bind(*transforms, mode, u.speaker_id, u.env_id),
                        transforms->layer(), transforms->dim());
    }
    out.push_back(asr::decode(model, u.frames, transform ? &*transform : nullptr, options));
  }
  return out;
}

std::vector<std::vector<int>> hypothesis_tokens(const std::vector<asr::Hypothesis>& hyps) {
  std::vector<std::vector<int>> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) out.push_back(h.tokens);
  return out;
}

namespace {

struct Problem {
  const asr::ConformerModel& model;
  std::vector<adapt::AdaptItem> items;
  adapt::TransformSet& set;
  adapt::ObjectiveOptions objective;
  std::vector<ad::Parameter*> params;
  std::vector<double> precondition;  // per parameter
  std::vector<bool> speaker_side;    // per parameter

  double evaluate(bool with_grad) {
    for (ad::Parameter* p : params) p->zero_grad();
    return adapt::evaluate_objective(model, items, set, objective, with_grad).total;
  }
};

// One Armijo-controlled step on the parameters selected by `mask`. On entry
// the gradients at the current point are in Parameter::grad and `f` holds
// the objective; both are refreshed on exit.
void descent_step(Problem& pb, const std::vector<bool>& mask, const EstimationOptions& o,
                  double& f, double& step) {
  std::vector<ad::Tensor> origin, direction;
  double slope = 0.0;
  for (std::size_t i = 0; i < pb.params.size(); ++i) {
    ad::Parameter* p = pb.params[i];
    origin.push_back(p->value);
    ad::Tensor d = ad::Tensor::zeros_like(p->value);
    if (mask[i]) {
      for (std::size_t j = 0; j < d.numel(); ++j) {
        d[j] = -pb.precondition[i] * p->grad[j];
        slope += p->grad[j] * d[j];
      }
    }
    direction.push_back(std::move(d));
  }
  double largest = 0.0;
  for (const ad::Tensor& d : direction) {
    for (double v : d.values()) largest = std::max(largest, std::abs(v));
  }
  if (!(slope < 0.0) || largest == 0.0) return;

  // `step` is the largest coordinate change; alpha scales the direction to it.
  double delta = step;
  for (std::size_t bt = 0; bt <= o.max_backtracks; ++bt) {
    const double alpha = delta / largest;
    for (std::size_t i = 0; i < pb.params.size(); ++i) {
      ad::Tensor& v = pb.params[i]->value;
      for (std::size_t j = 0; j < v.numel(); ++j) v[j] = origin[i][j] + alpha * direction[i][j];
    }
    const double trial = pb.evaluate(true);
    if (std::isfinite(trial) && trial <= f + o.armijo * alpha * slope) {
      f = trial;
      step = std::min(delta / o.backtrack, o.max_step);
      return;
    }
    delta *= o.backtrack;
  }
  for (std::size_t i = 0; i < pb.params.size(); ++i) pb.params[i]->value = origin[i];
  f = pb.evaluate(true);
  step = delta;
}

}  // namespace

EstimationReport estimate_transforms(const asr::ConformerModel& model,
                                     const AdaptationDataset& data,
                                     const std::vector<std::vector<int>>& targets,
                                     adapt::TransformSet& set, const EstimationOptions& o) {
  o.validate();
  if (targets.size() != data.size()) {
    throw ShapeError("estimate_transforms: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(data.size()) + " utterances");
  }
  if (set.layer() != o.layer) throw ConfigError("estimate_transforms: transform layer mismatch");
  EstimationReport report;
  report.checksum_before = model.params().checksum();

  asr::ConformerModel frozen(model);
  frozen.params().set_trainable(false);

  Problem pb{frozen, {}, set, {}, {}, {}, {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (targets[i].empty()) {
      ++report.skipped;
      continue;
    }
    adapt::AdaptItem it;
    if (o.layer == 0) {
      ad::Tape tape;
      it.input = frozen.subsample(tape, data[i].frames).value();
      it.subsampled = true;
    } else {
      it.input = data[i].frames;
    }
    it.tokens = targets[i];
    it.speaker = data[i].speaker_id;
    it.environment = data[i].env_id;
    pb.items.push_back(std::move(it));
  }
  if (pb.items.empty()) throw DomainError("estimate_transforms: no utterance has targets");

  std::map<const adapt::FactorTransform*, std::size_t> tokens;
  std::size_t total_tokens = 0;
  for (const adapt::AdaptItem& it : pb.items) {
    total_tokens += it.tokens.size();
    for (adapt::FactorTransform* t : adapt::bind(set, o.mode, it.speaker, it.environment).used()) {
      tokens[t] += it.tokens.size();
    }
  }
  for (adapt::FactorTransform* t : set.all()) {
    if (!tokens.count(t)) {
      throw DomainError(std::string("estimate_transforms: no adaptation data for ") +
                        adapt::owner_type_name(t->owner_type()) + " '" + t->owner_id() + "'");
    }
    const double share = static_cast<double>(total_tokens) / static_cast<double>(tokens[t]);
    const bool speaker_side = t->owner_type() != adapt::OwnerType::kEnvironment;
    for (ad::Parameter* p : t->parameters()) {
      pb.params.push_back(p);
      pb.precondition.push_back(share);
      pb.speaker_side.push_back(speaker_side);
    }
  }
  pb.objective = adapt::ObjectiveOptions{o.mode, o.prior, o.samples, o.lambda, o.kl_weight, 1.0,
                                         0,      o.seed,  ad::Mode::kEval};

  double f = pb.evaluate(o.optimizer == EstimationOptimizer::kFullBatchDescent);
  report.objective.push_back(f);
  if (o.optimizer == EstimationOptimizer::kFullBatchDescent) {
    std::vector<std::vector<bool>> blocks;
    if (o.schedule == EstimationSchedule::kJoint) {
      blocks.emplace_back(pb.params.size(), true);
    } else {
      std::vector<bool> spk = pb.speaker_side, env(pb.params.size());
      for (std::size_t i = 0; i < env.size(); ++i) env[i] = !spk[i];
      for (auto* b : {&spk, &env}) {
        if (std::find(b->begin(), b->end(), true) != b->end()) blocks.push_back(*b);
      }
    }
    double step = o.initial_step;
    for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
      for (const auto& mask : blocks) descent_step(pb, mask, o, f, step);
      report.objective.push_back(f);
      report.step_sizes.push_back(step);
    }
  } else {
    asr::Adam adam(o.adam);
    std::vector<std::size_t> order(pb.items.size());
    std::size_t update = 0;
    for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(derive_seed(o.seed, "estimation-shuffle", epoch));
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += o.batch_size) {
        std::vector<adapt::AdaptItem> batch;
        for (std::size_t b = start; b < std::min(order.size(), start + o.batch_size); ++b) {
          batch.push_back(pb.items[order[b]]);
        }
        adapt::ObjectiveOptions bo = pb.objective;
        bo.kl_scale = static_cast<double>(adapt::token_count(batch)) /
                      static_cast<double>(total_tokens);
        bo.seed = derive_seed(o.seed, "estimation-batch", update++);
        for (ad::Parameter* p : pb.params) p->zero_grad();
        adapt::evaluate_objective(frozen, batch, set, bo, true);
        adam.step(pb.params);
      }
      report.objective.push_back(pb.evaluate(false));
    }
  }
  for (ad::Parameter* p : pb.params) p->zero_grad();
  set.provenance.epochs = o.epochs;
  set.provenance.objective = report.objective.back();
  report.checksum_after = model.params().checksum();
  return report;
}

}  // namespace fsat::pipeline
