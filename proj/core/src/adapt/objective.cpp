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

#include "fsat/adapt/objective.hpp"

#include <set>

#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::adapt {
namespace {

void check_options(const ObjectiveOptions& o, std::span<const AdaptItem> items) {
  if (o.samples < 1) throw DomainError("bayesian_objective: sample count must be at least 1");
  if (items.empty()) throw DomainError("bayesian_objective: empty batch");
  if (!(o.kl_weight >= 0.0 && o.kl_scale >= 0.0)) {
    throw DomainError("bayesian_objective: KL weight and scale must be non-negative");
  }
  o.mode.validate();
  o.prior.validate();
  for (const AdaptItem& it : items) {
    if (it.tokens.empty()) {
      throw DomainError("bayesian_objective: utterance of " + it.speaker + "/" + it.environment +
                        " has no tokens");
    }
  }
}

std::size_t sample_count(const TransformSet& set, const ObjectiveOptions& o) {
  return set.parameterization() == Parameterization::kVariational ? o.samples : 1;
}

ad::Var utterance_loss(ad::Tape& tape, const asr::ConformerModel& model, const AdaptItem& item,
                       TransformSet& set, const ObjectiveOptions& o, std::size_t k) {
  const bool sample = set.parameterization() == Parameterization::kVariational;
  ModeTransform transform(o.mode, bind(set, o.mode, item.speaker, item.environment), set.layer(),
                          set.dim(), o.seed, k, sample);
  ad::Var hidden;
  if (item.subsampled) {
    if (set.layer() != 0) {
      throw StateError("bayesian_objective: cached subsampling output needs insertion layer 0");
    }
    hidden = model.encode_subsampled(tape.constant(item.input), &transform);
  } else {
    hidden = model.encode(tape, item.input, &transform).hidden;
  }
  return model.losses(hidden, item.tokens, o.lambda).total;
}

ad::Var kl_term(ad::Tape& tape, const std::vector<FactorTransform*>& used, const PriorSpec& prior) {
  ad::Var kl = tape.constant(ad::Tensor::scalar(0.0));
  for (FactorTransform* t : used) {
    kl = ad::add(kl, kl_to_prior(tape.param(t->mean()), tape.param(t->log_sigma()),
                                 prior.mean(t->kind(), t->dim()), prior.sigma(t->kind(), t->dim())));
  }
  return kl;
}

}  // namespace

std::size_t token_count(std::span<const AdaptItem> items) {
  std::size_t n = 0;
  for (const AdaptItem& it : items) n += it.tokens.size();
  return n;
}

std::vector<FactorTransform*> transforms_in_batch(TransformSet& set, const AdaptationMode& mode,
                                                  std::span<const AdaptItem> items) {
  std::set<FactorTransform*> seen;
  for (const AdaptItem& it : items) {
    for (FactorTransform* t : bind(set, mode, it.speaker, it.environment).used()) seen.insert(t);
  }
  std::vector<FactorTransform*> out;
  for (FactorTransform* t : set.all()) {
    if (seen.count(t)) out.push_back(t);
  }
  return out;
}

ad::Var bayesian_objective(ad::Tape& tape, const asr::ConformerModel& model,
                           std::span<const AdaptItem> items, TransformSet& set,
                           const ObjectiveOptions& o, ObjectiveValue* parts) {
  check_options(o, items);
  const std::size_t K = sample_count(set, o);
  const std::size_t tokens = token_count(items);
  const double N = static_cast<double>(o.normaliser ? o.normaliser : tokens);

  ad::Var data = tape.constant(ad::Tensor::scalar(0.0));
  for (std::size_t k = 0; k < K; ++k) {
    for (const AdaptItem& it : items) data = ad::add(data, utterance_loss(tape, model, it, set, o, k));
  }
  if (K > 1) data = ad::scale(data, 1.0 / static_cast<double>(K));
  ad::Var total = data;
  ad::Var kl = tape.constant(ad::Tensor::scalar(0.0));
  if (set.parameterization() == Parameterization::kVariational) {
    kl = kl_term(tape, transforms_in_batch(set, o.mode, items), o.prior);
    if (o.kl_weight * o.kl_scale != 0.0) total = ad::add(data, ad::scale(kl, o.kl_weight * o.kl_scale));
  }
  total = ad::scale(total, 1.0 / N);
  if (parts) {
    parts->data = data.value().item();
    parts->kl = kl.value().item();
    parts->total = total.value().item();
    parts->tokens = tokens;
  }
  return total;
}

ObjectiveValue evaluate_objective(const asr::ConformerModel& model,
                                  std::span<const AdaptItem> items, TransformSet& set,
                                  const ObjectiveOptions& o, bool accumulate_grad) {
  check_options(o, items);
  const std::size_t K = sample_count(set, o);
  ObjectiveValue v;
  v.tokens = token_count(items);
  const double N = static_cast<double>(o.normaliser ? o.normaliser : v.tokens);
  const double per_sample = 1.0 / static_cast<double>(K);

  double data = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t u = 0; u < items.size(); ++u) {
      ad::Tape tape(derive_seed(o.seed, "utterance", k * items.size() + u), o.tape_mode);
      ad::Var loss = utterance_loss(tape, model, items[u], set, o, k);
      data += loss.value().item();
      if (accumulate_grad) tape.backward(ad::scale(loss, per_sample / N));
    }
  }
  v.data = K > 1 ? data * per_sample : data;
  double total = v.data;
  if (set.parameterization() == Parameterization::kVariational) {
    ad::Tape tape;
    ad::Var kl = kl_term(tape, transforms_in_batch(set, o.mode, items), o.prior);
    v.kl = kl.value().item();
    const double w = o.kl_weight * o.kl_scale;
    if (w != 0.0) {
      total += w * v.kl;
      if (accumulate_grad) tape.backward(ad::scale(kl, w / N));
    }
  }
  v.total = total / N;
  return v;
}

}  // namespace fsat::adapt
