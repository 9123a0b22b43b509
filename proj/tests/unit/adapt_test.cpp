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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fsat/adapt/algebra.hpp"
#include "fsat/adapt/mode.hpp"
#include "fsat/adapt/objective.hpp"
#include "fsat/adapt/transforms.hpp"
#include "fsat/asr/decode.hpp"
#include "fsat/autodiff/gradcheck.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"
#include "support/quadrature.hpp"
#include "support/toy_model.hpp"

namespace fsat::adapt {
namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using fsat::testing::kl_by_quadrature;
using fsat::testing::random_features;
using fsat::testing::toy_config;

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(shape);
  for (double& v : t.values()) v = n(rng);
  return t;
}

double numeric_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Lhuc, ZeroIsExactIdentity) {
  Tape t;
  Var h = t.constant(random_tensor({4, 3}, 1));
  EXPECT_TRUE(lhuc_apply(h, t.constant(Tensor(Shape{3}))).value().bit_equal(h.value()));
}

TEST(Lhuc, SaturatesAtTwo) {
  Tape t;
  Var y = lhuc_apply(t.constant(Tensor::vector({1, 2})), t.constant(Tensor::vector({20, 20})));
  const double s = 2.0 * numeric_sigmoid(20.0);
  EXPECT_NEAR(y.value()[0], 1.0 * s, 1e-15);
  EXPECT_NEAR(y.value()[1], 2.0 * s, 1e-15);
  EXPECT_NEAR(y.value()[0], 2.0, 1e-8);
  EXPECT_NEAR(y.value()[1], 4.0, 1e-8);
}

TEST(Lhuc, LogThreeGivesOneAndAHalf) {
  Tape t;
  Var y = lhuc_apply(t.constant(Tensor::vector({2})), t.constant(Tensor::vector({std::log(3.0)})));
  EXPECT_NEAR(y.value()[0], 2.0 * 2.0 * numeric_sigmoid(std::log(3.0)), 1e-15);
  EXPECT_NEAR(y.value()[0], 3.0, 1e-12);
}

TEST(Lhuc, DimensionMismatch) {
  Tape t;
  EXPECT_THROW(lhuc_apply(t.constant(Tensor(Shape{2, 3})), t.constant(Tensor(Shape{2}))),
               ShapeError);
  EXPECT_THROW(hub_apply(t.constant(Tensor(Shape{2, 3})), t.constant(Tensor(Shape{4}))),
               ShapeError);
}

TEST(Hub, Examples) {
  Tape t;
  Var h = t.constant(Tensor::vector({1, -1}));
  Var y = hub_apply(h, t.constant(Tensor::vector({0.5, 0.5})));
  EXPECT_EQ(y.value()[0], 1.5);
  EXPECT_EQ(y.value()[1], -0.5);
  EXPECT_TRUE(hub_apply(h, t.constant(Tensor(Shape{2}))).value().bit_equal(h.value()));
}

TEST(Hub, Additivity) {
  Tape t;
  Var h = t.constant(Tensor::vector({1.0, 2.0}));
  Var a = t.constant(Tensor::vector({0.25, -0.5}));
  Var b = t.constant(Tensor::vector({0.5, 0.125}));
  EXPECT_TRUE(hub_apply(hub_apply(h, a), b).value().bit_equal(hub_apply(h, ad::add(a, b)).value()));
}

TEST(Lfa, BoundariesAreBitIdenticalToLhuc) {
  Tape t;
  Var h = t.constant(random_tensor({5, 4}, 2));
  Var r = t.constant(random_tensor({4}, 3));
  Var n = t.constant(random_tensor({4}, 4));
  EXPECT_TRUE(lfa_apply(h, r, n, 1.0).value().bit_equal(lhuc_apply(h, r).value()));
  EXPECT_TRUE(lfa_apply(h, r, n, 0.0).value().bit_equal(lhuc_apply(h, n).value()));
}

TEST(Lfa, EqualFactorsAnyBeta) {
  Tape t;
  Var h = t.constant(random_tensor({5, 4}, 5));
  Var r = t.constant(random_tensor({4}, 6));
  for (double beta : {0.1, 0.3, 0.5, 0.7, 0.9, 0.123456}) {
    EXPECT_TRUE(lfa_apply(h, r, r, beta).value().bit_equal(lhuc_apply(h, r).value())) << beta;
  }
}

TEST(Lfa, ConvexCombination) {
  Tape t;
  const Tensor hv = random_tensor({3, 2}, 7), rv = random_tensor({2}, 8), nv = random_tensor({2}, 9);
  Var y = lfa_apply(t.constant(hv), t.constant(rv), t.constant(nv), 0.7);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double expect = hv.at(i, j) * (0.7 * 2.0 * numeric_sigmoid(rv[j]) +
                                           0.3 * 2.0 * numeric_sigmoid(nv[j]));
      EXPECT_NEAR(y.value().at(i, j), expect, 1e-14);
    }
  }
  EXPECT_THROW(lfa_apply(t.constant(hv), t.constant(rv), t.constant(nv), 1.01), DomainError);
  EXPECT_THROW(lfa_apply(t.constant(hv), t.constant(rv), t.constant(nv), -0.01), DomainError);
}

TEST(Cfa, IdentityPairsLeaveHiddenUnchanged) {
  Tape t;
  Var h = t.constant(random_tensor({4, 3}, 10));
  Var zero = t.constant(Tensor(Shape{3}));
  for (auto sk : {TransformKind::kLhuc, TransformKind::kHub}) {
    for (auto ek : {TransformKind::kLhuc, TransformKind::kHub}) {
      EXPECT_TRUE(cfa_apply(h, zero, sk, zero, ek).value().bit_equal(h.value()));
    }
  }
}

TEST(Cfa, Examples) {
  Tape t;
  Var h = t.constant(Tensor::vector({1.0}));
  Var y = cfa_apply(h, t.constant(Tensor::vector({0.2})), TransformKind::kHub,
                    t.constant(Tensor::vector({0.3})), TransformKind::kHub);
  EXPECT_EQ(y.value()[0], 1.5);
  EXPECT_TRUE(y.value().bit_equal(hub_apply(h, t.constant(Tensor::vector({0.5}))).value()));
  Var z = cfa_apply(h, t.constant(Tensor::vector({0.0})), TransformKind::kLhuc,
                    t.constant(Tensor::vector({0.3})), TransformKind::kHub);
  EXPECT_EQ(z.value()[0], 1.3);
}

TEST(Cfa, FourCasesMatchWrittenForm) {
  Tape t;
  const Tensor hv = random_tensor({3, 2}, 11), rv = random_tensor({2}, 12), nv = random_tensor({2}, 13);
  Var h = t.constant(hv), r = t.constant(rv), n = t.constant(nv);
  const auto L = TransformKind::kLhuc, H = TransformKind::kHub;
  auto xi = [](double v) { return 2.0 * numeric_sigmoid(v); };
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double x = hv.at(i, j), a = rv[j], b = nv[j];
      EXPECT_NEAR(cfa_apply(h, r, L, n, L).value().at(i, j), x * xi(a) * xi(b), 1e-14);
      EXPECT_NEAR(cfa_apply(h, r, H, n, H).value().at(i, j), x + a + b, 1e-14);
      EXPECT_NEAR(cfa_apply(h, r, L, n, H).value().at(i, j), x * xi(a) + b, 1e-14);
      EXPECT_NEAR(cfa_apply(h, r, H, n, L).value().at(i, j), (x + a) * xi(b), 1e-14);
    }
  }
}

TEST(Cfa, HubHubEqualsSummedBiasHub) {
  Tape t;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Var h = t.constant(random_tensor({6, 5}, 100 + s));
    Var r = t.constant(random_tensor({5}, 200 + s));
    Var n = t.constant(random_tensor({5}, 300 + s));
    EXPECT_TRUE(cfa_apply(h, r, TransformKind::kHub, n, TransformKind::kHub)
                    .value()
                    .bit_equal(hub_apply(h, ad::add(r, n)).value()));
  }
}

TEST(Cfa, LhucLhucEqualsSingleLhucOnlyWithIdentityFactor) {
  Tape t;
  Var h = t.constant(random_tensor({4, 3}, 14));
  Var r = t.constant(random_tensor({3}, 15));
  Var n = t.constant(random_tensor({3}, 16));
  Var zero = t.constant(Tensor(Shape{3}));
  const auto L = TransformKind::kLhuc;
  EXPECT_TRUE(cfa_apply(h, r, L, zero, L).value().bit_equal(lhuc_apply(h, r).value()));
  EXPECT_TRUE(cfa_apply(h, zero, L, n, L).value().bit_equal(lhuc_apply(h, n).value()));
  const Tensor a = cfa_apply(h, r, L, n, L).value();
  const Tensor b = lhuc_apply(h, ad::add(r, n)).value();
  double diff = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(Kl, SelfDivergenceIsZero) {
  const Tensor mu = random_tensor({4}, 17);
  Tensor sd = random_tensor({4}, 18);
  for (double& v : sd.values()) v = std::exp(v);
  EXPECT_NEAR(kl_to_prior(mu, sd, mu, sd), 0.0, 1e-12);
  Tape t;
  Tensor log_sd = sd;
  for (double& v : log_sd.values()) v = std::log(v);
  EXPECT_NEAR(kl_to_prior(t.constant(mu), t.constant(log_sd), mu, sd).value().item(), 0.0, 1e-12);
}

TEST(Kl, KnownPairsAgainstQuadrature) {
  const double a = kl_to_prior(Tensor::vector({1}), Tensor::vector({1}), Tensor::vector({0}),
                               Tensor::vector({1}));
  EXPECT_NEAR(a, kl_by_quadrature(1, 1, 0, 1), 1e-9);
  EXPECT_NEAR(a, 0.5, 1e-9);
  const double b = kl_to_prior(Tensor::vector({0}), Tensor::vector({0.5}), Tensor::vector({0}),
                               Tensor::vector({1}));
  EXPECT_NEAR(b, kl_by_quadrature(0, 0.5, 0, 1), 1e-9);
  EXPECT_NEAR(b, 0.3181, 1e-4);
}

TEST(Kl, RandomPairsAgainstQuadrature) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> m(-2, 2), s(0.2, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double mq = m(rng), sq = s(rng), mp = m(rng), sp = s(rng);
    const double got = kl_to_prior(Tensor::vector({mq}), Tensor::vector({sq}), Tensor::vector({mp}),
                                   Tensor::vector({sp}));
    EXPECT_NEAR(got, kl_by_quadrature(mq, sq, mp, sp), 1e-6);
  }
}

TEST(Kl, VarMatchesTensorForm) {
  const Tensor mu = random_tensor({5}, 20), ls = random_tensor({5}, 21, 0.3);
  const Tensor mp = random_tensor({5}, 22);
  Tensor sp(Shape{5}, 0.7), sq = ls;
  for (double& v : sq.values()) v = std::exp(v);
  Tape t;
  EXPECT_NEAR(kl_to_prior(t.constant(mu), t.constant(ls), mp, sp).value().item(),
              kl_to_prior(mu, sq, mp, sp), 1e-12);
}

TEST(Kl, NonPositiveDeviationRejected) {
  EXPECT_THROW(kl_to_prior(Tensor::vector({0}), Tensor::vector({0}), Tensor::vector({0}),
                           Tensor::vector({1})),
               DomainError);
  Tape t;
  EXPECT_THROW(kl_to_prior(t.constant(Tensor::vector({0})), t.constant(Tensor::vector({0})),
                           Tensor::vector({0}), Tensor::vector({-1})),
               DomainError);
}

TEST(Sampling, Examples) {
  Tape t;
  Var mu = t.constant(Tensor::vector({0.3, -0.2}));
  Var ls = t.constant(Tensor::vector({0.1, 0.4}));
  EXPECT_TRUE(sample_transform(mu, ls, Tensor(Shape{2})).value().bit_equal(mu.value()));
  Var y = sample_transform(t.constant(Tensor::vector({0})), t.constant(Tensor::vector({0})),
                           Tensor::vector({0.5}));
  EXPECT_EQ(y.value()[0], 0.5);
  EXPECT_THROW(sample_transform(mu, ls, Tensor(Shape{3})), ShapeError);
}

TEST(Sampling, MonteCarloMean) {
  FactorTransform tr(OwnerType::kSpeaker, "s", TransformKind::kHub, 1,
                     Parameterization::kVariational, std::log(0.8));
  tr.mean().value[0] = 1.25;
  const std::size_t N = 100000;
  double sum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    Tape t;
    sum += sample_transform(t.param(tr.mean()), t.param(tr.log_sigma()), epsilon_for(tr, 5, k))
               .value()[0];
  }
  EXPECT_LE(std::fabs(sum / N - 1.25), 3.0 * 0.8 / std::sqrt(static_cast<double>(N)));
}

// --- transforms inside the model -------------------------------------------

struct ToyAdaptation {
  asr::ConformerModel model{toy_config(), 41};
  std::vector<AdaptItem> items;

  explicit ToyAdaptation(bool cache) {
    const char* spk[] = {"s0", "s1", "s0", "s1"};
    const char* env[] = {"e0", "e0", "e1", "e1"};
    for (int u = 0; u < 4; ++u) {
      AdaptItem it;
      it.input = random_features(23 + u, 8, 500 + u);
      if (cache) {
        Tape t;
        it.input = model.subsample(t, it.input).value();
        it.subsampled = true;
      }
      it.tokens = {1 + u % 2, 2, 1};
      it.speaker = spk[u];
      it.environment = env[u];
      items.push_back(std::move(it));
    }
  }

  TransformSet make_set(const AdaptationMode& mode, Parameterization p, const PriorSpec& prior) {
    TransformSet set(8, 0, p);
    for (const AdaptItem& it : items) declare_transforms(set, mode, prior, it.speaker, it.environment);
    return set;
  }
};

void randomise(TransformSet& set, std::uint64_t seed, double sd) {
  std::uint64_t k = 0;
  for (FactorTransform* t : set.all()) t->mean().value = random_tensor({t->dim()}, seed + k++, sd);
}

std::vector<AdaptationMode> all_modes() {
  const auto L = TransformKind::kLhuc, H = TransformKind::kHub;
  return {AdaptationMode::speaker_only(L), AdaptationMode::speaker_only(H),
          AdaptationMode::env_only(L),     AdaptationMode::env_only(H),
          AdaptationMode::joint_single(H), AdaptationMode::lfa(0.7),
          AdaptationMode::cfa(L, L),       AdaptationMode::cfa(H, H),
          AdaptationMode::cfa(L, H),       AdaptationMode::cfa(H, L)};
}

TEST(ModelTransforms, IdentityTransformsLeaveEncodeBitIdentical) {
  ToyAdaptation toy(false);
  const PriorSpec prior;
  for (const AdaptationMode& mode : all_modes()) {
    TransformSet set = toy.make_set(mode, Parameterization::kDeterministic, prior);
    for (const AdaptItem& it : toy.items) {
      ModeTransform tr(mode, bind(set, mode, it.speaker, it.environment), 0, 8);
      Tape a, b;
      EXPECT_TRUE(toy.model.encode(a, it.input, &tr).hidden.value().bit_equal(
          toy.model.encode(b, it.input, nullptr).hidden.value()))
          << mode.describe();
    }
  }
}

TEST(ModelTransforms, DimensionMismatchRejected) {
  ToyAdaptation toy(false);
  TransformSet set(6, 0, Parameterization::kDeterministic);
  const AdaptationMode mode = AdaptationMode::speaker_only(TransformKind::kHub);
  declare_transforms(set, mode, PriorSpec{}, "s0", "e0");
  ModeTransform tr(mode, bind(set, mode, "s0", "e0"), 0, 6);
  Tape t;
  EXPECT_THROW(toy.model.encode(t, toy.items[0].input, &tr), ShapeError);
}

TEST(ModelTransforms, MissingOwnerNamed) {
  TransformSet set(8, 0, Parameterization::kDeterministic);
  try {
    bind(set, AdaptationMode::speaker_only(TransformKind::kHub), "spk42", "e0");
    FAIL();
  } catch (const StateError& e) {
    EXPECT_NE(std::string(e.what()).find("spk42"), std::string::npos);
  }
}

TEST(ModelTransforms, IdentityLhucKeepsHypotheses) {
  ToyAdaptation toy(false);
  const AdaptationMode mode = AdaptationMode::speaker_only(TransformKind::kLhuc);
  TransformSet set = toy.make_set(mode, Parameterization::kDeterministic, PriorSpec{});
  asr::DecodeOptions opt;
  opt.beam = 2;
  for (const AdaptItem& it : toy.items) {
    ModeTransform tr(mode, bind(set, mode, it.speaker, it.environment), 0, 8);
    EXPECT_EQ(asr::decode(toy.model, it.input, &tr, opt).tokens,
              asr::decode(toy.model, it.input, nullptr, opt).tokens);
  }
}

TEST(Objective, DegeneratePosteriorMatchesDeterministic) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kLhuc, TransformKind::kHub);
  PriorSpec prior;
  TransformSet var = toy.make_set(mode, Parameterization::kVariational, prior);
  randomise(var, 60, 0.3);
  for (FactorTransform* t : var.all()) t->log_sigma().value.fill(std::log(1e-12));
  TransformSet det = var.posterior_mean();
  ObjectiveOptions o;
  o.mode = mode;
  o.prior = prior;
  o.kl_weight = 0.0;
  o.seed = 9;
  Tape a, b;
  const double bayes = bayesian_objective(a, toy.model, toy.items, var, o).value().item();
  const double plain = bayesian_objective(b, toy.model, toy.items, det, o).value().item();
  EXPECT_NEAR(bayes, plain, 1e-6);
}

TEST(Objective, KlIsSumOfIndependentTerms) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub);
  PriorSpec prior;
  TransformSet set = toy.make_set(mode, Parameterization::kVariational, prior);
  randomise(set, 70, 0.01);
  ObjectiveOptions o;
  o.mode = mode;
  o.prior = prior;
  ObjectiveValue parts;
  Tape t;
  bayesian_objective(t, toy.model, toy.items, set, o, &parts);
  double expect = 0.0;
  for (const FactorTransform* tr : set.all()) {
    expect += kl_to_prior(tr->mean().value, tr->sigma(), prior.mean(tr->kind(), 8),
                          prior.sigma(tr->kind(), 8));
  }
  EXPECT_NEAR(parts.kl, expect, 1e-12 * std::max(1.0, expect));
  EXPECT_EQ(set.size(), 4u);
}

TEST(Objective, EstimatorVarianceShrinksWithSamples) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::speaker_only(TransformKind::kLhuc);
  PriorSpec prior;
  prior.lhuc_initial_sigma = 0.5;
  TransformSet set = toy.make_set(mode, Parameterization::kVariational, prior);
  const std::span<const AdaptItem> batch(toy.items.data(), 2);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t K : {1u, 4u, 16u}) {
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      ObjectiveOptions o;
      o.mode = mode;
      o.prior = prior;
      o.samples = K;
      o.seed = seed;
      const double v = evaluate_objective(toy.model, batch, set, o, false).total;
      s += v;
      s2 += v * v;
    }
    const double var = s2 / 100 - (s / 100) * (s / 100);
    EXPECT_LT(var, prev) << "K=" << K;
    prev = var;
  }
}

TEST(Objective, RejectsZeroSamplesAndEmptyBatch) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::speaker_only(TransformKind::kHub);
  TransformSet set = toy.make_set(mode, Parameterization::kVariational, PriorSpec{});
  ObjectiveOptions o;
  o.mode = mode;
  o.samples = 0;
  EXPECT_THROW(evaluate_objective(toy.model, toy.items, set, o, false), DomainError);
  o.samples = 1;
  EXPECT_THROW(evaluate_objective(toy.model, {}, set, o, false), DomainError);
}

TEST(Objective, GradientWrtMeanAndLogSigma) {
  ToyAdaptation toy(true);
  for (const AdaptationMode& mode :
       {AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub), AdaptationMode::lfa(0.7),
        AdaptationMode::cfa(TransformKind::kLhuc, TransformKind::kHub)}) {
    PriorSpec prior;
    prior.hub_sigma = 0.1;
    prior.hub_initial_sigma = 0.05;
    TransformSet set = toy.make_set(mode, Parameterization::kVariational, prior);
    randomise(set, 80, 0.2);
    ObjectiveOptions o;
    o.mode = mode;
    o.prior = prior;
    o.samples = 2;
    o.seed = 4;
    std::vector<ad::Parameter*> ps = set.parameters();
    auto report = ad::finite_difference_check(
        [&](Tape& t) { return bayesian_objective(t, toy.model, toy.items, set, o); }, ps);
    EXPECT_LE(report.max_relative_error, 1e-4)
        << mode.describe() << " " << report.worst_parameter << " analytic "
        << report.worst_analytic << " numeric " << report.worst_numeric;
  }
}

TEST(Objective, PerUtteranceEvaluationMatchesSingleTape) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kLhuc, TransformKind::kHub);
  PriorSpec prior;
  TransformSet set = toy.make_set(mode, Parameterization::kVariational, prior);
  randomise(set, 90, 0.3);
  ObjectiveOptions o;
  o.mode = mode;
  o.prior = prior;
  o.samples = 3;
  o.seed = 12;
  Tape t;
  Var whole = bayesian_objective(t, toy.model, toy.items, set, o);
  const ad::GradientMap g = t.backward(whole);
  for (ad::Parameter* p : set.parameters()) p->zero_grad();
  toy.model.params().zero_grad();
  const ObjectiveValue v = evaluate_objective(toy.model, toy.items, set, o, true);
  EXPECT_NEAR(v.total, whole.value().item(), 1e-12);
  for (ad::Parameter* p : set.parameters()) {
    const Tensor& expect = g.at(p->id);
    for (std::size_t i = 0; i < expect.numel(); ++i) {
      EXPECT_NEAR(p->grad[i], expect[i], 1e-10 * std::max(1.0, std::fabs(expect[i]))) << p->id;
    }
  }
}

TEST(Objective, GradientReachesOnlyOwnTransforms) {
  ToyAdaptation toy(true);
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kLhuc, TransformKind::kHub);
  TransformSet set = toy.make_set(mode, Parameterization::kDeterministic, PriorSpec{});
  randomise(set, 95, 0.2);
  ObjectiveOptions o;
  o.mode = mode;
  for (const AdaptItem& it : toy.items) {
    for (ad::Parameter* p : set.parameters()) p->zero_grad();
    evaluate_objective(toy.model, std::span<const AdaptItem>(&it, 1), set, o, true);
    for (FactorTransform* tr : set.all()) {
      const bool own = (tr->owner_type() == OwnerType::kSpeaker && tr->owner_id() == it.speaker) ||
                       (tr->owner_type() == OwnerType::kEnvironment &&
                        tr->owner_id() == it.environment);
      double norm = 0.0;
      for (double g : tr->mean().grad.values()) norm += g * g;
      if (own) {
        EXPECT_GT(norm, 0.0) << tr->owner_id();
      } else {
        EXPECT_EQ(norm, 0.0) << tr->owner_id();
      }
    }
  }
}

TEST(PosteriorMean, UsesMeanOnly) {
  ToyAdaptation toy(false);
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub);
  TransformSet set = toy.make_set(mode, Parameterization::kVariational, PriorSpec{});
  randomise(set, 33, 0.5);
  TransformSet mean_a = set.posterior_mean();
  for (FactorTransform* t : set.all()) t->log_sigma().value.fill(std::log(3.0));
  TransformSet mean_b = set.posterior_mean();
  asr::DecodeOptions opt;
  opt.beam = 2;
  for (const AdaptItem& it : toy.items) {
    ModeTransform ta(mode, bind(mean_a, mode, it.speaker, it.environment), 0, 8);
    ModeTransform tb(mode, bind(mean_b, mode, it.speaker, it.environment), 0, 8);
    const asr::Hypothesis h1 = asr::decode(toy.model, it.input, &ta, opt);
    const asr::Hypothesis h2 = asr::decode(toy.model, it.input, &ta, opt);
    const asr::Hypothesis h3 = asr::decode(toy.model, it.input, &tb, opt);
    EXPECT_EQ(h1.tokens, h2.tokens);
    EXPECT_EQ(h1.score, h2.score);
    EXPECT_EQ(h1.tokens, h3.tokens);
    EXPECT_EQ(h1.score, h3.score);
  }
  TransformSet det(8, 0, Parameterization::kDeterministic);
  det.add(OwnerType::kSpeaker, "s", TransformKind::kLhuc);
  TransformSet pass = det.posterior_mean();
  EXPECT_TRUE(pass.get(OwnerType::kSpeaker, "s").mean().value.bit_equal(Tensor(Shape{8})));
}

TEST(Cache, RoundTripIsExact) {
  TransformSet set(5, 0, Parameterization::kVariational);
  set.add(OwnerType::kSpeaker, "s01", TransformKind::kHub, std::log(0.001));
  set.add(OwnerType::kEnvironment, "pink@-5", TransformKind::kLhuc, std::log(0.1));
  set.add(OwnerType::kSpeaker, "s01@e03", TransformKind::kHub, std::log(0.001));
  randomise(set, 44, 1.0);
  set.provenance = {"synthetic-7", 3, 1.0 / 3.0};
  const auto path = std::filesystem::temp_directory_path() / "fsat_cache_rt.txt";
  save_transform_cache(path, set);
  const TransformSet back = load_transform_cache(path);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.provenance.corpus, "synthetic-7");
  EXPECT_EQ(back.provenance.objective, 1.0 / 3.0);
  for (const FactorTransform* t : set.all()) {
    const FactorTransform& b = back.get(t->owner_type(), t->owner_id());
    EXPECT_EQ(b.kind(), t->kind());
    EXPECT_TRUE(b.mean().value.bit_equal(t->mean().value));
    EXPECT_TRUE(b.log_sigma().value.bit_equal(t->log_sigma().value));
  }
  std::filesystem::remove(path);
}

TEST(Cache, MalformedFilesRejected) {
  const auto path = std::filesystem::temp_directory_path() / "fsat_cache_bad.txt";
  {
    std::ofstream os(path);
    os << "fsat-transform-cache 1\ndim 2\nlayer 0\nparameterization deterministic\n"
          "corpus x\nepochs 1\nobjective 0\nrecords 1\nspeaker s0 hub 0.5\n";
  }
  EXPECT_THROW(load_transform_cache(path), FormatError);
  {
    std::ofstream os(path);
    os << "fsat-transform-cache 9\n";
  }
  EXPECT_THROW(load_transform_cache(path), FormatError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_transform_cache(path), IoError);
}

TEST(Modes, ValidationAndNames) {
  EXPECT_THROW(AdaptationMode::lfa(1.5).validate(), ConfigError);
  AdaptationMode bad = AdaptationMode::lfa(0.5);
  bad.env_kind = TransformKind::kHub;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(parse_mode("cfa"), ModeType::kCfa);
  EXPECT_THROW(parse_mode("both"), ConfigError);
  EXPECT_EQ(AdaptationMode::cfa(TransformKind::kHub, TransformKind::kLhuc).describe(), "cfa-hub-lhuc");
}

}  // namespace
}  // namespace fsat::adapt
