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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iterator>
#include <map>
#include <memory>
#include <set>

#include "fsat/adapt/objective.hpp"
#include "fsat/error.hpp"
#include "fsat/pipeline/dataset.hpp"
#include "fsat/pipeline/estimation.hpp"
#include "fsat/pipeline/study.hpp"
#include "fsat/pipeline/synthetic.hpp"
#include "fsat/pipeline/test_time.hpp"
#include "fsat/pipeline/training.hpp"
#include "support/toy_model.hpp"

namespace fsat::pipeline {
namespace {

using adapt::AdaptationMode;
using adapt::OwnerType;
using adapt::TransformKind;

SyntheticTaskSpec small_task() {
  SyntheticTaskSpec s;
  s.alphabet = "abc";
  s.feature_dim = 8;
  s.min_tokens = 2;
  s.max_tokens = 3;
  s.min_token_frames = 10;
  s.max_token_frames = 12;
  s.edge_frames = 2;
  s.speaker_slope = 0.8;
  s.env_scale = 1.5;
  s.speakers = 2;
  s.environments = 2;
  s.utterances_per_cell = 3;
  return s;
}

asr::ModelConfig small_model() {
  asr::ModelConfig c = fsat::testing::toy_config();
  c.alphabet = "abc";
  c.model_dim = 12;
  c.ff_dim = 16;
  return c;
}

AdaptationDataset make_data(SyntheticTaskSpec s) {
  return AdaptationDataset(generate_synthetic_corpus(s).utterances);
}

// One baseline shared by the estimation tests; training it is the slow part.
const asr::ConformerModel& trained_baseline() {
  static const std::unique_ptr<asr::ConformerModel> model = [] {
    auto m = std::make_unique<asr::ConformerModel>(small_model(), 7);
    SyntheticTaskSpec s = small_task();
    s.speakers = 3;
    s.environments = 2;
    s.utterances_per_cell = 4;
    TrainOptions o;
    o.epochs = 25;
    o.spec_augment = false;
    train_model(*m, make_data(s), o);
    return m;
  }();
  return *model;
}

AdaptationDataset test_data() {
  SyntheticTaskSpec s = small_task();
  s.split = "test";
  s.speaker_offset = 10;
  s.environment_offset = 1;
  return make_data(s);
}

EstimationOptions cfa_options(std::size_t epochs = 3) {
  EstimationOptions o;
  o.mode = AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub);
  o.epochs = epochs;
  return o;
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  const auto a = generate_synthetic_corpus(small_task());
  const auto b = generate_synthetic_corpus(small_task());
  ASSERT_EQ(a.utterances.size(), b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    EXPECT_EQ(a.utterances[i].utterance_id, b.utterances[i].utterance_id);
    EXPECT_EQ(a.utterances[i].transcript, b.utterances[i].transcript);
    EXPECT_TRUE(a.utterances[i].frames.bit_equal(b.utterances[i].frames));
  }
}

TEST(Synthetic, GridShapeAndIds) {
  SyntheticTaskSpec s = small_task();
  s.speakers = 2;
  s.environments = 3;
  s.utterances_per_cell = 2;
  s.speaker_offset = 4;
  const AdaptationDataset d = make_data(s);
  EXPECT_EQ(d.size(), 12u);
  EXPECT_EQ(d.speakers(), (std::vector<std::string>{"spk04", "spk05"}));
  EXPECT_EQ(d.environments(), (std::vector<std::string>{"env00", "env01", "env02"}));
  EXPECT_EQ(d[0].utterance_id, "train-spk04-env00-000");
  for (const auto& u : d.utterances()) {
    EXPECT_EQ(u.frames.shape()[1], 8u);
    EXPECT_GE(u.transcript->size(), 2u);
    EXPECT_LE(u.transcript->size(), 3u);
  }
}

TEST(Synthetic, SingleCellIsHomogeneous) {
  SyntheticTaskSpec s = small_task();
  s.speakers = 1;
  s.environments = 1;
  s.utterances_per_cell = 5;
  const AdaptationDataset d = make_data(s);
  EXPECT_EQ(d.speakers().size(), 1u);
  EXPECT_EQ(d.environments().size(), 1u);
  EXPECT_EQ(d.cell("spk00", "env00").size(), 5u);
}

TEST(Synthetic, EnvironmentsDifferOnlyByPatternAndNoise) {
  SyntheticTaskSpec s = small_task();
  s.speakers = 1;
  s.environments = 2;
  s.utterances_per_cell = 2;
  s.frame_jitter = 0.0;
  s.min_noise = 0.0;
  s.max_noise = 0.0;
  const SyntheticCorpus c = generate_synthetic_corpus(s);
  for (std::size_t u = 0; u < 2; ++u) {
    const auto& a = c.utterances[u];
    const auto& b = c.utterances[2 + u];
    ASSERT_EQ(a.env_id, "env00");
    ASSERT_EQ(b.env_id, "env01");
    EXPECT_EQ(a.transcript, b.transcript);
    ASSERT_EQ(a.frames.shape(), b.frames.shape());
    for (std::size_t t = 0; t < a.frames.shape()[0]; ++t) {
      for (std::size_t f = 0; f < 8; ++f) {
        const double expected = c.truth.patterns[1][f] - c.truth.patterns[0][f];
        EXPECT_NEAR(b.frames.at(t, f) - a.frames.at(t, f), expected, 1e-12);
      }
    }
  }
  // With noise the difference is no longer the pattern alone.
  s.min_noise = s.max_noise = 0.2;
  const SyntheticCorpus n = generate_synthetic_corpus(s);
  EXPECT_FALSE(n.utterances[0].frames.bit_equal(c.utterances[0].frames));
}

TEST(Synthetic, DegenerateAlphabetIsRejected) {
  SyntheticTaskSpec s = small_task();
  s.alphabet = "aa";
  EXPECT_THROW(generate_synthetic_corpus(s), ConfigError);
  s.alphabet = "ab";
  s.speakers = 0;
  EXPECT_THROW(generate_synthetic_corpus(s), ConfigError);
}

TEST(Synthetic, ConfigRoundTrip) {
  SyntheticTaskSpec s = small_task();
  s.split = "cache";
  s.seed = 99;
  KeyValueConfig kv;
  s.to_config(kv, "task.");
  KeyValueConfig again;
  SyntheticTaskSpec::from_config(kv, "task.").to_config(again, "task.");
  EXPECT_EQ(kv.to_string(), again.to_string());
}

TEST(Dataset, FactorUnionIsSetUnion) {
  SyntheticTaskSpec s = small_task();
  s.speakers = 3;
  s.environments = 3;
  s.utterances_per_cell = 2;
  const AdaptationDataset d = make_data(s);
  for (const auto& spk : d.speakers()) {
    for (const auto& env : d.environments()) {
      std::set<std::size_t> expected;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i].speaker_id == spk || d[i].env_id == env) expected.insert(i);
      }
      const auto got = d.factor_union(spk, env);
      EXPECT_EQ(std::vector<std::size_t>(expected.begin(), expected.end()), got);
      EXPECT_EQ(d.cell(spk, env).size(), 2u);
    }
    EXPECT_EQ(d.speaker_union(spk).size(), 6u);
  }
  EXPECT_TRUE(d.cell("nobody", "env00").empty());
}

TEST(Dataset, RejectsDuplicatesAndMissingLabels) {
  auto utts = generate_synthetic_corpus(small_task()).utterances;
  auto dup = utts;
  dup.push_back(dup.front());
  EXPECT_THROW(AdaptationDataset{dup}, FormatError);
  utts[1].env_id.clear();
  EXPECT_THROW(AdaptationDataset{utts}, FormatError);
}

TEST(Dataset, SubsetKeepsOrder) {
  const AdaptationDataset d = make_data(small_task());
  const AdaptationDataset s = d.subset({3, 1});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].utterance_id, d[3].utterance_id);
  EXPECT_EQ(s[1].utterance_id, d[1].utterance_id);
}

TEST(AdaptiveTraining, CacheHoldsExactlyTheTrainingOwners) {
  SyntheticTaskSpec s = small_task();
  s.utterances_per_cell = 1;
  const AdaptationDataset d = make_data(s);
  asr::ConformerModel m(small_model(), 3);
  TrainOptions o;
  o.epochs = 1;
  auto r = adaptive_train(m, d, AdaptationMode::cfa(TransformKind::kHub, TransformKind::kLhuc), o);
  EXPECT_EQ(r.transforms.owners(OwnerType::kSpeaker), d.speakers());
  EXPECT_EQ(r.transforms.owners(OwnerType::kEnvironment), d.environments());
  EXPECT_EQ(r.transforms.size(), d.speakers().size() + d.environments().size());
  EXPECT_EQ(r.report.epoch_loss.size(), 1u);
}

TEST(AdaptiveTraining, OracleTransformsBeatBaselineOnHeldInLoss) {
  SyntheticTaskSpec s = small_task();
  s.speakers = 3;
  s.environments = 3;
  s.utterances_per_cell = 3;
  s.env_scale = 2.5;
  const AdaptationDataset d = make_data(s);
  TrainOptions o;
  o.epochs = 20;
  o.spec_augment = false;
  const AdaptationMode mode = AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub);

  asr::ConformerModel baseline(small_model(), 5);
  train_model(baseline, d, o);
  asr::ConformerModel adaptive(small_model(), 5);
  auto r = adaptive_train(adaptive, d, mode, o);

  const double base_loss = mean_loss(baseline, d, nullptr, mode);
  const double oracle_loss = mean_loss(adaptive, d, &r.transforms, mode);
  EXPECT_LT(oracle_loss, base_loss);
}

TEST(AdaptiveTraining, MissingTranscriptIsAnError) {
  auto utts = generate_synthetic_corpus(small_task()).utterances;
  utts[2].transcript.reset();
  asr::ConformerModel m(small_model(), 3);
  EXPECT_THROW(train_model(m, AdaptationDataset(utts), TrainOptions{}), FormatError);
}

TEST(Estimation, ZeroEpochsLeavesIdentity) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(0);
  auto set = declare_for_dataset(model, d, o);
  const auto report = estimate_transforms(model, d, transcript_tokens(model, d), set, o);
  EXPECT_EQ(report.objective.size(), 1u);
  for (const auto* t : set.all()) {
    for (double v : t->mean().value.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Estimation, CanonicalChecksumUnchangedAndObjectiveMonotone) {
  const auto& model = trained_baseline();
  const std::string before = model.params().checksum();
  const AdaptationDataset d = test_data();
  for (auto p : {adapt::Parameterization::kDeterministic, adapt::Parameterization::kVariational}) {
    EstimationOptions o = cfa_options(4);
    o.parameterization = p;
    o.prior.hub_sigma = 0.05;
    auto set = declare_for_dataset(model, d, o);
    const auto report = estimate_transforms(model, d, transcript_tokens(model, d), set, o);
    EXPECT_EQ(report.checksum_before, before);
    EXPECT_EQ(report.checksum_after, before);
    ASSERT_EQ(report.objective.size(), 5u);
    for (std::size_t e = 1; e < report.objective.size(); ++e) {
      EXPECT_LE(report.objective[e], report.objective[e - 1]);
    }
    EXPECT_LT(report.objective.back(), report.objective.front());
  }
  EXPECT_EQ(model.params().checksum(), before);
}

TEST(Estimation, AlternatingScheduleIsAlsoMonotone) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(3);
  o.schedule = EstimationSchedule::kAlternating;
  auto set = declare_for_dataset(model, d, o);
  const auto report = estimate_transforms(model, d, transcript_tokens(model, d), set, o);
  for (std::size_t e = 1; e < report.objective.size(); ++e) {
    EXPECT_LE(report.objective[e], report.objective[e - 1]);
  }
}

TEST(Estimation, DeterministicUnderSeed) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(2);
  o.parameterization = adapt::Parameterization::kVariational;
  o.samples = 2;
  auto a = declare_for_dataset(model, d, o);
  auto b = declare_for_dataset(model, d, o);
  const auto targets = transcript_tokens(model, d);
  estimate_transforms(model, d, targets, a, o);
  estimate_transforms(model, d, targets, b, o);
  const auto ta = a.all();
  const auto tb = b.all();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_TRUE(ta[i]->mean().value.bit_equal(tb[i]->mean().value));
    EXPECT_TRUE(ta[i]->log_sigma().value.bit_equal(tb[i]->log_sigma().value));
  }
}

TEST(Estimation, TransformWithoutDataNamesTheOwner) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(1);
  auto set = declare_for_dataset(model, d, o);
  set.add(OwnerType::kSpeaker, "ghost", TransformKind::kHub);
  try {
    estimate_transforms(model, d, transcript_tokens(model, d), set, o);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Estimation, GradientFlowsOnlyIntoOwnTransforms) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(1);
  auto set = declare_for_dataset(model, d, o);
  // Move off identity so every gradient is generic.
  for (auto* t : set.all()) {
    for (double& v : t->mean().value.values()) v = 0.01;
  }
  const auto targets = transcript_tokens(model, d);
  std::vector<adapt::AdaptItem> all;
  for (std::size_t i = 0; i < d.size(); ++i) {
    all.push_back({d[i].frames, false, targets[i], d[i].speaker_id, d[i].env_id});
  }
  adapt::ObjectiveOptions oo;
  oo.mode = o.mode;
  oo.normaliser = adapt::token_count(all);

  auto grads_from = [&](const std::vector<adapt::AdaptItem>& items) {
    for (auto* p : set.parameters()) p->zero_grad();
    adapt::evaluate_objective(model, items, set, oo, true);
    std::map<std::string, ad::Tensor> g;
    for (auto* t : set.all()) g[t->mean().id] = t->mean().grad;
    return g;
  };

  const auto full = grads_from(all);
  const std::string spk = d.speakers().front();
  const std::string env = d.environments().front();

  // One utterance touches its own two transforms and nothing else.
  const auto one = grads_from({all[d.cell(spk, env).front()]});
  for (auto* t : set.all()) {
    const bool own = (t->owner_type() == OwnerType::kSpeaker && t->owner_id() == spk) ||
                     (t->owner_type() == OwnerType::kEnvironment && t->owner_id() == env);
    double norm = 0.0;
    for (double v : one.at(t->mean().id).values()) norm += v * v;
    if (own) {
      EXPECT_GT(norm, 0.0) << t->owner_id();
    } else {
      EXPECT_EQ(norm, 0.0) << t->owner_id();
    }
  }

  // The speaker union alone reproduces the full-data gradient of r^s.
  std::vector<adapt::AdaptItem> spk_items;
  for (std::size_t i : d.speaker_union(spk)) spk_items.push_back(all[i]);
  const auto part = grads_from(spk_items);
  const std::string id = set.get(OwnerType::kSpeaker, spk).mean().id;
  for (std::size_t k = 0; k < full.at(id).numel(); ++k) {
    EXPECT_NEAR(part.at(id)[k], full.at(id)[k], 1e-12 * (1.0 + std::abs(full.at(id)[k])));
  }
}

TEST(TestTime, OnePassOrIdentityKeepsFirstPass) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  TestTimeOptions o;
  o.estimation = cfa_options(0);
  const auto zero = test_time_adapt(model, d, o);
  o.passes = 1;
  const auto one = test_time_adapt(model, d, o);
  ASSERT_EQ(zero.adapted.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(zero.adapted[i].tokens, zero.first_pass[i].tokens);
    EXPECT_EQ(zero.adapted[i].score, zero.first_pass[i].score);
    EXPECT_EQ(one.adapted[i].tokens, one.first_pass[i].tokens);
  }
  o.passes = 3;
  EXPECT_THROW(test_time_adapt(model, d, o), ConfigError);
}

TEST(TestTime, GivenLabelsEqualToPseudoLabelsGiveIdenticalOutput) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  TestTimeOptions o;
  o.estimation = cfa_options(2);
  const auto pseudo = test_time_adapt(model, d, o);

  auto utts = d.utterances();
  for (std::size_t i = 0; i < utts.size(); ++i) {
    ASSERT_FALSE(pseudo.first_pass[i].tokens.empty());
    utts[i].transcript = pseudo.first_pass[i].text;
  }
  o.supervision = Supervision::kGiven;
  const auto given = test_time_adapt(model, AdaptationDataset(utts), o);
  EXPECT_EQ(given.estimation.objective, pseudo.estimation.objective);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(given.adapted[i].tokens, pseudo.adapted[i].tokens);
    EXPECT_EQ(given.adapted[i].score, pseudo.adapted[i].score);
  }
}

TEST(Rapid, MatchedReproducesTestTimeDecode) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  TestTimeOptions o;
  o.estimation = cfa_options(2);
  const auto tt = test_time_adapt(model, d, o);
  const auto rapid =
      rapid_adapt_from_cache(model, tt.transforms, d, o.estimation.mode, Pairing::kMatched, o.decode, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(rapid.hypotheses[i].tokens, tt.adapted[i].tokens);
    EXPECT_EQ(rapid.hypotheses[i].score, tt.adapted[i].score);
    EXPECT_EQ(rapid.speaker_owner[i], d[i].speaker_id);
    EXPECT_EQ(rapid.env_owner[i], d[i].env_id);
  }

  const auto both = rapid_adapt_from_cache(model, tt.transforms, d, o.estimation.mode,
                                           Pairing::kBothMismatched, o.decode, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NE(both.speaker_owner[i], d[i].speaker_id);
    EXPECT_NE(both.env_owner[i], d[i].env_id);
  }
}

TEST(Rapid, CacheRoundTripDecodesIdentically) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(2);
  o.parameterization = adapt::Parameterization::kVariational;
  o.prior.hub_sigma = 0.05;
  auto set = declare_for_dataset(model, d, o);
  estimate_transforms(model, d, transcript_tokens(model, d), set, o);
  const auto path = std::filesystem::temp_directory_path() / "fsat_pipeline_cache.txt";
  adapt::save_transform_cache(path, set);
  const auto loaded = adapt::load_transform_cache(path);
  std::filesystem::remove(path);
  const asr::DecodeOptions dec;
  const auto a = rapid_adapt_from_cache(model, set, d, o.mode, Pairing::kMismatchedEnv, dec, 4);
  const auto b = rapid_adapt_from_cache(model, loaded, d, o.mode, Pairing::kMismatchedEnv, dec, 4);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(a.hypotheses[i].score, b.hypotheses[i].score);
    EXPECT_EQ(a.env_owner[i], b.env_owner[i]);
  }
}

TEST(Rapid, MissingOwnersAreErrors) {
  const auto& model = trained_baseline();
  const AdaptationDataset d = test_data();
  EstimationOptions o = cfa_options(0);
  adapt::TransformSet partial(model.config().model_dim, 0, adapt::Parameterization::kDeterministic);
  partial.add(OwnerType::kSpeaker, d[0].speaker_id, TransformKind::kHub);
  partial.add(OwnerType::kEnvironment, d[0].env_id, TransformKind::kHub);
  EXPECT_THROW(rapid_adapt_from_cache(model, partial, d, o.mode, Pairing::kMatched, {}, 1), StateError);
  const AdaptationDataset first = d.subset({0});
  EXPECT_THROW(rapid_adapt_from_cache(model, partial, first, o.mode, Pairing::kMismatchedEnv, {}, 1),
               StateError);
  EXPECT_THROW(rapid_adapt_from_cache(model, partial, first,
                                      AdaptationMode::joint_single(TransformKind::kHub),
                                      Pairing::kMismatchedEnv, {}, 1),
               ConfigError);
}

TEST(Study, ConfigRoundTrip) {
  const StudySpec s = StudySpec::defaults();
  const KeyValueConfig kv = s.to_config();
  EXPECT_EQ(StudySpec::from_config(kv).to_config().to_string(), kv.to_string());
  KeyValueConfig bad;
  bad.set("model.feature_dim", 12LL);
  EXPECT_THROW(StudySpec::from_config(bad), ConfigError);
}

}  // namespace
}  // namespace fsat::pipeline
