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

#include "fsat/pipeline/study.hpp"

#include <cstdio>

#include "fsat/error.hpp"
#include "fsat/eval/scoring.hpp"
#include "fsat/pipeline/test_time.hpp"
#include "fsat/seed.hpp"

namespace fsat::pipeline {

StudySpec StudySpec::defaults() {
  StudySpec s;
  s.task.speaker_slope = 0.8;
  s.task.speaker_ripple = 0.9;
  s.task.env_scale = 2.0;
  s.task.frame_jitter = 0.1;
  s.task.min_noise = 0.05;
  s.task.max_noise = 0.15;
  s.model.feature_dim = s.task.feature_dim;
  s.model.subsample_channels = 4;
  s.model.encoder_blocks = 2;
  s.model.decoder_blocks = 1;
  s.model.model_dim = 32;
  s.model.heads = 2;
  s.model.ff_dim = 64;
  s.model.conv_kernel = 5;
  s.model.alphabet = s.task.alphabet;
  return s;
}

StudySpec StudySpec::from_config(const KeyValueConfig& kv) {
  StudySpec s = defaults();
  KeyValueConfig base = s.to_config();
  for (const auto& [k, v] : kv.entries()) base.set(k, v);
  s.task = SyntheticTaskSpec::from_config(base, "task.");
  s.train_speakers = base.get_size("study.train_speakers", s.train_speakers);
  s.train_environments = base.get_size("study.train_environments", s.train_environments);
  s.train_utterances = base.get_size("study.train_utterances", s.train_utterances);
  s.test_speakers = base.get_size("study.test_speakers", s.test_speakers);
  s.test_seen_environments = base.get_size("study.test_seen_environments", s.test_seen_environments);
  s.test_unseen_environments =
      base.get_size("study.test_unseen_environments", s.test_unseen_environments);
  s.test_utterances = base.get_size("study.test_utterances", s.test_utterances);
  s.cache_utterances = base.get_size("study.cache_utterances", s.cache_utterances);
  s.lfa_beta = base.get_double("study.lfa_beta", s.lfa_beta);
  s.supervision = parse_supervision(base.get_string("study.supervision", supervision_name(s.supervision)));
  s.model = asr::ModelConfig::from_config(base, "model.");
  s.train.epochs = base.get_size("train.epochs", s.train.epochs);
  s.train.batch_size = base.get_size("train.batch_size", s.train.batch_size);
  s.train.adam.learning_rate = base.get_double("train.lr", s.train.adam.learning_rate);
  s.train.spec_augment = base.get_bool("train.spec_augment", s.train.spec_augment);
  s.estimation = EstimationOptions::from_config(base, "adapt.");
  s.decode.beam = base.get_size("decode.beam", s.decode.beam);
  s.decode.ctc_weight = base.get_double("decode.ctc_weight", s.decode.ctc_weight);
  if (s.model.feature_dim != s.task.feature_dim || s.model.alphabet != s.task.alphabet) {
    throw ConfigError("study: model feature_dim and alphabet must match the task");
  }
  if (s.test_seen_environments > s.train_environments) {
    throw ConfigError("study: more seen test environments than training environments");
  }
  return s;
}

KeyValueConfig StudySpec::to_config() const {
  KeyValueConfig kv;
  task.to_config(kv, "task.");
  kv.set_size("study.train_speakers", train_speakers);
  kv.set_size("study.train_environments", train_environments);
  kv.set_size("study.train_utterances", train_utterances);
  kv.set_size("study.test_speakers", test_speakers);
  kv.set_size("study.test_seen_environments", test_seen_environments);
  kv.set_size("study.test_unseen_environments", test_unseen_environments);
  kv.set_size("study.test_utterances", test_utterances);
  kv.set_size("study.cache_utterances", cache_utterances);
  kv.set("study.lfa_beta", lfa_beta);
  kv.set("study.supervision", std::string(supervision_name(supervision)));
  model.to_config(kv, "model.");
  kv.set_size("train.epochs", train.epochs);
  kv.set_size("train.batch_size", train.batch_size);
  kv.set("train.lr", train.adam.learning_rate);
  kv.set("train.spec_augment", train.spec_augment);
  estimation.to_config(kv, "adapt.");
  kv.set_size("decode.beam", decode.beam);
  kv.set("decode.ctc_weight", decode.ctc_weight);
  return kv;
}

const std::vector<std::string>& study_systems() {
  static const std::vector<std::string> names{
      "baseline",     "speaker-lhuc", "speaker-hub", "lfa",          "cfa-hub-hub",
      "bayes-cfa-hub-hub", "rapid-matched", "rapid-mm-env", "rapid-mm-spk", "rapid-mm-both"};
  return names;
}

namespace {

std::vector<frontend::FeatureSequence> split(const StudySpec& s, std::uint64_t task_seed,
                                             const std::string& name, std::size_t spk_offset,
                                             std::size_t speakers, std::size_t env_offset,
                                             std::size_t envs, std::size_t utts) {
  SyntheticTaskSpec t = s.task;
  t.seed = task_seed;
  t.split = name;
  t.speaker_offset = spk_offset;
  t.speakers = speakers;
  t.environment_offset = env_offset;
  t.environments = envs;
  t.utterances_per_cell = utts;
  return generate_synthetic_corpus(t).utterances;
}

double token_error_rate(const AdaptationDataset& data, const std::vector<asr::Hypothesis>& hyps) {
  eval::ErrorCounts c;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ref = eval::char_tokens(*data[i].transcript);
    const auto hyp = eval::char_tokens(hyps[i].text);
    c += eval::edit_align(ref, hyp).counts;
  }
  return eval::error_rate(c);
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) return false;
  }
  return true;
}

}  // namespace

StudyOutcome run_study(const StudySpec& s, std::uint64_t seed,
                       const std::function<void(const std::string&)>& log) {
  auto note = [&](const std::string& m) {
    if (log) log(m);
  };
  const std::uint64_t task_seed = derive_seed(seed, "task");
  AdaptationDataset train(split(s, task_seed, "train", 0, s.train_speakers, 0,
                                s.train_environments, s.train_utterances));
  auto test_utts = split(s, task_seed, "test", s.train_speakers, s.test_speakers, 0,
                         s.test_seen_environments, s.test_utterances);
  auto cache_utts = split(s, task_seed, "cache", s.train_speakers, s.test_speakers, 0,
                          s.test_seen_environments, s.cache_utterances);
  if (s.test_unseen_environments > 0) {
    auto more = split(s, task_seed, "test", s.train_speakers, s.test_speakers,
                      s.train_environments, s.test_unseen_environments, s.test_utterances);
    test_utts.insert(test_utts.end(), more.begin(), more.end());
    more = split(s, task_seed, "cache", s.train_speakers, s.test_speakers, s.train_environments,
                 s.test_unseen_environments, s.cache_utterances);
    cache_utts.insert(cache_utts.end(), more.begin(), more.end());
  }
  AdaptationDataset test(std::move(test_utts));
  AdaptationDataset cache_data(std::move(cache_utts));

  StudyOutcome out;
  asr::ConformerModel model(s.model, derive_seed(seed, "init"));
  TrainOptions topt = s.train;
  topt.seed = derive_seed(seed, "train");
  out.train_loss = train_model(model, train, topt).epoch_loss;
  note("trained: final loss " + std::to_string(out.train_loss.empty() ? 0.0 : out.train_loss.back()));

  auto record = [&](const std::string& name, const std::vector<asr::Hypothesis>& hyps) {
    out.error_rate[name] = token_error_rate(test, hyps);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-18s TER %.2f%%", name.c_str(), out.error_rate[name]);
    note(buf);
  };

  auto adapt_with = [&](const std::string& name, adapt::AdaptationMode mode,
                        adapt::Parameterization param, const AdaptationDataset& data) {
    TestTimeOptions o;
    o.estimation = s.estimation;
    o.estimation.mode = mode;
    o.estimation.parameterization = param;
    o.estimation.seed = derive_seed(seed, name);
    o.decode = s.decode;
    o.supervision = s.supervision;
    TestTimeResult r = test_time_adapt(model, data, o);
    std::string trace = name + " objective";
    for (double v : r.estimation.objective) trace += " " + std::to_string(v);
    trace += " steps";
    for (double v : r.estimation.step_sizes) trace += " " + std::to_string(v);
    note(trace);
    out.canonical_frozen &= r.estimation.checksum_before == r.estimation.checksum_after;
    out.monotone &= s.estimation.optimizer != EstimationOptimizer::kFullBatchDescent ||
                    non_increasing(r.estimation.objective);
    return r;
  };

  using adapt::AdaptationMode;
  using adapt::Parameterization;
  using adapt::TransformKind;
  const auto det = Parameterization::kDeterministic;
  TestTimeResult r = adapt_with("speaker-lhuc", AdaptationMode::speaker_only(TransformKind::kLhuc),
                                det, test);
  record("baseline", r.first_pass);
  record("speaker-lhuc", r.adapted);
  record("speaker-hub",
         adapt_with("speaker-hub", AdaptationMode::speaker_only(TransformKind::kHub), det, test)
             .adapted);
  record("lfa", adapt_with("lfa", AdaptationMode::lfa(s.lfa_beta), det, test).adapted);
  const AdaptationMode cfa = AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub);
  record("cfa-hub-hub", adapt_with("cfa-hub-hub", cfa, det, test).adapted);
  record("bayes-cfa-hub-hub",
         adapt_with("bayes-cfa-hub-hub", cfa, Parameterization::kVariational, test).adapted);

  TestTimeResult cached = adapt_with("cache", cfa, det, cache_data);
  for (Pairing p : {Pairing::kMatched, Pairing::kMismatchedEnv, Pairing::kMismatchedSpeaker,
                    Pairing::kBothMismatched}) {
    auto rr = rapid_adapt_from_cache(model, cached.transforms, test, cfa, p, s.decode,
                                     derive_seed(seed, "pairing"));
    record(std::string("rapid-") + pairing_name(p), rr.hypotheses);
  }
  return out;
}

}  // namespace fsat::pipeline
