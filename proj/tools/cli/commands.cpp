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

#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cli/selfcheck.hpp"
#include "fsat/adapt/transforms.hpp"
#include "fsat/asr/model.hpp"
#include "fsat/autodiff/parameter_store.hpp"
#include "fsat/config_io.hpp"
#include "fsat/eval/scoring.hpp"
#include "fsat/frontend/archive.hpp"
#include "fsat/frontend/logmel.hpp"
#include "fsat/frontend/waveform.hpp"
#include "fsat/noise/mixer.hpp"
#include "fsat/noise/noise_bank.hpp"
#include "fsat/pipeline/estimation.hpp"
#include "fsat/pipeline/study.hpp"
#include "fsat/pipeline/synthetic.hpp"
#include "fsat/pipeline/test_time.hpp"
#include "fsat/pipeline/training.hpp"
#include "fsat/seed.hpp"

namespace fsat::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return kExitConfig;
    case ErrorCategory::kIo: return kExitIo;
    case ErrorCategory::kFormat: return kExitFormat;
    case ErrorCategory::kShape: return kExitShape;
    case ErrorCategory::kDomain: return kExitDomain;
    case ErrorCategory::kNumeric: return kExitNumeric;
    case ErrorCategory::kState: return kExitState;
  }
  return kExitInternal;
}

void write_hypotheses(const fs::path& path, const std::vector<std::string>& ids,
                      const std::vector<asr::Hypothesis>& hyps) {
  if (ids.size() != hyps.size()) throw ShapeError("write_hypotheses: id and hypothesis counts differ");
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "# fsat-hypotheses " << kHypothesisFormatVersion << "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    f << ids[i] << '\t' << hyps[i].text << '\t' << format_exact(hyps[i].score) << '\n';
  }
}

std::vector<HypothesisLine> read_hypotheses(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  std::vector<HypothesisLine> out;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    if (line[0] == '#') {
      int version = 0;
      if (std::sscanf(line.c_str(), "# fsat-hypotheses %d", &version) == 1) {
        if (version != kHypothesisFormatVersion) {
          throw FormatError(path.string() + ": unsupported hypothesis format version " +
                            std::to_string(version));
        }
        header = true;
      }
      continue;
    }
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": expected utt<TAB>text<TAB>score");
    }
    HypothesisLine h{line.substr(0, a), line.substr(a + 1, b - a - 1), 0.0};
    try {
      h.score = std::stod(line.substr(b + 1));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": bad score");
    }
    out.push_back(std::move(h));
  }
  if (!header) throw FormatError(path.string() + ": missing '# fsat-hypotheses' header");
  return out;
}

namespace {

// --- configuration layering ---------------------------------------------------

/// Collects explicit flag values; applied last, over the config file and --set.
class Overrides {
 public:
  template <typename T>
  void option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto slot = std::make_shared<std::optional<T>>();
    app->add_option(flag, *slot, help + " [" + key + "]");
    apply_.push_back([slot, key](KeyValueConfig& kv) {
      if (!*slot) return;
      if constexpr (std::is_same_v<T, std::string>) {
        kv.set(key, **slot);
      } else if constexpr (std::is_same_v<T, double>) {
        kv.set(key, **slot);
      } else {
        kv.set(key, static_cast<long long>(**slot));
      }
    });
  }

  void flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto slot = std::make_shared<bool>(false);
    app->add_flag(flag, *slot, help + " [" + key + " = true]");
    apply_.push_back([slot, key](KeyValueConfig& kv) {
      if (*slot) kv.set(key, true);
    });
  }

  void apply(KeyValueConfig& kv) const {
    for (const auto& f : apply_) f(kv);
  }

 private:
  std::vector<std::function<void(KeyValueConfig&)>> apply_;
};

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  Overrides overrides;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "flat key = value config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override one config key, key=value (repeatable)");
  auto* out = app->add_option("--out", c.out, "run directory to create");
  if (needs_out) out->required();
  c.overrides.option<long long>(app, "--seed", "seed", "root seed");
}

/// Estimation defaults without the transform kinds, which follow the mode.
KeyValueConfig estimation_defaults() {
  KeyValueConfig all;
  pipeline::EstimationOptions().to_config(all, "adapt.");
  KeyValueConfig kv;
  for (const auto& [k, v] : all.entries()) {
    if (k != "adapt.spk_kind" && k != "adapt.env_kind") kv.set(k, v);
  }
  return kv;
}

void merge(KeyValueConfig& into, const KeyValueConfig& from) {
  for (const auto& [k, v] : from.entries()) into.set(k, v);
}

KeyValueConfig assemble(const Common& c, const KeyValueConfig& defaults) {
  KeyValueConfig kv = defaults;
  if (!c.config.empty()) {
    merge(kv, KeyValueConfig::load(c.config));
  }
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string x) {
      const auto b = x.find_first_not_of(" \t");
      const auto e = x.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : x.substr(b, e - b + 1);
    };
    kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  c.overrides.apply(kv);
  return kv;
}

std::uint64_t root_seed(const KeyValueConfig& kv) {
  const long long s = kv.get_int("seed", 1);
  if (s < 0) throw ConfigError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

// --- run directories ----------------------------------------------------------

class RunDir {
 public:
  RunDir(const std::string& verb, const std::string& out, const KeyValueConfig& kv,
         const std::map<std::string, std::uint64_t>& seeds)
      : dir_(out) {
    fs::create_directories(dir_);
    kv.save(dir_ / "config.cfg");
    std::ofstream s(dir_ / "seed.txt");
    s << "root " << root_seed(kv) << "\n";
    for (const auto& [name, value] : seeds) s << name << ' ' << value << "\n";
    if (!s) throw IoError("cannot write " + (dir_ / "seed.txt").string());
    summary_ << "# fsat-run-summary " << kRunSummaryVersion << "\n";
    summary_ << "verb " << verb << "\n";
  }

  const fs::path& path() const { return dir_; }
  fs::path operator/(const std::string& name) const { return dir_ / name; }
  std::ostream& summary() { return summary_; }

  void finish() {
    std::ofstream f(dir_ / "summary.txt");
    f << summary_.str();
    if (!f) throw IoError("cannot write " + (dir_ / "summary.txt").string());
  }

 private:
  fs::path dir_;
  std::ostringstream summary_;
};

std::string fmt(double v) { return format_exact(v); }

// --- shared loading -------------------------------------------------------------

struct LoadedData {
  std::vector<frontend::ManifestEntry> entries;
  pipeline::AdaptationDataset data;
};

LoadedData load_manifest_data(const std::string& manifest) {
  if (manifest.empty()) throw ConfigError("data.manifest is not set (use --manifest)");
  const fs::path p(manifest);
  if (!fs::exists(p)) throw IoError("manifest not found: " + manifest);
  LoadedData d;
  d.entries = frontend::read_manifest(p);
  d.data = pipeline::AdaptationDataset(frontend::load_features(d.entries, p.parent_path()));
  if (d.data.empty()) throw FormatError("manifest " + manifest + " lists no utterances");
  return d;
}

std::unique_ptr<asr::ConformerModel> load_model(const std::string& dir) {
  if (dir.empty()) throw ConfigError("data.model is not set (use --model)");
  const fs::path d(dir);
  if (!fs::exists(d / "model.cfg") || !fs::exists(d / "model.ckpt")) {
    throw IoError("model directory " + dir + " needs model.cfg and model.ckpt");
  }
  const auto config = asr::ModelConfig::from_config(KeyValueConfig::load(d / "model.cfg"), "model.");
  return std::make_unique<asr::ConformerModel>(config, ad::load_checkpoint(d / "model.ckpt"));
}

void save_model(const fs::path& dir, const asr::ConformerModel& model) {
  KeyValueConfig kv;
  model.config().to_config(kv, "model.");
  kv.save(dir / "model.cfg");
  ad::save_checkpoint(dir / "model.ckpt", model.params());
}

asr::DecodeOptions decode_options(const KeyValueConfig& kv) {
  asr::DecodeOptions o;
  o.beam = kv.get_size("decode.beam", o.beam);
  o.ctc_weight = kv.get_double("decode.ctc_weight", o.ctc_weight);
  o.max_length = kv.get_size("decode.max_length", o.max_length);
  if (o.beam == 0) throw ConfigError("decode.beam must be >= 1");
  return o;
}

KeyValueConfig decode_defaults() {
  KeyValueConfig kv;
  const asr::DecodeOptions o;
  kv.set_size("decode.beam", o.beam);
  kv.set("decode.ctc_weight", o.ctc_weight);
  kv.set_size("decode.max_length", o.max_length);
  return kv;
}

std::vector<std::string> ids_of(const pipeline::AdaptationDataset& d) {
  std::vector<std::string> ids;
  for (const auto& u : d.utterances()) ids.push_back(u.utterance_id);
  return ids;
}

/// Token error rate over utterances with references, or nullopt when none has one.
std::optional<eval::ErrorCounts> score_against(const pipeline::AdaptationDataset& d,
                                               const std::vector<asr::Hypothesis>& hyps) {
  eval::ErrorCounts total;
  bool any = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!d[i].transcript) continue;
    any = true;
    total += eval::edit_align(eval::char_tokens(*d[i].transcript), eval::char_tokens(hyps[i].text)).counts;
  }
  if (!any || total.reference_tokens == 0) return std::nullopt;
  return total;
}

void report_rate(std::ostream& s, std::ostream& out, const std::string& label,
                 const std::optional<eval::ErrorCounts>& c) {
  if (!c) return;
  const double rate = eval::error_rate(*c);
  s << label << ' ' << fmt(rate) << " (S " << c->substitutions << " D " << c->deletions << " I "
    << c->insertions << " N " << c->reference_tokens << ")\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s %.2f%%\n", label.c_str(), rate);
  out << buf;
}

double vector_norm(const ad::Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

void report_transforms(std::ostream& s, const adapt::TransformSet& set) {
  for (const auto* t : set.all()) {
    s << "transform " << adapt::owner_type_name(t->owner_type()) << ' ' << t->owner_id() << ' '
      << adapt::kind_name(t->kind()) << " mean_norm " << fmt(vector_norm(t->mean().value));
    if (t->variational()) s << " mean_sigma " << fmt(vector_norm(t->sigma()) / std::sqrt(double(t->dim())));
    s << "\n";
  }
}

std::vector<double> parse_snrs(const std::string& text) { return parse_double_list(text); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string safe_file_name(std::string id) {
  for (char& c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return id;
}

// --- verbs ----------------------------------------------------------------------

int cmd_synth(const Common& c, std::ostream& out) {
  KeyValueConfig defaults;
  pipeline::StudySpec::defaults().task.to_config(defaults, "task.");
  defaults.set("seed", 1LL);
  KeyValueConfig kv = assemble(c, defaults);
  pipeline::SyntheticTaskSpec task = pipeline::SyntheticTaskSpec::from_config(kv, "task.");
  // The root seed names the language; splits sharing it share the language.
  task.seed = derive_seed(root_seed(kv), "task");
  RunDir run("synth", c.out, kv, {{"task", task.seed}});
  const auto corpus = pipeline::generate_synthetic_corpus(task);
  frontend::write_feature_archive(run / "features.fsf", corpus.utterances);
  std::vector<frontend::ManifestEntry> entries;
  for (const auto& u : corpus.utterances) {
    entries.push_back({u.utterance_id, u.speaker_id, u.env_id, "features.fsf", u.transcript.value_or(""), {}});
  }
  frontend::write_manifest(run / "manifest.tsv", entries);
  run.summary() << "utterances " << corpus.utterances.size() << "\n";
  run.summary() << "speakers " << corpus.truth.speaker_ids.size() << "\n";
  run.summary() << "environments " << corpus.truth.env_ids.size() << "\n";
  run.finish();
  out << "wrote " << corpus.utterances.size() << " utterances to " << (run / "manifest.tsv").string()
      << "\n";
  return kExitOk;
}

int cmd_simulate_noise(const Common& c, std::ostream& out) {
  KeyValueConfig defaults;
  defaults.set("noise.mode", std::string("nonaug"));
  defaults.set("noise.snr_set", std::string("-5,0,5,10,20"));
  defaults.set("noise.train_snr_set", std::string("-5,0,5,10,20"));
  defaults.set("noise.seconds", 10.0);
  defaults.set("seed", 1LL);
  const frontend::LogMelConfig mel;
  defaults.set("frontend.frame_length_ms", mel.frame_length_ms);
  defaults.set("frontend.frame_shift_ms", mel.frame_shift_ms);
  defaults.set_size("frontend.mel_bins", mel.mel_bins);
  defaults.set_size("frontend.fft_size", mel.fft_size);
  KeyValueConfig kv = assemble(c, defaults);

  const std::string mode = kv.get_string("noise.mode", "nonaug");
  if (mode != "nonaug" && mode != "aug") throw ConfigError("noise.mode must be nonaug or aug");
  const auto snrs = parse_snrs(kv.get_string("noise.snr_set", ""));
  const auto train_snrs = parse_snrs(kv.get_string("noise.train_snr_set", ""));
  const std::string clean_path = kv.get_string("data.clean", "");
  if (clean_path.empty()) throw ConfigError("data.clean is not set (use --clean)");
  if (!fs::exists(clean_path)) throw IoError("clean manifest not found: " + clean_path);
  const auto clean = frontend::read_manifest(clean_path);
  if (clean.empty()) throw FormatError("clean manifest lists no utterances");
  const fs::path clean_dir = fs::path(clean_path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? clean_dir / p : fs::path(p); };

  std::map<std::string, frontend::Waveform> waves;
  for (const auto& e : clean) waves.emplace(e.utterance_id, frontend::read_wav(resolve(e.path)));
  const double rate = waves.begin()->second.sample_rate;

  const std::uint64_t root = root_seed(kv);
  const std::string noise_dir = kv.get_string("noise.dir", "");
  std::vector<std::string> train_noises = split_list(kv.get_string("noise.train_noises", ""));
  std::vector<noise::NoiseProfile> bank;
  if (noise_dir.empty()) {
    if (train_noises.empty()) {
      const auto& ids = noise::builtin_noise_ids();
      train_noises.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2));
    }
    bank = noise::builtin_noise_bank(rate, kv.get_double("noise.seconds", 10.0),
                                     derive_seed(root, "noise-bank"), train_noises);
  } else {
    if (!fs::is_directory(noise_dir)) throw IoError("noise directory not found: " + noise_dir);
    bank = noise::load_noise_dir(noise_dir, train_noises);
    if (train_noises.empty()) {
      for (auto& n : bank) {
        n.seen_in_training = true;
        train_noises.push_back(n.noise_id);
      }
    }
  }
  const auto training = noise::ConditionSet::cross(train_noises, train_snrs);
  const std::uint64_t plan_seed = derive_seed(root, "conditions");
  const auto plan = mode == "aug" ? noise::build_augmented_corpus(clean, bank, snrs, training, plan_seed)
                                  : noise::build_nonaugmented_corpus(clean, bank, snrs, training, plan_seed);

  frontend::LogMelConfig config;
  config.frame_length_ms = kv.get_double("frontend.frame_length_ms", config.frame_length_ms);
  config.frame_shift_ms = kv.get_double("frontend.frame_shift_ms", config.frame_shift_ms);
  config.mel_bins = kv.get_size("frontend.mel_bins", config.mel_bins);
  config.fft_size = kv.get_size("frontend.fft_size", config.fft_size);
  frontend::extract_logmel(waves.begin()->second, config);  // rejects a bad frontend config early

  RunDir run("simulate-noise", c.out, kv, {{"noise-bank", derive_seed(root, "noise-bank")}, {"conditions", plan_seed}});
  fs::create_directories(run / "wav");

  std::map<std::string, const noise::NoiseProfile*> by_id;
  for (const auto& n : bank) by_id[n.noise_id] = &n;
  std::vector<frontend::FeatureSequence> features;
  std::vector<frontend::ManifestEntry> entries;
  std::size_t seen = 0, wrapped = 0;
  double worst = 0.0;
  for (const auto& p : plan) {
    const auto& wave = waves.at(p.clean.utterance_id);
    const auto& profile = *by_id.at(p.spec.noise_id);
    const auto mixed = noise::mix_at_snr(wave, profile, p.spec, training);
    worst = std::max(worst, std::abs(noise::remeasure_snr_db(wave, profile, mixed) - p.spec.snr_db));
    const std::string id = noise::corrupted_utterance_id(p.clean.utterance_id, mixed.env_id);
    frontend::write_wav(run / ("wav/" + safe_file_name(id) + ".wav"), mixed.mixed);
    frontend::FeatureSequence f{id, p.clean.speaker_id, mixed.env_id,
                                frontend::extract_logmel(mixed.mixed, config), std::nullopt};
    if (!p.clean.transcript.empty()) f.transcript = p.clean.transcript;
    features.push_back(std::move(f));
    entries.push_back({id, p.clean.speaker_id, mixed.env_id, "features.fsf", p.clean.transcript,
                       frontend::NoiseCondition{p.spec.noise_id, p.spec.snr_db, mixed.seen}});
    seen += mixed.seen;
    wrapped += mixed.wrapped;
  }
  frontend::write_feature_archive(run / "features.fsf", features);
  frontend::write_manifest(run / "manifest.tsv", entries);
  run.summary() << "mode " << mode << "\nutterances " << entries.size() << "\nseen " << seen
                << "\nwrapped " << wrapped << "\nmax_snr_error_db " << fmt(worst) << "\n";
  run.finish();
  out << "wrote " << entries.size() << " corrupted utterances (" << seen << " seen) to "
      << (run / "manifest.tsv").string() << "\n";
  return kExitOk;
}

KeyValueConfig train_defaults() {
  KeyValueConfig kv;
  const auto spec = pipeline::StudySpec::defaults();
  spec.model.to_config(kv, "model.");
  // Filled from the data unless set explicitly.
  KeyValueConfig trimmed;
  for (const auto& [k, v] : kv.entries()) {
    if (k != "model.feature_dim" && k != "model.alphabet") trimmed.set(k, v);
  }
  const pipeline::TrainOptions t;
  trimmed.set_size("train.epochs", t.epochs);
  trimmed.set_size("train.batch_size", t.batch_size);
  trimmed.set("train.lr", t.adam.learning_rate);
  trimmed.set("train.spec_augment", t.spec_augment);
  trimmed.set("train.adaptive", false);
  trimmed.set("seed", 1LL);
  return trimmed;
}

int cmd_train(const Common& c, std::ostream& out) {
  KeyValueConfig kv = assemble(c, train_defaults());
  const LoadedData d = load_manifest_data(kv.get_string("data.manifest", ""));
  if (!kv.contains("model.feature_dim")) kv.set_size("model.feature_dim", d.data[0].frames.shape()[1]);
  if (!kv.contains("model.alphabet")) {
    std::set<char> chars;
    for (const auto& u : d.data.utterances()) {
      if (u.transcript) chars.insert(u.transcript->begin(), u.transcript->end());
    }
    kv.set("model.alphabet", std::string(chars.begin(), chars.end()));
  }
  const bool adaptive = kv.get_bool("train.adaptive", false);
  if (adaptive) {
    const KeyValueConfig est = estimation_defaults();
    for (const auto& [k, v] : est.entries()) {
      if (!kv.contains(k)) kv.set(k, v);
    }
  }
  const auto config = asr::ModelConfig::from_config(kv, "model.");
  const std::uint64_t root = root_seed(kv);
  pipeline::TrainOptions t;
  t.epochs = kv.get_size("train.epochs", t.epochs);
  t.batch_size = kv.get_size("train.batch_size", t.batch_size);
  t.adam.learning_rate = kv.get_double("train.lr", t.adam.learning_rate);
  t.spec_augment = kv.get_bool("train.spec_augment", t.spec_augment);
  t.seed = derive_seed(root, "train");
  const std::uint64_t init = derive_seed(root, "model-init");

  RunDir run("train", c.out, kv, {{"model-init", init}, {"train", t.seed}});
  asr::ConformerModel model(config, init);
  t.on_epoch = [&](std::size_t epoch, double loss) {
    run.summary() << "epoch " << epoch + 1 << " loss " << fmt(loss) << "\n";
  };
  if (adaptive) {
    const auto est = pipeline::EstimationOptions::from_config(kv, "adapt.");
    auto result = pipeline::adaptive_train(model, d.data, est.mode, t, est.layer);
    result.transforms.provenance.corpus = "adaptive-training";
    result.transforms.provenance.epochs = t.epochs;
    if (!result.report.epoch_loss.empty()) result.transforms.provenance.objective = result.report.epoch_loss.back();
    adapt::save_transform_cache(run / "transforms.cache", result.transforms);
    report_transforms(run.summary(), result.transforms);
  } else {
    pipeline::train_model(model, d.data, t);
  }
  save_model(run.path(), model);
  run.summary() << "parameters " << model.params().total_values() << "\n";
  run.summary() << "checksum " << model.params().checksum() << "\n";
  run.finish();
  out << "trained " << model.params().total_values() << " parameters on " << d.data.size()
      << " utterances; model in " << run.path().string() << "\n";
  return kExitOk;
}

KeyValueConfig adapt_defaults() {
  KeyValueConfig kv;
  merge(kv, estimation_defaults());
  kv.set_size("adapt.passes", 2);
  kv.set("adapt.supervision", std::string("pseudo"));
  merge(kv, decode_defaults());
  kv.set("seed", 1LL);
  return kv;
}

int cmd_decode(const Common& c, std::ostream& out) {
  KeyValueConfig defaults = decode_defaults();
  merge(defaults, estimation_defaults());
  defaults.set("seed", 1LL);
  KeyValueConfig kv = assemble(c, defaults);
  const auto model = load_model(kv.get_string("data.model", ""));
  const LoadedData d = load_manifest_data(kv.get_string("data.manifest", ""));
  const auto options = decode_options(kv);
  const std::string cache_path = kv.get_string("data.cache", "");
  RunDir run("decode", c.out, kv, {});
  std::vector<asr::Hypothesis> hyps;
  if (cache_path.empty()) {
    hyps = pipeline::decode_dataset(*model, d.data, nullptr, {}, options);
  } else {
    if (!fs::exists(cache_path)) throw IoError("transform cache not found: " + cache_path);
    auto cache = adapt::load_transform_cache(cache_path).posterior_mean();
    const auto est = pipeline::EstimationOptions::from_config(kv, "adapt.");
    hyps = pipeline::decode_dataset(*model, d.data, &cache, est.mode, options);
    run.summary() << "cache " << cache_path << "\nmode " << est.mode.describe() << "\n";
  }
  write_hypotheses(run / "hypotheses.hyp", ids_of(d.data), hyps);
  run.summary() << "utterances " << d.data.size() << "\n";
  report_rate(run.summary(), out, "ter", score_against(d.data, hyps));
  run.finish();
  return kExitOk;
}

int cmd_adapt(const Common& c, std::ostream& out) {
  KeyValueConfig kv = assemble(c, adapt_defaults());
  const auto model = load_model(kv.get_string("data.model", ""));
  const LoadedData d = load_manifest_data(kv.get_string("data.manifest", ""));
  const std::uint64_t root = root_seed(kv);
  pipeline::TestTimeOptions o;
  // Seeds come from the root unless adapt.seed is set explicitly.
  o.estimation = pipeline::EstimationOptions::from_config(kv, "adapt.");
  o.estimation.seed = derive_seed(root, "estimation");
  o.decode = decode_options(kv);
  o.passes = kv.get_size("adapt.passes", 2);
  o.supervision = pipeline::parse_supervision(kv.get_string("adapt.supervision", "pseudo"));
  RunDir run("adapt", c.out, kv, {{"estimation", o.estimation.seed}});

  const auto result = pipeline::test_time_adapt(*model, d.data, o);
  const auto ids = ids_of(d.data);
  write_hypotheses(run / "first_pass.hyp", ids, result.first_pass);
  write_hypotheses(run / "adapted.hyp", ids, result.adapted);
  adapt::TransformSet transforms = result.transforms;
  transforms.provenance.corpus = safe_file_name(kv.get_string("data.manifest", "unknown"));
  transforms.provenance.epochs = o.estimation.epochs;
  if (!result.estimation.objective.empty()) transforms.provenance.objective = result.estimation.objective.back();
  adapt::save_transform_cache(run / "transforms.cache", transforms);

  auto& s = run.summary();
  s << "mode " << o.estimation.mode.describe() << "\n";
  s << "parameterization " << adapt::parameterization_name(o.estimation.parameterization) << "\n";
  s << "supervision " << pipeline::supervision_name(o.supervision) << "\npasses " << o.passes << "\n";
  for (std::size_t e = 0; e < result.estimation.objective.size(); ++e) {
    s << "objective " << e << ' ' << fmt(result.estimation.objective[e]) << "\n";
  }
  for (double step : result.estimation.step_sizes) s << "step " << fmt(step) << "\n";
  s << "skipped " << result.estimation.skipped << "\n";
  s << "checksum_before " << result.estimation.checksum_before << "\n";
  s << "checksum_after " << result.estimation.checksum_after << "\n";
  report_transforms(s, result.transforms);
  report_rate(s, out, "first_pass_ter", score_against(d.data, result.first_pass));
  report_rate(s, out, "adapted_ter", score_against(d.data, result.adapted));
  run.finish();
  return kExitOk;
}

int cmd_rapid(const Common& c, std::ostream& out) {
  KeyValueConfig defaults = decode_defaults();
  merge(defaults, estimation_defaults());
  defaults.set("adapt.pairing", std::string("matched"));
  defaults.set("seed", 1LL);
  KeyValueConfig kv = assemble(c, defaults);
  const auto model = load_model(kv.get_string("data.model", ""));
  const LoadedData d = load_manifest_data(kv.get_string("data.manifest", ""));
  const std::string cache_path = kv.get_string("data.cache", "");
  if (cache_path.empty()) throw ConfigError("data.cache is not set (use --cache)");
  if (!fs::exists(cache_path)) throw IoError("transform cache not found: " + cache_path);
  const auto cache = adapt::load_transform_cache(cache_path);
  const auto est = pipeline::EstimationOptions::from_config(kv, "adapt.");
  const auto pairing = pipeline::parse_pairing(kv.get_string("adapt.pairing", "matched"));
  const std::uint64_t seed = derive_seed(root_seed(kv), "pairing");
  RunDir run("rapid-adapt", c.out, kv, {{"pairing", seed}});
  const auto r = pipeline::rapid_adapt_from_cache(*model, cache, d.data, est.mode, pairing,
                                                  decode_options(kv), seed);
  write_hypotheses(run / "hypotheses.hyp", ids_of(d.data), r.hypotheses);
  auto& s = run.summary();
  s << "mode " << est.mode.describe() << "\npairing " << pipeline::pairing_name(pairing) << "\n";
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    s << "owners " << d.data[i].utterance_id << ' ' << (r.speaker_owner[i].empty() ? "-" : r.speaker_owner[i])
      << ' ' << (r.env_owner[i].empty() ? "-" : r.env_owner[i]) << "\n";
  }
  report_rate(s, out, "ter", score_against(d.data, r.hypotheses));
  run.finish();
  return kExitOk;
}

int cmd_score(const Common& c, std::ostream& out) {
  KeyValueConfig defaults;
  defaults.set("score.group_by", std::string("env,snr,seen"));
  defaults.set("score.unit", std::string("char"));
  defaults.set_size("score.bootstrap", 0);
  defaults.set("seed", 1LL);
  KeyValueConfig kv = assemble(c, defaults);
  const std::string ref = kv.get_string("data.ref", "");
  const std::string hyp = kv.get_string("data.hyp", "");
  if (ref.empty() || hyp.empty()) throw ConfigError("score needs --ref and --hyp");
  if (!fs::exists(ref)) throw IoError("reference manifest not found: " + ref);
  const auto entries = frontend::read_manifest(ref);
  const auto hyps = read_hypotheses(hyp);
  std::map<std::string, std::string> by_id;
  for (const auto& h : hyps) {
    if (!by_id.emplace(h.utterance_id, h.text).second) {
      throw FormatError("duplicate hypothesis for " + h.utterance_id);
    }
  }
  const std::string unit = kv.get_string("score.unit", "char");
  if (unit != "char" && unit != "word") throw ConfigError("score.unit must be char or word");
  auto tokens = [&](const std::string& s) { return unit == "char" ? eval::char_tokens(s) : eval::word_tokens(s); };

  eval::ScoreReport report;
  for (const auto& e : entries) {
    const auto it = by_id.find(e.utterance_id);
    if (it == by_id.end()) throw FormatError("no hypothesis for " + e.utterance_id);
    eval::UtteranceScore u;
    u.utterance_id = e.utterance_id;
    u.speaker_id = e.speaker_id;
    u.env_id = e.env_id;
    if (e.condition) {
      u.snr_db = e.condition->snr_db;
      u.seen = e.condition->seen;
    }
    u.counts = eval::edit_align(tokens(e.transcript), tokens(it->second)).counts;
    report.add(u);
  }
  std::vector<eval::GroupKey> keys;
  for (const auto& k : split_list(kv.get_string("score.group_by", ""))) keys.push_back(eval::parse_group_key(k));
  out << report.to_text(keys);
  const std::size_t resamples = kv.get_size("score.bootstrap", 0);
  std::optional<eval::ConfidenceInterval> ci;
  if (resamples > 0) {
    ci = report.bootstrap(resamples, 0.95, derive_seed(root_seed(kv), "bootstrap"));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "bootstrap 95%% interval (%zu resamples, not a significance test): %.2f .. %.2f\n",
                  resamples, ci->lower, ci->upper);
    out << buf;
  }
  if (!c.out.empty()) {
    RunDir run("score", c.out, kv, {{"bootstrap", derive_seed(root_seed(kv), "bootstrap")}});
    std::ofstream tsv(run / "report.tsv");
    tsv << report.to_tsv(keys);
    if (!tsv) throw IoError("cannot write report.tsv");
    run.summary() << "error_rate " << fmt(report.error_rate()) << "\nutterances " << report.utterances().size() << "\n";
    if (ci) run.summary() << "bootstrap_lower " << fmt(ci->lower) << "\nbootstrap_upper " << fmt(ci->upper) << "\n";
    run.finish();
  }
  return kExitOk;
}

int cmd_selfcheck(std::ostream& out, const std::vector<std::string>& only) {
  bool all = true;
  const SuiteSizes sizes;
  for (const auto& [name, suite] : oracle_suites()) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const SuiteResult r = suite(sizes);
    char buf[64];
    std::snprintf(buf, sizeof(buf), " (%.1fs)", r.seconds);
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ' ' << r.detail << buf << "\n";
    all &= r.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_study(const Common& c, std::size_t seeds, std::ostream& out) {
  KeyValueConfig kv = assemble(c, pipeline::StudySpec::defaults().to_config());
  if (!kv.contains("seed")) kv.set("seed", 1LL);
  const auto spec = pipeline::StudySpec::from_config(kv);
  const std::uint64_t root = root_seed(kv);
  std::map<std::string, std::uint64_t> seed_map;
  for (std::size_t s = 0; s < seeds; ++s) seed_map["study-" + std::to_string(s)] = root + s;
  RunDir run("study", c.out, kv, seed_map);
  std::map<std::string, double> mean;
  bool frozen = true, monotone = true;
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto outcome = pipeline::run_study(spec, root + s);
    frozen &= outcome.canonical_frozen;
    monotone &= outcome.monotone;
    for (const auto& name : pipeline::study_systems()) {
      run.summary() << "seed " << root + s << ' ' << name << ' ' << fmt(outcome.error_rate.at(name)) << "\n";
      mean[name] += outcome.error_rate.at(name) / static_cast<double>(seeds);
    }
  }
  for (const auto& name : pipeline::study_systems()) {
    run.summary() << "mean " << name << ' ' << fmt(mean[name]) << "\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-20s %6.2f\n", name.c_str(), mean[name]);
    out << buf;
  }
  run.summary() << "canonical_frozen " << frozen << "\nobjective_monotone " << monotone << "\n";
  run.finish();
  return kExitOk;
}

std::string version_text() {
  std::ostringstream s;
  s << "fsat 0.1.0\n"
    << "feature-archive " << frontend::kFeatureArchiveVersion << "\n"
    << "checkpoint " << ad::kCheckpointVersion << "\n"
    << "transform-cache " << adapt::kTransformCacheVersion << "\n"
    << "hypotheses " << kHypothesisFormatVersion << "\n"
    << "run-summary " << kRunSummaryVersion << "\n";
  return s.str();
}

const char* kExitCodeHelp =
    "Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 io (missing input), 5 format,\n"
    "            6 shape, 7 domain, 8 numeric, 9 state, 10 selfcheck failure.\n"
    "Errors print one line: error: category=<name> message=<text>";

void error_line(std::ostream& err, std::string_view category, const std::string& message) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  err << "error: category=" << category << " message=" << flat << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fsat: factorised speaker/environment adaptation toolkit", "fsat"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "print format versions of every file schema");

  Common synth, noise_c, train, decode, adapt_c, rapid, score, study;
  std::size_t study_seeds = 5;
  std::vector<std::string> suites;

  auto* s_synth = app.add_subcommand("synth", "render a synthetic speaker x environment feature corpus");
  add_common(s_synth, synth, true);
  synth.overrides.option<std::string>(s_synth, "--split", "task.split", "content draw name");
  synth.overrides.option<long long>(s_synth, "--speakers", "task.speakers", "speakers");
  synth.overrides.option<long long>(s_synth, "--environments", "task.environments", "environments");
  synth.overrides.option<long long>(s_synth, "--utterances", "task.utterances_per_cell", "utterances per cell");
  synth.overrides.option<long long>(s_synth, "--speaker-offset", "task.speaker_offset", "first speaker index");
  synth.overrides.option<long long>(s_synth, "--env-offset", "task.environment_offset", "first environment index");

  auto* s_noise = app.add_subcommand("simulate-noise", "mix clean waveforms with noise at exact SNRs");
  add_common(s_noise, noise_c, true);
  noise_c.overrides.option<std::string>(s_noise, "--clean", "data.clean", "clean manifest (waveform paths)");
  noise_c.overrides.option<std::string>(s_noise, "--mode", "noise.mode", "nonaug or aug");
  noise_c.overrides.option<std::string>(s_noise, "--snr-set", "noise.snr_set", "comma separated SNRs in dB");
  noise_c.overrides.option<std::string>(s_noise, "--train-snr-set", "noise.train_snr_set", "SNRs seen in training");
  noise_c.overrides.option<std::string>(s_noise, "--noise-dir", "noise.dir", "directory of noise WAVs (default: built-in bank)");
  noise_c.overrides.option<std::string>(s_noise, "--train-noises", "noise.train_noises", "noise ids seen in training");

  auto* s_train = app.add_subcommand("train", "train a baseline or adaptively trained model");
  add_common(s_train, train, true);
  train.overrides.option<std::string>(s_train, "--manifest", "data.manifest", "training manifest");
  train.overrides.option<long long>(s_train, "--epochs", "train.epochs", "epochs");
  train.overrides.flag(s_train, "--adaptive", "train.adaptive", "co-train speaker/environment transforms");
  train.overrides.option<std::string>(s_train, "--mode", "adapt.mode", "speaker, env, joint, lfa or cfa");
  train.overrides.option<std::string>(s_train, "--spk-kind", "adapt.spk_kind", "lhuc or hub");
  train.overrides.option<std::string>(s_train, "--env-kind", "adapt.env_kind", "lhuc or hub");
  train.overrides.option<double>(s_train, "--beta", "adapt.beta", "LFA interpolation weight");

  auto* s_decode = app.add_subcommand("decode", "decode a manifest, optionally through cached transforms");
  add_common(s_decode, decode, true);
  decode.overrides.option<std::string>(s_decode, "--model", "data.model", "model directory");
  decode.overrides.option<std::string>(s_decode, "--manifest", "data.manifest", "manifest to decode");
  decode.overrides.option<std::string>(s_decode, "--cache", "data.cache", "transform cache");
  decode.overrides.option<std::string>(s_decode, "--mode", "adapt.mode", "mode the cache is applied with");
  decode.overrides.option<std::string>(s_decode, "--spk-kind", "adapt.spk_kind", "lhuc or hub");
  decode.overrides.option<std::string>(s_decode, "--env-kind", "adapt.env_kind", "lhuc or hub");
  decode.overrides.option<double>(s_decode, "--beta", "adapt.beta", "LFA interpolation weight");
  decode.overrides.option<long long>(s_decode, "--beam", "decode.beam", "beam width");
  decode.overrides.option<double>(s_decode, "--ctc-weight", "decode.ctc_weight", "CTC score weight");

  auto* s_adapt = app.add_subcommand("adapt", "test-time adaptation: decode, estimate, decode again");
  add_common(s_adapt, adapt_c, true);
  adapt_c.overrides.option<std::string>(s_adapt, "--model", "data.model", "model directory");
  adapt_c.overrides.option<std::string>(s_adapt, "--manifest", "data.manifest", "test manifest");
  adapt_c.overrides.option<std::string>(s_adapt, "--mode", "adapt.mode", "speaker, env, joint, lfa or cfa");
  adapt_c.overrides.option<double>(s_adapt, "--beta", "adapt.beta", "LFA interpolation weight");
  adapt_c.overrides.option<std::string>(s_adapt, "--spk-kind", "adapt.spk_kind", "lhuc or hub");
  adapt_c.overrides.option<std::string>(s_adapt, "--env-kind", "adapt.env_kind", "lhuc or hub");
  adapt_c.overrides.flag(s_adapt, "--bayesian", "adapt.bayesian", "variational transforms");
  adapt_c.overrides.option<long long>(s_adapt, "--passes", "adapt.passes", "1 or 2");
  adapt_c.overrides.option<long long>(s_adapt, "--epochs", "adapt.epochs", "estimation epochs");
  adapt_c.overrides.option<std::string>(s_adapt, "--supervision", "adapt.supervision", "pseudo or given");
  adapt_c.overrides.option<long long>(s_adapt, "--beam", "decode.beam", "beam width");

  auto* s_rapid = app.add_subcommand("rapid-adapt", "decode with cached transforms, no estimation");
  add_common(s_rapid, rapid, true);
  rapid.overrides.option<std::string>(s_rapid, "--model", "data.model", "model directory");
  rapid.overrides.option<std::string>(s_rapid, "--manifest", "data.manifest", "test manifest");
  rapid.overrides.option<std::string>(s_rapid, "--cache", "data.cache", "transform cache");
  rapid.overrides.option<std::string>(s_rapid, "--pairing", "adapt.pairing", "matched, mm-env, mm-spk or mm-both");
  rapid.overrides.option<std::string>(s_rapid, "--mode", "adapt.mode", "mode the cache is applied with");
  rapid.overrides.option<std::string>(s_rapid, "--spk-kind", "adapt.spk_kind", "lhuc or hub");
  rapid.overrides.option<std::string>(s_rapid, "--env-kind", "adapt.env_kind", "lhuc or hub");
  rapid.overrides.option<double>(s_rapid, "--beta", "adapt.beta", "LFA interpolation weight");

  auto* s_score = app.add_subcommand("score", "token error rates with per-condition breakdowns");
  add_common(s_score, score, false);
  score.overrides.option<std::string>(s_score, "--ref", "data.ref", "reference manifest");
  score.overrides.option<std::string>(s_score, "--hyp", "data.hyp", "hypothesis file");
  score.overrides.option<std::string>(s_score, "--group-by", "score.group_by", "env, snr, seen, speaker");
  score.overrides.option<std::string>(s_score, "--unit", "score.unit", "char or word");
  score.overrides.option<long long>(s_score, "--bootstrap", "score.bootstrap", "bootstrap resamples (0: off)");

  auto* s_check = app.add_subcommand("selfcheck", "run the gradient and oracle suites");
  s_check->add_option("--suite", suites, "run only these suites");

  auto* s_study = app.add_subcommand("study", "synthetic direction-of-effect study over several seeds");
  add_common(s_study, study, true);
  s_study->add_option("--seeds", study_seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return kExitUsage;
  }

  if (version) {
    out << version_text();
    return kExitOk;
  }
  try {
    if (s_synth->parsed()) return cmd_synth(synth, out);
    if (s_noise->parsed()) return cmd_simulate_noise(noise_c, out);
    if (s_train->parsed()) return cmd_train(train, out);
    if (s_decode->parsed()) return cmd_decode(decode, out);
    if (s_adapt->parsed()) return cmd_adapt(adapt_c, out);
    if (s_rapid->parsed()) return cmd_rapid(rapid, out);
    if (s_score->parsed()) return cmd_score(score, out);
    if (s_check->parsed()) return cmd_selfcheck(out, suites);
    if (s_study->parsed()) return cmd_study(study, study_seeds, out);
  } catch (const Error& e) {
    error_line(err, category_name(e.category()), e.what());
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    error_line(err, "io", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
    return kExitInternal;
  }
  error_line(err, "usage", "no verb given; see --help");
  return kExitUsage;
}

}  // namespace fsat::cli
