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

#include "cli/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>

#include "fsat/adapt/algebra.hpp"
#include "fsat/adapt/mode.hpp"
#include "fsat/adapt/objective.hpp"
#include "fsat/asr/losses.hpp"
#include "fsat/asr/model.hpp"
#include "fsat/autodiff/gradcheck.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/eval/scoring.hpp"
#include "fsat/noise/mixer.hpp"
#include "fsat/noise/noise_bank.hpp"
#include "fsat/seed.hpp"

namespace fsat::cli {
namespace {

using ad::Mode;
using ad::Parameter;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string format(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  return buf;
}

template <typename F>
SuiteResult timed(const std::string& name, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

Tensor normal_tensor(const Shape& shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(shape);
  for (double& v : t.values()) v = n(rng);
  return t;
}

// --- gradients ----------------------------------------------------------------

struct Primitive {
  const char* name;
  std::vector<Shape> inputs;
  std::function<Var(std::vector<Var>&)> op;
  double lo = -1.0;
  double hi = 1.0;
  Mode mode = Mode::kEval;
};

const std::vector<int> kIds = {2, 0, 2, 1};
const std::vector<int> kLabels = {1, 2, 2};
const std::vector<int> kTargets = {1, 2, 3, 4};

const std::vector<Primitive>& primitives() {
  static const Tensor mask = Tensor::matrix({{0, -1e9, -1e9}, {0, 0, -1e9}, {0, 0, 0}});
  static const Tensor prior_mu = Tensor::vector({0.1, -0.2, 0.0});
  static const Tensor prior_sd = Tensor::vector({0.5, 1.0, 2.0});
  static const Tensor eps = Tensor::vector({0.3, -1.1, 0.7});
  static const std::vector<Primitive> all = {
      {"matmul", {{3, 4}, {4, 2}}, [](auto& v) { return ad::matmul(v[0], v[1]); }},
      {"add", {{3, 4}, {3, 4}}, [](auto& v) { return ad::add(v[0], v[1]); }},
      {"add_row", {{3, 4}, {4}}, [](auto& v) { return ad::add(v[0], v[1]); }},
      {"add_scalar", {{3, 4}}, [](auto& v) { return ad::add_scalar(v[0], 0.7); }},
      {"sub", {{3, 4}, {}}, [](auto& v) { return ad::sub(v[0], v[1]); }},
      {"mul", {{3, 4}, {3, 4}}, [](auto& v) { return ad::mul(v[0], v[1]); }},
      {"mul_row", {{3, 4}, {4}}, [](auto& v) { return ad::mul(v[0], v[1]); }},
      {"scale", {{3, 4}}, [](auto& v) { return ad::scale(v[0], -1.7); }},
      {"neg", {{3, 4}}, [](auto& v) { return ad::neg(v[0]); }},
      {"sigmoid", {{3, 4}}, [](auto& v) { return ad::sigmoid(v[0]); }, -4, 4},
      {"relu", {{3, 4}}, [](auto& v) { return ad::relu(v[0]); }},
      {"swish", {{3, 4}}, [](auto& v) { return ad::swish(v[0]); }, -4, 4},
      {"exp", {{3, 4}}, [](auto& v) { return ad::exp(v[0]); }},
      {"log", {{3, 4}}, [](auto& v) { return ad::log(v[0]); }, 0.2, 3.0},
      {"square", {{3, 4}}, [](auto& v) { return ad::square(v[0]); }},
      {"softmax", {{3, 5}}, [](auto& v) { return ad::softmax(v[0]); }, -3, 3},
      {"log_softmax", {{3, 5}}, [](auto& v) { return ad::log_softmax(v[0]); }, -3, 3},
      {"layer_norm", {{3, 6}, {6}, {6}}, [](auto& v) { return ad::layer_norm(v[0], v[1], v[2]); }},
      {"conv2d", {{2, 7, 6}, {3, 2, 3, 3}, {3}},
       [](auto& v) { return ad::conv2d(v[0], v[1], v[2], 2, 2); }},
      {"depthwise_conv1d", {{6, 3}, {5, 3}, {3}},
       [](auto& v) { return ad::depthwise_conv1d(v[0], v[1], v[2]); }},
      {"dropout", {{4, 5}}, [](auto& v) { return ad::dropout(v[0], 0.3); }, -1, 1, Mode::kTrain},
      {"embedding", {{3, 4}}, [](auto& v) { return ad::embedding(v[0], kIds); }},
      {"concat_cols", {{3, 2}, {3, 4}}, [](auto& v) { return ad::concat_cols({v[0], v[1]}); }},
      {"concat_rows", {{2, 3}, {1, 3}}, [](auto& v) { return ad::concat_rows({v[0], v[1]}); }},
      {"slice_cols", {{3, 5}}, [](auto& v) { return ad::slice_cols(v[0], 1, 4); }},
      {"slice_rows", {{4, 3}}, [](auto& v) { return ad::slice_rows(v[0], 1, 3); }},
      {"transpose", {{3, 5}}, [](auto& v) { return ad::transpose(v[0]); }},
      {"reshape", {{3, 4}}, [](auto& v) { return ad::reshape(v[0], {2, 6}); }},
      {"sum", {{3, 4}}, [](auto& v) { return ad::sum(v[0]); }},
      {"mean", {{3, 4}}, [](auto& v) { return ad::mean(v[0]); }},
      {"attention", {{3, 4}, {3, 4}, {3, 4}},
       [](auto& v) { return ad::scaled_dot_product_attention(v[0], v[1], v[2], &mask); }},
      {"ctc_loss", {{6, 3}},
       [](auto& v) { return asr::ctc_loss(ad::log_softmax(v[0]), kLabels); }, -2, 2},
      {"attention_loss", {{4, 5}},
       [](auto& v) { return asr::attention_loss(ad::log_softmax(v[0]), kTargets, 0.1); }, -2,
       2},
      {"lhuc", {{3, 3}, {3}}, [](auto& v) { return adapt::lhuc_apply(v[0], v[1]); }, -2, 2},
      {"hub", {{3, 3}, {3}}, [](auto& v) { return adapt::hub_apply(v[0], v[1]); }},
      {"lfa", {{3, 3}, {3}, {3}}, [](auto& v) { return adapt::lfa_apply(v[0], v[1], v[2], 0.7); },
       -2, 2},
      {"cfa_lhuc_hub", {{3, 3}, {3}, {3}},
       [](auto& v) {
         return adapt::cfa_apply(v[0], v[1], adapt::TransformKind::kLhuc, v[2],
                                 adapt::TransformKind::kHub);
       },
       -2, 2},
      {"sample_transform", {{3}, {3}},
       [](auto& v) { return adapt::sample_transform(v[0], v[1], eps); }},
      {"kl_to_prior", {{3}, {3}},
       [](auto& v) { return adapt::kl_to_prior(v[0], v[1], prior_mu, prior_sd); }},
  };
  return all;
}

double primitive_error(const Primitive& c, std::size_t points) {
  std::mt19937_64 rng(fnv1a(c.name));
  double worst = 0.0;
  for (std::size_t point = 0; point < points; ++point) {
    std::vector<std::unique_ptr<Parameter>> params;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      params.push_back(std::make_unique<Parameter>("in" + std::to_string(i),
                                                   random_tensor(c.inputs[i], rng, c.lo, c.hi)));
    }
    Shape out_shape;
    {
      Tape probe(point, c.mode);
      std::vector<Var> vars;
      for (auto& p : params) vars.push_back(probe.param(*p));
      out_shape = c.op(vars).shape();
    }
    const Tensor weights = random_tensor(out_shape, rng);
    auto loss = [&](Tape& tape) {
      std::vector<Var> vars;
      for (auto& p : params) vars.push_back(tape.param(*p));
      return ad::weighted_sum(c.op(vars), weights);
    };
    std::vector<Parameter*> raw;
    for (auto& p : params) raw.push_back(p.get());
    worst = std::max(worst, ad::finite_difference_check(loss, raw, 1e-5, point, c.mode)
                                .max_relative_error);
  }
  return worst;
}

asr::ModelConfig toy_model_config() {
  asr::ModelConfig c;
  c.feature_dim = 8;
  c.subsample_channels = 2;
  c.encoder_blocks = 2;
  c.decoder_blocks = 1;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 12;
  c.conv_kernel = 3;
  c.alphabet = "ab";
  c.dropout = 0.0;
  return c;
}

double multitask_error() {
  asr::ConformerModel m(toy_model_config(), 21);
  const Tensor x = normal_tensor({19, 8}, 4);
  const std::vector<int> tokens{1, 2, 1};
  std::vector<Parameter*> ps = m.params().all();
  return ad::finite_difference_check(
             [&](Tape& t) {
               auto enc = m.encode(t, x, nullptr);
               return m.losses(enc.hidden, tokens, 0.2).total;
             },
             ps)
      .max_relative_error;
}

double bayesian_error() {
  using adapt::AdaptationMode;
  using adapt::TransformKind;
  asr::ConformerModel m(toy_model_config(), 41);
  std::vector<adapt::AdaptItem> items;
  const char* spk[] = {"s0", "s1", "s0", "s1"};
  const char* env[] = {"e0", "e0", "e1", "e1"};
  for (int u = 0; u < 4; ++u) {
    adapt::AdaptItem it;
    it.input = normal_tensor({static_cast<std::size_t>(23 + u), 8}, 500 + u);
    it.tokens = {1 + u % 2, 2, 1};
    it.speaker = spk[u];
    it.environment = env[u];
    items.push_back(std::move(it));
  }
  double worst = 0.0;
  for (const AdaptationMode& mode :
       {AdaptationMode::cfa(TransformKind::kHub, TransformKind::kHub), AdaptationMode::lfa(0.7),
        AdaptationMode::cfa(TransformKind::kLhuc, TransformKind::kHub)}) {
    adapt::PriorSpec prior;
    prior.hub_sigma = 0.1;
    prior.hub_initial_sigma = 0.05;
    adapt::TransformSet set(8, 0, adapt::Parameterization::kVariational);
    for (const auto& it : items) adapt::declare_transforms(set, mode, prior, it.speaker, it.environment);
    std::uint64_t k = 0;
    for (auto* t : set.all()) t->mean().value = normal_tensor({t->dim()}, 80 + k++, 0.2);
    adapt::ObjectiveOptions o;
    o.mode = mode;
    o.prior = prior;
    o.samples = 2;
    o.seed = 4;
    std::vector<Parameter*> ps = set.parameters();
    worst = std::max(worst, ad::finite_difference_check(
                                [&](Tape& t) { return adapt::bayesian_objective(t, m, items, set, o); },
                                ps)
                                .max_relative_error);
  }
  return worst;
}

// --- CTC ----------------------------------------------------------------------

double enumerate_ctc(const Tensor& probs, const std::vector<int>& labels) {
  const std::size_t T = probs.rows(), V = probs.cols();
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  while (true) {
    std::vector<int> collapsed;
    int prev = -1;
    double p = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      const int k = static_cast<int>(path[t]);
      p *= probs.at(t, path[t]);
      if (k != 0 && k != prev) collapsed.push_back(k);
      prev = k;
    }
    if (collapsed == labels) total += p;
    std::size_t i = 0;
    while (i < T && ++path[i] == V) path[i++] = 0;
    if (i == T) break;
  }
  return total;
}

// --- KL -------------------------------------------------------------------------

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double kl_quadrature(double mq, double sq, double mp, double sp) {
  const int intervals = 20000;
  const double a = mq - 12.0 * sq, b = mq + 12.0 * sq;
  const double h = (b - a) / intervals;
  auto f = [&](double x) {
    const double lq = normal_log_pdf(x, mq, sq);
    return std::exp(lq) * (lq - normal_log_pdf(x, mp, sp));
  };
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// --- SNR ------------------------------------------------------------------------

double mean_square(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += static_cast<long double>(v) * v;
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

std::vector<frontend::ManifestEntry> clean_entries(std::size_t n) {
  std::vector<frontend::ManifestEntry> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m[i].utterance_id = "u" + std::to_string(i);
    m[i].speaker_id = "s" + std::to_string(i % 7);
    m[i].env_id = "clean";
    m[i].path = "clean.fsf";
  }
  return m;
}

// --- scoring --------------------------------------------------------------------

using Tokens = std::vector<std::string>;

std::size_t exhaustive_distance(const Tokens& r, std::size_t i, const Tokens& h, std::size_t j) {
  if (i == r.size()) return h.size() - j;
  if (j == h.size()) return r.size() - i;
  return std::min({exhaustive_distance(r, i + 1, h, j + 1) + (r[i] == h[j] ? 0 : 1),
                   exhaustive_distance(r, i + 1, h, j) + 1, exhaustive_distance(r, i, h, j + 1) + 1});
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t alphabet) {
  Tokens t(rng() % 9);
  for (auto& s : t) s = std::string(1, static_cast<char>('a' + rng() % alphabet));
  return t;
}

}  // namespace

SuiteResult check_gradients(const SuiteSizes& sizes) {
  return timed("gradients", [&] {
    double worst = 0.0;
    std::string worst_name;
    for (const Primitive& p : primitives()) {
      const double e = primitive_error(p, sizes.gradient_points);
      if (e > worst) {
        worst = e;
        worst_name = p.name;
      }
    }
    const double mt = multitask_error();
    const double bayes = bayesian_error();
    SuiteResult r;
    r.passed = worst <= 1e-4 && mt <= 1e-4 && bayes <= 1e-4;
    r.detail = format("primitives=%.3g multitask=%.3g variational=%.3g", worst, mt, bayes) +
               " worst_primitive=" + worst_name;
    return r;
  });
}

SuiteResult check_ctc_oracle(const SuiteSizes& sizes) {
  return timed("ctc-oracle", [&] {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double worst = 0.0;
    std::size_t tables = 0;
    while (tables < sizes.ctc_tables) {
      const std::size_t V = 2 + rng() % 2;  // blank plus one or two symbols
      const std::size_t T = 1 + rng() % 6;
      std::vector<int> labels(1 + rng() % 3);
      for (int& l : labels) l = 1 + static_cast<int>(rng() % (V - 1));
      if (asr::ctc_min_frames(labels) > T) continue;
      Tensor p(Shape{T, V});
      Tensor logp(Shape{T, V});
      for (std::size_t t = 0; t < T; ++t) {
        double z = 0.0;
        for (std::size_t v = 0; v < V; ++v) z += (p.at(t, v) = u(rng));
        for (std::size_t v = 0; v < V; ++v) {
          p.at(t, v) /= z;
          logp.at(t, v) = std::log(p.at(t, v));
        }
      }
      Tape tape;
      const double got = asr::ctc_loss(tape.constant(logp), labels).value().item();
      worst = std::max(worst, std::abs(got + std::log(enumerate_ctc(p, labels))));
      ++tables;
    }
    SuiteResult r;
    r.passed = worst <= 1e-9;
    r.detail = format("tables=%.0f max_abs_error=%.3g", static_cast<double>(tables), worst);
    return r;
  });
}

SuiteResult check_kl_oracle(const SuiteSizes& sizes) {
  return timed("kl-oracle", [&] {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> m(-2, 2), s(0.2, 2.0);
    double worst = 0.0, self = 0.0;
    for (std::size_t i = 0; i < sizes.kl_pairs; ++i) {
      const double mq = m(rng), sq = s(rng), mp = m(rng), sp = s(rng);
      const double got = adapt::kl_to_prior(Tensor::vector({mq}), Tensor::vector({sq}),
                                            Tensor::vector({mp}), Tensor::vector({sp}));
      worst = std::max(worst, std::abs(got - kl_quadrature(mq, sq, mp, sp)));
      self = std::max(self, std::abs(adapt::kl_to_prior(Tensor::vector({mq}), Tensor::vector({sq}),
                                                        Tensor::vector({mq}), Tensor::vector({sq}))));
    }
    SuiteResult r;
    r.passed = worst <= 1e-6 && self <= 1e-12;
    r.detail = format("pairs=%.0f max_abs_error=%.3g self_kl=%.3g",
                      static_cast<double>(sizes.kl_pairs), worst, self);
    return r;
  });
}

SuiteResult check_boundaries(const SuiteSizes&) {
  return timed("boundaries", [&] {
    using adapt::TransformKind;
    std::size_t failures = 0, checks = 0;
    Tape t;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Var h = t.constant(normal_tensor({6, 5}, 100 + s));
      Var r = t.constant(normal_tensor({5}, 200 + s));
      Var n = t.constant(normal_tensor({5}, 300 + s));
      failures += !adapt::lfa_apply(h, r, n, 1.0).value().bit_equal(adapt::lhuc_apply(h, r).value());
      failures += !adapt::lfa_apply(h, r, n, 0.0).value().bit_equal(adapt::lhuc_apply(h, n).value());
      failures += !adapt::cfa_apply(h, r, TransformKind::kHub, n, TransformKind::kHub)
                       .value()
                       .bit_equal(adapt::hub_apply(h, ad::add(r, n)).value());
      checks += 3;
    }

    asr::ConformerModel model(toy_model_config(), 41);
    const auto L = TransformKind::kLhuc, H = TransformKind::kHub;
    const std::vector<adapt::AdaptationMode> modes = {
        adapt::AdaptationMode::speaker_only(L), adapt::AdaptationMode::speaker_only(H),
        adapt::AdaptationMode::env_only(L),     adapt::AdaptationMode::env_only(H),
        adapt::AdaptationMode::joint_single(H), adapt::AdaptationMode::lfa(0.7),
        adapt::AdaptationMode::cfa(L, L),       adapt::AdaptationMode::cfa(H, H),
        adapt::AdaptationMode::cfa(L, H),       adapt::AdaptationMode::cfa(H, L)};
    for (const auto& mode : modes) {
      adapt::TransformSet set(8, 0, adapt::Parameterization::kDeterministic);
      adapt::declare_transforms(set, mode, {}, "s", "e");
      adapt::ModeTransform tr(mode, adapt::bind(set, mode, "s", "e"), 0, 8);
      for (std::uint64_t u = 0; u < 3; ++u) {
        const Tensor x = normal_tensor({21 + u, 8}, 700 + u);
        Tape a, b;
        failures += !model.encode(a, x, &tr).hidden.value().bit_equal(
            model.encode(b, x, nullptr).hidden.value());
        ++checks;
      }
    }
    SuiteResult r;
    r.passed = failures == 0;
    r.detail = format("checks=%.0f failures=%.0f", static_cast<double>(checks),
                      static_cast<double>(failures));
    return r;
  });
}

SuiteResult check_snr(const SuiteSizes& sizes) {
  return timed("snr", [&] {
    const std::vector<double> train_snrs = {-5, 0, 5, 10, 20};
    const std::vector<double> test_snrs = {-15, -10, -5, 0, 5, 10, 20};
    auto bank = noise::builtin_noise_bank(8000.0, 2.0, 17);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> d(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t trial = 0; trial < sizes.snr_triples; ++trial) {
      const auto& snrs = trial % 2 ? test_snrs : train_snrs;
      const double snr = snrs[rng() % snrs.size()];
      const noise::NoiseProfile& n = bank[rng() % bank.size()];
      const std::size_t len = 200 + rng() % 20000;
      const double amp = 0.01 + static_cast<double>(rng() % 100) / 10.0;
      frontend::Waveform clean;
      clean.samples.resize(len);
      for (double& v : clean.samples) v = amp * d(rng);
      noise::MixSpec spec{"u", n.noise_id, snr, static_cast<std::size_t>(rng() % n.wave.samples.size()), 0};
      const auto m = noise::mix_at_snr(clean, n, spec, {});
      std::vector<double> residual(len);
      for (std::size_t i = 0; i < len; ++i) residual[i] = m.mixed.samples[i] - clean.samples[i];
      const double measured = 10.0 * std::log10(mean_square(clean.samples) / mean_square(residual));
      worst = std::max(worst, std::abs(measured - snr));
    }

    // Corpus cardinalities.
    auto small_bank = noise::builtin_noise_bank(8000.0, 0.2, 1);
    const std::size_t C = small_bank.size() * train_snrs.size();
    auto nonaug = noise::build_nonaugmented_corpus(clean_entries(37), small_bank, train_snrs, {}, 99);
    std::set<std::string> once;
    for (const auto& e : nonaug) once.insert(e.clean.utterance_id);
    const bool nonaug_ok = nonaug.size() == 37 && once.size() == 37;
    auto aug = noise::build_augmented_corpus(clean_entries(6), small_bank, train_snrs, {});
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& e : aug) {
      pairs.emplace(e.clean.utterance_id, noise::condition_env_id(e.spec.noise_id, e.spec.snr_db));
    }
    const bool aug_ok = aug.size() == 6 * C && pairs.size() == aug.size();

    // Every condition frequency within 3 sigma of 1/C, allowing the one
    // excursion expected by chance among C cells.
    const std::size_t N = sizes.uniformity_draws;
    auto plan = noise::build_nonaugmented_corpus(clean_entries(N), small_bank, train_snrs, {}, 5);
    std::map<std::string, std::size_t> freq;
    for (const auto& e : plan) ++freq[noise::condition_env_id(e.spec.noise_id, e.spec.snr_db)];
    const double p = 1.0 / static_cast<double>(C);
    const double band = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(N));
    std::size_t outside = C - freq.size();
    for (const auto& [env, n] : freq) {
      if (std::abs(static_cast<double>(n) / static_cast<double>(N) - p) > band) ++outside;
    }
    SuiteResult r;
    r.passed = worst <= 0.01 && nonaug_ok && aug_ok && outside <= 1;
    r.detail = format("max_snr_error_db=%.3g cells_outside_3sigma=%.0f of %.0f", worst,
                      static_cast<double>(outside), static_cast<double>(C)) +
               (nonaug_ok ? " nonaug=ok" : " nonaug=BAD") + (aug_ok ? " aug=ok" : " aug=BAD");
    return r;
  });
}

SuiteResult check_scoring(const SuiteSizes& sizes) {
  return timed("scoring", [&] {
    std::mt19937_64 rng(31337);
    std::size_t mismatches = 0;
    for (std::size_t n = 0; n < sizes.edit_pairs; ++n) {
      const std::size_t alphabet = 1 + rng() % 4;
      const Tokens r = random_tokens(rng, alphabet), h = random_tokens(rng, alphabet);
      mismatches += eval::edit_align(r, h).counts.errors() != exhaustive_distance(r, 0, h, 0);
    }

    const std::vector<double> snrs{-5, 0, 5, 10, 20};
    eval::ScoreReport rep;
    for (int i = 0; i < 300; ++i) {
      Tokens r = random_tokens(rng, 3), h = random_tokens(rng, 3);
      if (r.empty()) r.push_back("a");
      eval::UtteranceScore u;
      u.utterance_id = "u" + std::to_string(i);
      u.speaker_id = "s" + std::to_string(rng() % 5);
      const double snr = snrs[rng() % snrs.size()];
      u.env_id = std::string(rng() % 2 ? "pink@" : "hum@") + std::to_string(static_cast<int>(snr));
      u.snr_db = snr;
      u.seen = rng() % 3 != 0;
      u.counts = eval::edit_align(r, h).counts;
      rep.add(u);
    }
    const double total = rep.error_rate();
    double worst = 0.0;
    for (auto k : {eval::GroupKey::kEnvironment, eval::GroupKey::kSnr, eval::GroupKey::kSeen,
                   eval::GroupKey::kSpeaker}) {
      double num = 0.0, den = 0.0;
      for (const auto& [g, c] : rep.grouped(k)) {
        num += eval::error_rate(c) * static_cast<double>(c.reference_tokens);
        den += static_cast<double>(c.reference_tokens);
      }
      worst = std::max(worst, std::abs(num / den - total) / total);
    }
    SuiteResult r;
    r.passed = mismatches == 0 && worst <= 1e-12;
    r.detail = format("pairs=%.0f mismatches=%.0f group_identity_rel_error=%.3g",
                      static_cast<double>(sizes.edit_pairs), static_cast<double>(mismatches), worst);
    return r;
  });
}

const std::vector<std::pair<std::string, Suite>>& oracle_suites() {
  static const std::vector<std::pair<std::string, Suite>> all = {
      {"gradients", check_gradients}, {"ctc-oracle", check_ctc_oracle},
      {"kl-oracle", check_kl_oracle}, {"boundaries", check_boundaries},
      {"snr", check_snr},             {"scoring", check_scoring}};
  return all;
}

}  // namespace fsat::cli
