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

#include "fsat/asr/model.hpp"

#include <cmath>
#include <random>

#include "fsat/asr/losses.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"
#include "fsat/seed.hpp"

namespace fsat::asr {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

enum Init { kXavier = 0, kZero = 1, kOne = 2, kNormal = 3 };

std::size_t conv_out(std::size_t n) { return (n - 3) / 2 + 1; }

std::vector<int> decoder_targets(std::span<const int> tokens, int eos) {
  std::vector<int> t(tokens.begin(), tokens.end());
  t.push_back(eos);
  return t;
}

}  // namespace

Tensor positional_encoding(std::size_t rows, std::size_t dim) {
  Tensor pe(Shape{rows, dim});
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                   static_cast<double>(dim));
      pe.at(t, i) = std::sin(static_cast<double>(t) * freq);
      if (i + 1 < dim) pe.at(t, i + 1) = std::cos(static_cast<double>(t) * freq);
    }
  }
  return pe;
}

std::size_t ConformerModel::subsampled_length(std::size_t frames) {
  if (frames < kMinFrames) {
    throw DomainError("conv_subsample: need at least " + std::to_string(kMinFrames) +
                      " frames, got " + std::to_string(frames));
  }
  return conv_out(conv_out(frames));
}

ConformerModel::ConformerModel(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), vocab_(config_.alphabet) {
  config_.validate();
  build(init_seed, true);
}

ConformerModel::ConformerModel(ModelConfig config, ad::ParameterStore params)
    : config_(std::move(config)), vocab_(config_.alphabet), params_(std::move(params)) {
  config_.validate();
  const std::size_t before = params_.size();
  build(0, false);
  if (params_.size() != before) {
    throw FormatError("model: checkpoint holds parameters outside the architecture");
  }
}

ConformerModel::ConformerModel(const ConformerModel& other)
    : config_(other.config_), vocab_(other.vocab_), params_(other.params_) {
  build(0, false);
}

ad::Parameter& ConformerModel::param(const std::string& name, Shape shape, bool create, int init,
                                     std::uint64_t seed) {
  const std::string id = kCanonicalPrefix + name;
  if (!create) {
    ad::Parameter* p = params_.find(id);
    if (!p) throw FormatError("model: missing parameter " + id);
    if (p->value.shape() != shape) {
      throw FormatError("model: parameter " + id + " has shape " +
                        ad::shape_string(p->value.shape()) + ", expected " +
                        ad::shape_string(shape));
    }
    return *p;
  }
  Tensor t(shape);
  std::mt19937_64 rng(derive_seed(seed, id));
  if (init == kOne) {
    t.fill(1.0);
  } else if (init == kXavier) {
    std::size_t fan_in = shape.size() >= 2 ? shape[shape.size() - 2] : shape[0];
    std::size_t fan_out = shape.back();
    if (shape.size() == 4) {
      fan_in = shape[1] * shape[2] * shape[3];
      fan_out = shape[0] * shape[2] * shape[3];
    }
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (double& v : t.values()) v = u(rng);
  } else if (init == kNormal) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : t.values()) v = n(rng);
  }
  return params_.add(id, std::move(t));
}

ConformerModel::Linear ConformerModel::linear(const std::string& name, std::size_t in,
                                              std::size_t out, bool create, std::uint64_t seed,
                                              bool bias) {
  Linear l;
  l.w = &param(name + ".weight", Shape{in, out}, create, kXavier, seed);
  if (bias) l.b = &param(name + ".bias", Shape{out}, create, kZero, seed);
  return l;
}

ConformerModel::Norm ConformerModel::norm(const std::string& name, std::size_t dim, bool create) {
  Norm n;
  n.gain = &param(name + ".gain", Shape{dim}, create, kOne, 0);
  n.bias = &param(name + ".bias", Shape{dim}, create, kZero, 0);
  return n;
}

void ConformerModel::build(std::uint64_t seed, bool create) {
  const std::size_t D = config_.model_dim, C = config_.subsample_channels;
  const std::size_t F = config_.ff_dim, K = config_.conv_kernel, V = vocab_.size();
  flat_dim_ = conv_out(conv_out(config_.feature_dim)) * C;

  conv1_w_ = &param("subsample.conv1.weight", Shape{C, 1, 3, 3}, create, kXavier, seed);
  conv1_b_ = &param("subsample.conv1.bias", Shape{C}, create, kZero, seed);
  conv2_w_ = &param("subsample.conv2.weight", Shape{C, C, 3, 3}, create, kXavier, seed);
  conv2_b_ = &param("subsample.conv2.bias", Shape{C}, create, kZero, seed);
  sub_out_ = linear("subsample.out", flat_dim_, D, create, seed);

  enc_.clear();
  for (std::size_t i = 0; i < config_.encoder_blocks; ++i) {
    const std::string p = "encoder." + std::to_string(i) + ".";
    EncoderBlock b;
    b.ff1 = {norm(p + "ff1.norm", D, create), linear(p + "ff1.up", D, F, create, seed),
             linear(p + "ff1.down", F, D, create, seed)};
    b.att_norm = norm(p + "att.norm", D, create);
    b.att = {linear(p + "att.q", D, D, create, seed), linear(p + "att.k", D, D, create, seed, false),
             linear(p + "att.v", D, D, create, seed), linear(p + "att.out", D, D, create, seed)};
    b.conv_norm = norm(p + "conv.norm", D, create);
    b.pw1 = linear(p + "conv.pw1", D, 2 * D, create, seed);
    b.dw_w = &param(p + "conv.dw.weight", Shape{K, D}, create, kXavier, seed);
    b.dw_b = &param(p + "conv.dw.bias", Shape{D}, create, kZero, seed);
    b.dw_norm = norm(p + "conv.dw_norm", D, create);
    b.pw2 = linear(p + "conv.pw2", D, D, create, seed);
    b.ff2 = {norm(p + "ff2.norm", D, create), linear(p + "ff2.up", D, F, create, seed),
             linear(p + "ff2.down", F, D, create, seed)};
    b.final_norm = norm(p + "final_norm", D, create);
    enc_.push_back(b);
  }
  enc_norm_ = norm("encoder.norm", D, create);
  ctc_out_ = linear("ctc.out", D, V, create, seed);

  embed_ = &param("decoder.embed", Shape{V, D}, create, kNormal, seed);
  dec_.clear();
  for (std::size_t i = 0; i < config_.decoder_blocks; ++i) {
    const std::string p = "decoder." + std::to_string(i) + ".";
    DecoderBlock b;
    b.self_norm = norm(p + "self.norm", D, create);
    b.self_att = {linear(p + "self.q", D, D, create, seed),
                  linear(p + "self.k", D, D, create, seed, false),
                  linear(p + "self.v", D, D, create, seed), linear(p + "self.out", D, D, create, seed)};
    b.cross_norm = norm(p + "cross.norm", D, create);
    b.cross_att = {linear(p + "cross.q", D, D, create, seed),
                   linear(p + "cross.k", D, D, create, seed, false),
                   linear(p + "cross.v", D, D, create, seed),
                   linear(p + "cross.out", D, D, create, seed)};
    b.ff_norm = norm(p + "ff.norm", D, create);
    b.up = linear(p + "ff.up", D, F, create, seed);
    b.down = linear(p + "ff.down", F, D, create, seed);
    dec_.push_back(b);
  }
  dec_norm_ = norm("decoder.norm", D, create);
  dec_out_ = linear("decoder.out", D, V, create, seed);
}

Var ConformerModel::apply(const Linear& l, Var x) const {
  ad::Tape& t = x.tape();
  Var y = ad::matmul(x, t.param(*l.w));
  return l.b ? ad::add(y, t.param(*l.b)) : y;
}

Var ConformerModel::apply(const Norm& n, Var x) const {
  ad::Tape& t = x.tape();
  return ad::layer_norm(x, t.param(*n.gain), t.param(*n.bias));
}

Var ConformerModel::feed_forward(const FeedForward& f, Var x) const {
  Var h = ad::swish(apply(f.up, apply(f.norm, x)));
  return apply(f.down, ad::dropout(h, config_.dropout));
}

Var ConformerModel::attention(const Attention& a, Var query, Var memory,
                              const Tensor* mask) const {
  Var q = apply(a.q, query);
  Var k = apply(a.k, memory);
  Var v = apply(a.v, memory);
  const std::size_t H = config_.heads, dh = config_.model_dim / H;
  std::vector<Var> heads;
  heads.reserve(H);
  for (std::size_t h = 0; h < H; ++h) {
    heads.push_back(ad::scaled_dot_product_attention(ad::slice_cols(q, h * dh, (h + 1) * dh),
                                                     ad::slice_cols(k, h * dh, (h + 1) * dh),
                                                     ad::slice_cols(v, h * dh, (h + 1) * dh), mask));
  }
  return apply(a.out, H == 1 ? heads[0] : ad::concat_cols(heads));
}

Var ConformerModel::encoder_block(const EncoderBlock& b, Var x) const {
  ad::Tape& t = x.tape();
  const double p = config_.dropout;
  x = ad::add(x, ad::scale(ad::dropout(feed_forward(b.ff1, x), p), 0.5));
  Var n = apply(b.att_norm, x);
  x = ad::add(x, ad::dropout(attention(b.att, n, n, nullptr), p));

  const std::size_t D = config_.model_dim;
  Var c = apply(b.pw1, apply(b.conv_norm, x));
  c = ad::mul(ad::slice_cols(c, 0, D), ad::sigmoid(ad::slice_cols(c, D, 2 * D)));
  c = ad::depthwise_conv1d(c, t.param(*b.dw_w), t.param(*b.dw_b));
  c = apply(b.pw2, ad::swish(apply(b.dw_norm, c)));
  x = ad::add(x, ad::dropout(c, p));

  x = ad::add(x, ad::scale(ad::dropout(feed_forward(b.ff2, x), p), 0.5));
  return apply(b.final_norm, x);
}

Var ConformerModel::subsample(ad::Tape& tape, const Tensor& features) const {
  if (features.rank() != 2 || features.cols() != config_.feature_dim) {
    throw ShapeError("conv_subsample: expected T x " + std::to_string(config_.feature_dim) +
                     " features, got " + ad::shape_string(features.shape()));
  }
  const std::size_t T = features.rows();
  const std::size_t T2 = subsampled_length(T);
  const std::size_t F2 = conv_out(conv_out(config_.feature_dim));
  const std::size_t C = config_.subsample_channels;
  Var x = tape.constant(features.reshaped(Shape{1, T, config_.feature_dim}));
  x = ad::relu(ad::conv2d(x, tape.param(*conv1_w_), tape.param(*conv1_b_), 2, 2));
  x = ad::relu(ad::conv2d(x, tape.param(*conv2_w_), tape.param(*conv2_b_), 2, 2));
  // C x T2 x F2 -> T2 x (F2 * C): one row per output frame.
  x = ad::transpose(ad::reshape(x, Shape{C, T2 * F2}));
  x = ad::reshape(x, Shape{T2, F2 * C});
  return apply(sub_out_, x);
}

Var ConformerModel::encode_subsampled(Var x, const HiddenTransform* transform) const {
  const Shape& s = x.shape();
  if (s.size() != 2 || s[1] != config_.model_dim) {
    throw ShapeError("encode: expected T' x " + std::to_string(config_.model_dim) +
                     " hidden input, got " + ad::shape_string(s));
  }
  if (transform) {
    if (transform->dim() != config_.model_dim) {
      throw ShapeError("encode: transform dim " + std::to_string(transform->dim()) +
                       " does not match model dim " + std::to_string(config_.model_dim));
    }
    if (transform->layer() > config_.encoder_blocks) {
      throw ConfigError("encode: transform layer " + std::to_string(transform->layer()) +
                        " exceeds encoder depth " + std::to_string(config_.encoder_blocks));
    }
  }
  if (transform && transform->layer() == 0) x = transform->apply(x);
  ad::Tape& t = x.tape();
  x = ad::dropout(x, config_.dropout);
  x = ad::add(x, t.constant(positional_encoding(s[0], config_.model_dim)));
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    x = encoder_block(enc_[i], x);
    if (transform && transform->layer() == i + 1) x = transform->apply(x);
  }
  return apply(enc_norm_, x);
}

EncoderOutput ConformerModel::encode(ad::Tape& tape, const Tensor& features,
                                     const HiddenTransform* transform) const {
  EncoderOutput out;
  out.subsampled = subsample(tape, features);
  out.hidden = encode_subsampled(out.subsampled, transform);
  return out;
}

Var ConformerModel::ctc_log_probs(Var encoded) const {
  return ad::log_softmax(apply(ctc_out_, encoded));
}

Var ConformerModel::decoder_hidden(Var encoded, std::span<const int> inputs) const {
  if (inputs.empty()) throw DomainError("decoder: empty input sequence");
  const int V = static_cast<int>(vocab_.size());
  for (int id : inputs) {
    if (id < 0 || id >= V) {
      throw DomainError("decoder: token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  ad::Tape& t = encoded.tape();
  const std::size_t U = inputs.size();
  const double p = config_.dropout;
  Var y = ad::embedding(t.param(*embed_), inputs);
  y = ad::add(y, t.constant(positional_encoding(U, config_.model_dim)));
  y = ad::dropout(y, p);
  Tensor causal(Shape{U, U});
  for (std::size_t i = 0; i < U; ++i)
    for (std::size_t j = i + 1; j < U; ++j) causal.at(i, j) = -1e9;
  for (const DecoderBlock& b : dec_) {
    Var n = apply(b.self_norm, y);
    y = ad::add(y, ad::dropout(attention(b.self_att, n, n, U > 1 ? &causal : nullptr), p));
    y = ad::add(y, ad::dropout(attention(b.cross_att, apply(b.cross_norm, y), encoded, nullptr), p));
    Var h = ad::swish(apply(b.up, apply(b.ff_norm, y)));
    y = ad::add(y, ad::dropout(apply(b.down, ad::dropout(h, p)), p));
  }
  return apply(dec_norm_, y);
}

Var ConformerModel::decoder_log_probs(Var encoded, std::span<const int> inputs) const {
  return ad::log_softmax(apply(dec_out_, decoder_hidden(encoded, inputs)));
}

Var ConformerModel::next_token_log_probs(Var encoded, std::span<const int> inputs) const {
  Var h = decoder_hidden(encoded, inputs);
  const std::size_t U = inputs.size();
  return ad::log_softmax(apply(dec_out_, ad::slice_rows(h, U - 1, U)));
}

LossTerms ConformerModel::losses(Var encoded, std::span<const int> tokens, double lambda) const {
  if (tokens.empty()) throw DomainError("losses: empty reference");
  for (int id : tokens) {
    if (!vocab_.is_symbol(id)) {
      throw DomainError("losses: token id " + std::to_string(id) + " is not a symbol");
    }
  }
  LossTerms out;
  out.ctc = ctc_loss(ctc_log_probs(encoded), tokens, vocab_.blank());
  std::vector<int> inputs{vocab_.sos_eos()};
  inputs.insert(inputs.end(), tokens.begin(), tokens.end());
  const std::vector<int> targets = decoder_targets(tokens, vocab_.sos_eos());
  out.attention =
      attention_loss(decoder_log_probs(encoded, inputs), targets, config_.label_smoothing);
  out.total = multitask_loss(out.attention, out.ctc, lambda);
  return out;
}

}  // namespace fsat::asr
