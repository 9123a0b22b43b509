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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsat/asr/model_config.hpp"
#include "fsat/asr/vocab.hpp"
#include "fsat/autodiff/parameter_store.hpp"
#include "fsat/autodiff/tape.hpp"

namespace fsat::asr {

/// Identifier prefix of every canonical (speaker and environment independent)
/// parameter.
inline constexpr const char* kCanonicalPrefix = "canon/";

/// Rewrites the hidden sequence (T' x D) at one insertion layer of the
/// encoder: 0 is the subsampling output, k >= 1 the output of encoder block k.
class HiddenTransform {
 public:
  virtual ~HiddenTransform() = default;
  virtual std::size_t layer() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ad::Var apply(ad::Var hidden) const = 0;
};

struct EncoderOutput {
  ad::Var hidden;      // T' x D after the final encoder norm
  ad::Var subsampled;  // T' x D subsampling output before any transform
};

struct LossTerms {
  ad::Var total;
  ad::Var attention;
  ad::Var ctc;
};

/// Conformer encoder (conv subsampling, macaron feed-forward, self-attention,
/// convolution module) with a Transformer decoder and a CTC head.
///
/// Subsampling is two 3x3 stride-2 convolutions without padding, so
/// T' = floor((floor((T - 3) / 2) + 1 - 3) / 2) + 1 and T must be at least 7.
class ConformerModel {
 public:
  ConformerModel(ModelConfig config, std::uint64_t init_seed);
  /// Adopts existing parameters (e.g. from a checkpoint); names and shapes
  /// must match the architecture exactly.
  ConformerModel(ModelConfig config, ad::ParameterStore params);

  ConformerModel(const ConformerModel& other);
  ConformerModel& operator=(const ConformerModel&) = delete;

  static constexpr std::size_t kMinFrames = 7;
  /// Throws DomainError when frames < kMinFrames.
  static std::size_t subsampled_length(std::size_t frames);

  const ModelConfig& config() const noexcept { return config_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  ad::ParameterStore& params() noexcept { return params_; }
  const ad::ParameterStore& params() const noexcept { return params_; }

  /// features: T x F.
  ad::Var subsample(ad::Tape& tape, const ad::Tensor& features) const;
  /// Encoder stack on a subsampling output already on the tape.
  ad::Var encode_subsampled(ad::Var subsampled, const HiddenTransform* transform) const;
  EncoderOutput encode(ad::Tape& tape, const ad::Tensor& features,
                       const HiddenTransform* transform) const;

  /// T' x V frame log-posteriors of the CTC head.
  ad::Var ctc_log_probs(ad::Var encoded) const;
  /// Decoder log-posteriors (|inputs| x V) for teacher-forced inputs that
  /// start with sos.
  ad::Var decoder_log_probs(ad::Var encoded, std::span<const int> inputs) const;
  /// Only the last row of decoder_log_probs (1 x V).
  ad::Var next_token_log_probs(ad::Var encoded, std::span<const int> inputs) const;

  /// Multitask loss of one utterance with the configured label smoothing.
  LossTerms losses(ad::Var encoded, std::span<const int> tokens, double lambda) const;

 private:
  struct Linear {
    ad::Parameter* w = nullptr;
    ad::Parameter* b = nullptr;
  };
  struct Norm {
    ad::Parameter* gain = nullptr;
    ad::Parameter* bias = nullptr;
  };
  struct FeedForward {
    Norm norm;
    Linear up, down;
  };
  struct Attention {
    Linear q, k, v, out;
  };
  struct EncoderBlock {
    FeedForward ff1, ff2;
    Norm att_norm;
    Attention att;
    Norm conv_norm;
    Linear pw1, pw2;
    ad::Parameter* dw_w = nullptr;
    ad::Parameter* dw_b = nullptr;
    Norm dw_norm;
    Norm final_norm;
  };
  struct DecoderBlock {
    Norm self_norm;
    Attention self_att;
    Norm cross_norm;
    Attention cross_att;
    Norm ff_norm;
    Linear up, down;
  };

  void build(std::uint64_t init_seed, bool create);
  ad::Parameter& param(const std::string& name, ad::Shape shape, bool create, int init,
                       std::uint64_t seed);
  Linear linear(const std::string& name, std::size_t in, std::size_t out, bool create,
                std::uint64_t seed, bool bias = true);
  Norm norm(const std::string& name, std::size_t dim, bool create);

  ad::Var apply(const Linear& l, ad::Var x) const;
  ad::Var apply(const Norm& n, ad::Var x) const;
  ad::Var feed_forward(const FeedForward& f, ad::Var x) const;
  ad::Var attention(const Attention& a, ad::Var query, ad::Var memory,
                    const ad::Tensor* mask) const;
  ad::Var encoder_block(const EncoderBlock& b, ad::Var x) const;
  ad::Var decoder_hidden(ad::Var encoded, std::span<const int> inputs) const;

  ModelConfig config_;
  Vocabulary vocab_;
  mutable ad::ParameterStore params_;
  std::size_t flat_dim_ = 0;

  ad::Parameter* conv1_w_ = nullptr;
  ad::Parameter* conv1_b_ = nullptr;
  ad::Parameter* conv2_w_ = nullptr;
  ad::Parameter* conv2_b_ = nullptr;
  Linear sub_out_;
  std::vector<EncoderBlock> enc_;
  Norm enc_norm_;
  Linear ctc_out_;
  ad::Parameter* embed_ = nullptr;
  std::vector<DecoderBlock> dec_;
  Norm dec_norm_;
  Linear dec_out_;
};

/// Sinusoidal position table, rows x dim.
ad::Tensor positional_encoding(std::size_t rows, std::size_t dim);

}  // namespace fsat::asr
