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

#include "fsat/asr/model_config.hpp"

#include "fsat/asr/vocab.hpp"
#include "fsat/error.hpp"

namespace fsat::asr {

void ModelConfig::validate() const {
  if (feature_dim < 7) throw ConfigError("model: feature_dim must be at least 7");
  if (subsample_channels == 0) throw ConfigError("model: subsample_channels must be positive");
  if (encoder_blocks == 0) throw ConfigError("model: encoder_blocks must be positive");
  if (decoder_blocks == 0) throw ConfigError("model: decoder_blocks must be positive");
  if (model_dim == 0 || heads == 0) throw ConfigError("model: model_dim and heads must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError("model: model_dim " + std::to_string(model_dim) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (ff_dim == 0) throw ConfigError("model: ff_dim must be positive");
  if (conv_kernel % 2 == 0) throw ConfigError("model: conv_kernel must be odd");
  if (!(lambda_train >= 0.0 && lambda_train <= 1.0)) {
    throw ConfigError("model: lambda_train must lie in [0,1]");
  }
  if (!(lambda_decode >= 0.0 && lambda_decode <= 1.0)) {
    throw ConfigError("model: lambda_decode must lie in [0,1]");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0,1)");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("model: label_smoothing must lie in [0,1)");
  }
  Vocabulary check(alphabet);
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& kv, const std::string& p) {
  ModelConfig c;
  c.feature_dim = kv.get_size(p + "feature_dim", c.feature_dim);
  c.subsample_channels = kv.get_size(p + "subsample_channels", c.subsample_channels);
  c.encoder_blocks = kv.get_size(p + "encoder_blocks", c.encoder_blocks);
  c.decoder_blocks = kv.get_size(p + "decoder_blocks", c.decoder_blocks);
  c.model_dim = kv.get_size(p + "model_dim", c.model_dim);
  c.heads = kv.get_size(p + "heads", c.heads);
  c.ff_dim = kv.get_size(p + "ff_dim", c.ff_dim);
  c.conv_kernel = kv.get_size(p + "conv_kernel", c.conv_kernel);
  c.alphabet = kv.get_string(p + "alphabet", c.alphabet);
  c.lambda_train = kv.get_double(p + "lambda_train", c.lambda_train);
  c.lambda_decode = kv.get_double(p + "lambda_decode", c.lambda_decode);
  c.dropout = kv.get_double(p + "dropout", c.dropout);
  c.label_smoothing = kv.get_double(p + "label_smoothing", c.label_smoothing);
  c.validate();
  return c;
}

void ModelConfig::to_config(KeyValueConfig& kv, const std::string& p) const {
  kv.set_size(p + "feature_dim", feature_dim);
  kv.set_size(p + "subsample_channels", subsample_channels);
  kv.set_size(p + "encoder_blocks", encoder_blocks);
  kv.set_size(p + "decoder_blocks", decoder_blocks);
  kv.set_size(p + "model_dim", model_dim);
  kv.set_size(p + "heads", heads);
  kv.set_size(p + "ff_dim", ff_dim);
  kv.set_size(p + "conv_kernel", conv_kernel);
  kv.set(p + "alphabet", alphabet);
  kv.set(p + "lambda_train", lambda_train);
  kv.set(p + "lambda_decode", lambda_decode);
  kv.set(p + "dropout", dropout);
  kv.set(p + "label_smoothing", label_smoothing);
}

std::vector<std::string> ModelConfig::keys(const std::string& p) {
  return {p + "feature_dim",   p + "subsample_channels", p + "encoder_blocks",
          p + "decoder_blocks", p + "model_dim",         p + "heads",
          p + "ff_dim",        p + "conv_kernel",        p + "alphabet",
          p + "lambda_train",  p + "lambda_decode",      p + "dropout",
          p + "label_smoothing"};
}

}  // namespace fsat::asr
