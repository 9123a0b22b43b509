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
#include <string>

#include "fsat/config_io.hpp"

namespace fsat::asr {

struct ModelConfig {
  std::size_t feature_dim = 40;
  std::size_t subsample_channels = 16;
  std::size_t encoder_blocks = 2;
  std::size_t decoder_blocks = 1;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::size_t conv_kernel = 7;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";
  double lambda_train = 0.2;
  double lambda_decode = 0.3;
  double dropout = 0.1;
  double label_smoothing = 0.1;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;

  /// Reads/writes keys under `prefix` (e.g. "model."). Missing keys keep defaults.
  static ModelConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "");
  void to_config(KeyValueConfig& kv, const std::string& prefix = "") const;
  static std::vector<std::string> keys(const std::string& prefix = "");
};

}  // namespace fsat::asr
