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
#include <vector>

#include "fsat/asr/model.hpp"

namespace fsat::asr {

struct DecodeOptions {
  std::size_t beam = 1;
  double ctc_weight = 0.3;
  /// Upper bound on emitted symbols; 0 means the encoder length T'.
  std::size_t max_length = 0;
};

struct Hypothesis {
  std::vector<int> tokens;  // symbols only, no blank / sos / eos
  std::string text;
  double score = 0.0;           // (1 - w) * attention + w * ctc, eos included
  double attention_score = 0.0;
  double ctc_score = 0.0;
};

/// Joint CTC-prefix / attention beam search. Candidates are ranked by joint
/// score, then by token ids ascending. A finished hypothesis that scores at
/// least as well as every live one ends the search, which is exact because
/// both partial scores only decrease as a prefix grows.
Hypothesis beam_search(const ConformerModel& model, ad::Var encoded, const DecodeOptions& options);

/// Encodes in eval mode and runs beam_search.
Hypothesis decode(const ConformerModel& model, const ad::Tensor& features,
                  const HiddenTransform* transform, const DecodeOptions& options);

}  // namespace fsat::asr
