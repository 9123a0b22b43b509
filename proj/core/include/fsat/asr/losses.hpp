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
#include <span>
#include <vector>

#include "fsat/autodiff/tape.hpp"

namespace fsat::asr {

/// Frames needed to emit `labels`: one per label plus a separating blank
/// between every pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const int> labels);

/// -log sum over all blank-augmented alignments of prod_t p_t(path_t).
/// log_probs: T x V frame log-posteriors. Throws NumericError when no
/// alignment fits in T frames.
ad::Var ctc_loss(ad::Var log_probs, std::span<const int> labels, int blank = 0);

/// Teacher-forced cross-entropy averaged over target positions.
/// log_probs: U x V decoder log-posteriors, targets: U ids (eos included by
/// the caller). With smoothing e the target distribution puts 1-e on the
/// reference id and e/(V-1) on every other id.
ad::Var attention_loss(ad::Var log_probs, std::span<const int> targets, double smoothing);

/// (1 - lambda) * att + lambda * ctc.
ad::Var multitask_loss(ad::Var att, ad::Var ctc, double lambda);

/// Incremental CTC prefix probabilities for joint decoding. Holds log-space
/// forward variables for one prefix; extend() produces the child state.
class CtcPrefixScorer {
 public:
  struct State {
    std::vector<double> r_blank;     // log P(prefix, ends in blank | x_1..t)
    std::vector<double> r_nonblank;  // log P(prefix, ends in last label | x_1..t)
    int last = -1;
    double prefix_score = 0.0;       // log P(prefix as a prefix of the output)
  };

  /// log_probs: T x V frame log-posteriors (copied).
  CtcPrefixScorer(const ad::Tensor& log_probs, int blank);

  State initial() const;
  /// Prefix probability of prefix+token as a strict prefix.
  State extend(const State& parent, int token) const;
  /// log P(prefix is the complete output).
  double final_score(const State& state) const;

  std::size_t frames() const noexcept { return frames_; }

 private:
  ad::Tensor lp_;
  std::size_t frames_;
  int blank_;
};

}  // namespace fsat::asr
