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
#include <map>
#include <string>
#include <vector>

#include "fsat/autodiff/tape.hpp"

namespace fsat::asr {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 5.0;
  /// Noam schedule: lr = factor * dim^-0.5 * min(step^-0.5, step * warmup^-1.5).
  bool noam = false;
  double noam_factor = 5.0;
  std::size_t noam_warmup = 25000;
  std::size_t noam_dim = 256;
};

/// Adam over the trainable members of a parameter list. Moments are keyed by
/// parameter identifier, so the list may be rebuilt between steps.
class Adam {
 public:
  explicit Adam(AdamOptions options);

  /// Applies one update from Parameter::grad and returns the learning rate used.
  double step(const std::vector<ad::Parameter*>& params);
  std::size_t steps() const noexcept { return step_; }
  double learning_rate_at(std::size_t step) const;

 private:
  struct Moments {
    ad::Tensor m, v;
  };
  AdamOptions opt_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace fsat::asr
