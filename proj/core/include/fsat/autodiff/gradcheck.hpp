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

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "fsat/autodiff/tape.hpp"

namespace fsat::ad {

using LossFunction = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients against central differences for every
/// entry of every parameter. Each evaluation runs on a fresh tape seeded with
/// `seed` in the given mode, so stochastic layers replay the same draws.
/// Relative error is |analytic - numeric| / max(1e-8, |numeric|).
/// Throws NumericError when two evaluations at the same point disagree.
GradCheckReport finite_difference_check(const LossFunction& loss,
                                        std::span<Parameter* const> parameters,
                                        double step = 1e-5, std::uint64_t seed = 0,
                                        Mode mode = Mode::kEval);

}  // namespace fsat::ad
