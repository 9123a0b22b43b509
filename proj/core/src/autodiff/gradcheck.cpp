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

#include "fsat/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <vector>

#include "fsat/error.hpp"

namespace fsat::ad {
namespace {

double evaluate(const LossFunction& loss, std::uint64_t seed, Mode mode) {
  Tape tape(seed, mode);
  return loss(tape).value().item();
}

}  // namespace

GradCheckReport finite_difference_check(const LossFunction& loss,
                                        std::span<Parameter* const> parameters, double step,
                                        std::uint64_t seed, Mode mode) {
  if (!(step > 0.0)) throw DomainError("finite_difference_check: step must be positive");
  GradCheckReport report;
  if (parameters.empty()) return report;

  const double base = evaluate(loss, seed, mode);
  const double again = evaluate(loss, seed, mode);
  if (std::memcmp(&base, &again, sizeof(double)) != 0) {
    throw NumericError("finite_difference_check: loss is not deterministic under a fixed seed");
  }

  // Analytic pass; parameter gradient buffers and flags are restored afterwards.
  std::vector<Tensor> saved_grads;
  std::vector<bool> saved_flags;
  for (Parameter* p : parameters) {
    saved_grads.push_back(p->grad);
    saved_flags.push_back(p->trainable);
    p->trainable = true;
  }
  GradientMap analytic;
  {
    Tape tape(seed, mode);
    Var l = loss(tape);
    analytic = tape.backward(l);
  }
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    parameters[i]->grad = saved_grads[i];
    parameters[i]->trainable = saved_flags[i];
  }

  for (Parameter* p : parameters) {
    const auto it = analytic.find(p->id);
    const Tensor zeros = Tensor::zeros_like(p->value);
    const Tensor& g = it == analytic.end() ? zeros : it->second;
    for (std::size_t k = 0; k < p->value.numel(); ++k) {
      const double original = p->value[k];
      p->value[k] = original + step;
      const double up = evaluate(loss, seed, mode);
      p->value[k] = original - step;
      const double down = evaluate(loss, seed, mode);
      p->value[k] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double rel = std::abs(g[k] - numeric) / std::max(1e-8, std::abs(numeric));
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = std::max(report.max_relative_error, rel);
        if (rel >= report.max_relative_error) {
          report.worst_parameter = p->id;
          report.worst_index = k;
          report.worst_analytic = g[k];
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace fsat::ad
