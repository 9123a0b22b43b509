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

#include "fsat/asr/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "fsat/error.hpp"

namespace fsat::asr {

Adam::Adam(AdamOptions options) : opt_(options) {
  if (!(opt_.learning_rate > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(opt_.beta1 >= 0.0 && opt_.beta1 < 1.0 && opt_.beta2 >= 0.0 && opt_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0,1)");
  }
  if (opt_.noam && opt_.noam_warmup == 0) throw ConfigError("adam: noam warmup must be positive");
}

double Adam::learning_rate_at(std::size_t step) const {
  if (!opt_.noam) return opt_.learning_rate;
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(opt_.noam_warmup);
  return opt_.noam_factor / std::sqrt(static_cast<double>(opt_.noam_dim)) *
         std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

double Adam::step(const std::vector<ad::Parameter*>& params) {
  ++step_;
  double scale = 1.0;
  if (opt_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const ad::Parameter* p : params) {
      if (!p->trainable) continue;
      for (double g : p->grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("adam: non-finite gradient norm");
    if (norm > opt_.clip_norm) scale = opt_.clip_norm / norm;
  }
  const double lr = learning_rate_at(step_);
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
  for (ad::Parameter* p : params) {
    if (!p->trainable) continue;
    auto it = state_.find(p->id);
    if (it == state_.end()) {
      it = state_.emplace(p->id, Moments{ad::Tensor::zeros_like(p->value),
                                         ad::Tensor::zeros_like(p->value)}).first;
    }
    Moments& mo = it->second;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad[i] * scale;
      mo.m[i] = opt_.beta1 * mo.m[i] + (1.0 - opt_.beta1) * g;
      mo.v[i] = opt_.beta2 * mo.v[i] + (1.0 - opt_.beta2) * g * g;
      p->value[i] -= lr * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + opt_.epsilon);
    }
  }
  return lr;
}

}  // namespace fsat::asr
