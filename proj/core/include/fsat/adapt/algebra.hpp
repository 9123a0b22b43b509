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

#include <string>

#include "fsat/autodiff/tape.hpp"

// Hidden-unit transforms. Hidden inputs are T x D (or a single D vector);
// transform vectors have length D and broadcast over time.

namespace fsat::adapt {

enum class TransformKind { kLhuc, kHub };

const char* kind_name(TransformKind kind);
TransformKind parse_kind(const std::string& text);

/// 2 * sigmoid(r): the LHUC amplitude in (0, 2).
ad::Var lhuc_scale(ad::Var r);

/// h * 2 sigmoid(r).
ad::Var lhuc_apply(ad::Var h, ad::Var r);
/// h + bias.
ad::Var hub_apply(ad::Var h, ad::Var bias);
ad::Var apply_kind(TransformKind kind, ad::Var h, ad::Var v);

/// h * (beta xi(r) + (1 - beta) xi(n)), evaluated as xi(n) + beta (xi(r) - xi(n))
/// so that equal factors give exactly xi(r); beta 0 and 1 take the single
/// transform path bit for bit.
ad::Var lfa_apply(ad::Var h, ad::Var r, ad::Var n, double beta);

/// Speaker transform followed by environment transform:
///   LHUC,LHUC: (h * xi(r)) * xi(n)    HUB,HUB: h + (r + n)
///   LHUC,HUB:  h * xi(r) + n          HUB,LHUC: (h + r) * xi(n)
ad::Var cfa_apply(ad::Var h, ad::Var r, TransformKind speaker_kind, ad::Var n,
                  TransformKind env_kind);

/// KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) summed over dimensions with
/// sigma_q = exp(log_sigma_q).
ad::Var kl_to_prior(ad::Var mu_q, ad::Var log_sigma_q, const ad::Tensor& mu_p,
                    const ad::Tensor& sigma_p);
double kl_to_prior(const ad::Tensor& mu_q, const ad::Tensor& sigma_q, const ad::Tensor& mu_p,
                   const ad::Tensor& sigma_p);

/// mu + exp(log_sigma) * eps; differentiable in mu and log_sigma.
ad::Var sample_transform(ad::Var mu, ad::Var log_sigma, const ad::Tensor& eps);

}  // namespace fsat::adapt
