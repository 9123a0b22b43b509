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

#include "fsat/adapt/algebra.hpp"

#include <cmath>
#include <string>

#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"

namespace fsat::adapt {
namespace {

std::size_t hidden_dim(const ad::Var& h) { return h.value().cols(); }

void require_vector(const char* op, ad::Var h, ad::Var v) {
  const ad::Tensor& t = v.value();
  if (t.rank() != 1 || t.numel() != hidden_dim(h)) {
    throw ShapeError(std::string(op) + ": transform " + ad::shape_string(t.shape()) +
                     " does not match hidden " + ad::shape_string(h.shape()));
  }
}

void require_positive(const ad::Tensor& sigma) {
  for (double s : sigma.values()) {
    if (!(s > 0.0)) throw DomainError("kl_to_prior: deviations must be strictly positive");
  }
}

}  // namespace

const char* kind_name(TransformKind kind) { return kind == TransformKind::kLhuc ? "lhuc" : "hub"; }

TransformKind parse_kind(const std::string& text) {
  if (text == "lhuc") return TransformKind::kLhuc;
  if (text == "hub") return TransformKind::kHub;
  throw ConfigError("unknown transform kind '" + text + "' (expected lhuc or hub)");
}

ad::Var lhuc_scale(ad::Var r) { return ad::scale(ad::sigmoid(r), 2.0); }

ad::Var lhuc_apply(ad::Var h, ad::Var r) {
  require_vector("lhuc_apply", h, r);
  return ad::mul(h, lhuc_scale(r));
}

ad::Var hub_apply(ad::Var h, ad::Var bias) {
  require_vector("hub_apply", h, bias);
  return ad::add(h, bias);
}

ad::Var apply_kind(TransformKind kind, ad::Var h, ad::Var v) {
  return kind == TransformKind::kLhuc ? lhuc_apply(h, v) : hub_apply(h, v);
}

ad::Var lfa_apply(ad::Var h, ad::Var r, ad::Var n, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw DomainError("lfa_apply: beta must lie in [0,1], got " + std::to_string(beta));
  }
  require_vector("lfa_apply", h, r);
  require_vector("lfa_apply", h, n);
  if (beta == 1.0) return lhuc_apply(h, r);
  if (beta == 0.0) return lhuc_apply(h, n);
  ad::Var xr = lhuc_scale(r);
  ad::Var xn = lhuc_scale(n);
  return ad::mul(h, ad::add(xn, ad::scale(ad::sub(xr, xn), beta)));
}

ad::Var cfa_apply(ad::Var h, ad::Var r, TransformKind speaker_kind, ad::Var n,
                  TransformKind env_kind) {
  require_vector("cfa_apply", h, r);
  require_vector("cfa_apply", h, n);
  if (speaker_kind == TransformKind::kHub && env_kind == TransformKind::kHub) {
    return ad::add(h, ad::add(r, n));
  }
  return apply_kind(env_kind, apply_kind(speaker_kind, h, r), n);
}

ad::Var kl_to_prior(ad::Var mu_q, ad::Var log_sigma_q, const ad::Tensor& mu_p,
                    const ad::Tensor& sigma_p) {
  const ad::Shape& s = mu_q.shape();
  if (log_sigma_q.shape() != s || mu_p.shape() != s || sigma_p.shape() != s) {
    throw ShapeError("kl_to_prior: mean, deviation and prior shapes differ");
  }
  require_positive(sigma_p);
  ad::Tensor log_sp(s), inv_2vp(s);
  for (std::size_t i = 0; i < sigma_p.numel(); ++i) {
    log_sp[i] = std::log(sigma_p[i]);
    inv_2vp[i] = 1.0 / (2.0 * sigma_p[i] * sigma_p[i]);
  }
  ad::Tape& t = mu_q.tape();
  ad::Var var_q = ad::exp(ad::scale(log_sigma_q, 2.0));
  ad::Var diff2 = ad::square(ad::sub(mu_q, t.constant(mu_p)));
  ad::Var quad = ad::mul(ad::add(var_q, diff2), t.constant(inv_2vp));
  ad::Var per_dim = ad::add_scalar(ad::add(ad::sub(t.constant(log_sp), log_sigma_q), quad), -0.5);
  return ad::sum(per_dim);
}

double kl_to_prior(const ad::Tensor& mu_q, const ad::Tensor& sigma_q, const ad::Tensor& mu_p,
                   const ad::Tensor& sigma_p) {
  if (sigma_q.shape() != mu_q.shape() || mu_p.shape() != mu_q.shape() ||
      sigma_p.shape() != mu_q.shape()) {
    throw ShapeError("kl_to_prior: mean, deviation and prior shapes differ");
  }
  require_positive(sigma_q);
  require_positive(sigma_p);
  double kl = 0.0;
  for (std::size_t i = 0; i < mu_q.numel(); ++i) {
    const double d = mu_q[i] - mu_p[i];
    kl += std::log(sigma_p[i] / sigma_q[i]) +
          (sigma_q[i] * sigma_q[i] + d * d) / (2.0 * sigma_p[i] * sigma_p[i]) - 0.5;
  }
  return kl;
}

ad::Var sample_transform(ad::Var mu, ad::Var log_sigma, const ad::Tensor& eps) {
  if (log_sigma.shape() != mu.shape() || eps.shape() != mu.shape()) {
    throw ShapeError("sample_transform: eps " + ad::shape_string(eps.shape()) + " vs mean " +
                     ad::shape_string(mu.shape()));
  }
  return ad::add(mu, ad::mul(ad::exp(log_sigma), mu.tape().constant(eps)));
}

}  // namespace fsat::adapt
