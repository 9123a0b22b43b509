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

#include "fsat/asr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"

namespace fsat::asr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

ad::Var ctc_loss(ad::Var log_probs, std::span<const int> labels, int blank) {
  const ad::Tensor& lp = log_probs.value();
  if (lp.rank() != 2) {
    throw ShapeError("ctc_loss: expected T x V log-probabilities, got " +
                     ad::shape_string(lp.shape()));
  }
  const std::size_t T = lp.rows(), V = lp.cols();
  if (blank < 0 || static_cast<std::size_t>(blank) >= V) {
    throw DomainError("ctc_loss: blank id outside vocabulary");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= V || l == blank) {
      throw DomainError("ctc_loss: label id " + std::to_string(l) + " is not a valid symbol");
    }
  }
  const std::size_t need = ctc_min_frames(labels);
  if (need > T) {
    throw NumericError("ctc_loss: " + std::to_string(labels.size()) + " labels need at least " +
                       std::to_string(need) + " frames, got " + std::to_string(T));
  }
  const std::size_t S = 2 * labels.size() + 1;
  std::vector<int> ext(S, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(T * S, kNegInf), beta(T * S, kNegInf);
  alpha[0] = lp.at(0, static_cast<std::size_t>(blank));
  if (S > 1) alpha[1] = lp.at(0, static_cast<std::size_t>(ext[1]));
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * S];
    double* cur = &alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = lse(a, prev[s - 1]);
      if (skip_ok(s)) a = lse(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + lp.at(t, static_cast<std::size_t>(ext[s]));
    }
  }
  double log_p = alpha[(T - 1) * S + S - 1];
  if (S > 1) log_p = lse(log_p, alpha[(T - 1) * S + S - 2]);
  if (!std::isfinite(log_p)) {
    throw NumericError("ctc_loss: total alignment probability underflowed");
  }

  beta[(T - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(T - 1) * S + S - 2] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = &beta[(t + 1) * S];
    double* cur = &beta[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double b = next[s] + lp.at(t + 1, static_cast<std::size_t>(ext[s]));
      if (s + 1 < S) b = lse(b, next[s + 1] + lp.at(t + 1, static_cast<std::size_t>(ext[s + 1])));
      if (s + 2 < S && skip_ok(s + 2)) {
        b = lse(b, next[s + 2] + lp.at(t + 1, static_cast<std::size_t>(ext[s + 2])));
      }
      cur[s] = b;
    }
  }

  // d(-log p)/d lp[t][k] = -sum_{s: ext[s]=k} exp(alpha + beta - log p).
  ad::Tensor grad(lp.shape());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = alpha[t * S + s] + beta[t * S + s];
      if (ab == kNegInf) continue;
      grad.at(t, static_cast<std::size_t>(ext[s])) -= std::exp(ab - log_p);
    }
  }
  const auto in = log_probs.index();
  return log_probs.tape().record(
      "ctc_loss", ad::Tensor::scalar(-log_p), {log_probs},
      [in, grad = std::move(grad)](ad::Tape& tape, std::uint32_t self) {
        const double g = tape.out_grad(self).item();
        ad::Tensor& gi = tape.grad_of(in);
        for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += g * grad[i];
      });
}

ad::Var attention_loss(ad::Var log_probs, std::span<const int> targets, double smoothing) {
  const ad::Tensor& lp = log_probs.value();
  if (lp.rank() != 2) {
    throw ShapeError("attention_loss: expected U x V log-probabilities, got " +
                     ad::shape_string(lp.shape()));
  }
  if (targets.empty()) throw DomainError("attention_loss: empty target sequence");
  if (lp.rows() != targets.size()) {
    throw ShapeError("attention_loss: " + std::to_string(lp.rows()) + " rows for " +
                     std::to_string(targets.size()) + " targets");
  }
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw DomainError("attention_loss: smoothing must lie in [0,1)");
  }
  const std::size_t U = targets.size(), V = lp.cols();
  if (V < 2 && smoothing > 0.0) throw DomainError("attention_loss: smoothing needs V >= 2");
  const double off = V > 1 ? smoothing / static_cast<double>(V - 1) : 0.0;
  const double inv_u = 1.0 / static_cast<double>(U);
  ad::Tensor weights(lp.shape());
  for (std::size_t u = 0; u < U; ++u) {
    const int y = targets[u];
    if (y < 0 || static_cast<std::size_t>(y) >= V) {
      throw DomainError("attention_loss: token id " + std::to_string(y) + " outside vocabulary");
    }
    for (std::size_t v = 0; v < V; ++v) weights.at(u, v) = -off * inv_u;
    weights.at(u, static_cast<std::size_t>(y)) = -(1.0 - smoothing) * inv_u;
  }
  return ad::weighted_sum(log_probs, weights);
}

ad::Var multitask_loss(ad::Var att, ad::Var ctc, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DomainError("multitask_loss: lambda must lie in [0,1], got " + std::to_string(lambda));
  }
  if (!att.value().is_scalar() || !ctc.value().is_scalar()) {
    throw ShapeError("multitask_loss: both terms must be scalars");
  }
  if (lambda == 0.0) return att;
  if (lambda == 1.0) return ctc;
  return ad::add(ad::scale(att, 1.0 - lambda), ad::scale(ctc, lambda));
}

CtcPrefixScorer::CtcPrefixScorer(const ad::Tensor& log_probs, int blank)
    : lp_(log_probs), frames_(log_probs.rows()), blank_(blank) {
  if (log_probs.rank() != 2 || frames_ == 0) {
    throw ShapeError("ctc prefix scorer: expected non-empty T x V log-probabilities");
  }
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  State s;
  s.r_blank.assign(frames_, kNegInf);
  s.r_nonblank.assign(frames_, kNegInf);
  double acc = 0.0;
  for (std::size_t t = 0; t < frames_; ++t) {
    acc += lp_.at(t, static_cast<std::size_t>(blank_));
    s.r_blank[t] = acc;
  }
  return s;
}

CtcPrefixScorer::State CtcPrefixScorer::extend(const State& parent, int token) const {
  const auto c = static_cast<std::size_t>(token);
  const bool is_empty_prefix = parent.last < 0;
  State out;
  out.last = token;
  out.r_blank.assign(frames_, kNegInf);
  out.r_nonblank.assign(frames_, kNegInf);
  // Probability mass of the parent prefix that may be followed by c at t.
  auto phi = [&](std::size_t t) {
    if (parent.last == token) return parent.r_blank[t];
    return lse(parent.r_blank[t], parent.r_nonblank[t]);
  };
  if (is_empty_prefix) out.r_nonblank[0] = lp_.at(0, c);
  double psi = out.r_nonblank[0];
  for (std::size_t t = 1; t < frames_; ++t) {
    const double ph = phi(t - 1);
    out.r_nonblank[t] = lse(out.r_nonblank[t - 1], ph) + lp_.at(t, c);
    out.r_blank[t] =
        lse(out.r_blank[t - 1], out.r_nonblank[t - 1]) + lp_.at(t, static_cast<std::size_t>(blank_));
    psi = lse(psi, ph + lp_.at(t, c));
  }
  out.prefix_score = psi;
  return out;
}

double CtcPrefixScorer::final_score(const State& state) const {
  return lse(state.r_blank[frames_ - 1], state.r_nonblank[frames_ - 1]);
}

}  // namespace fsat::asr
