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

#include "fsat/asr/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsat/asr/losses.hpp"
#include "fsat/autodiff/ops.hpp"
#include "fsat/error.hpp"

namespace fsat::asr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Partial {
  std::vector<int> tokens;
  double att = 0.0;
  double score = 0.0;
  CtcPrefixScorer::State ctc;
};

struct Candidate {
  std::size_t parent;
  int token;
  double att;
  double ctc;
  double score;
};

bool token_less(const std::vector<int>& pa, int ta, const std::vector<int>& pb, int tb) {
  const std::size_t n = std::min(pa.size(), pb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] != pb[i]) return pa[i] < pb[i];
  }
  if (pa.size() != pb.size()) {
    // Equal-length extensions are the only ones compared within one step.
    return pa.size() < pb.size();
  }
  return ta < tb;
}

}  // namespace

Hypothesis beam_search(const ConformerModel& model, ad::Var encoded, const DecodeOptions& options) {
  if (options.beam == 0) throw DomainError("decode: beam must be at least 1");
  if (!(options.ctc_weight >= 0.0 && options.ctc_weight <= 1.0)) {
    throw DomainError("decode: ctc weight must lie in [0,1]");
  }
  const Vocabulary& vocab = model.vocab();
  const int eos = vocab.sos_eos();
  const double w = options.ctc_weight;
  const std::size_t frames = encoded.value().rows();
  const std::size_t max_len = options.max_length == 0 ? frames : options.max_length;

  const ad::Tensor ctc_lp = model.ctc_log_probs(encoded).value();
  const CtcPrefixScorer scorer(ctc_lp, vocab.blank());

  std::vector<Partial> alive(1);
  alive[0].ctc = scorer.initial();
  std::vector<Hypothesis> ended;

  auto finish = [&](const Partial& p, double att, double ctc, double score) {
    Hypothesis h;
    h.tokens = p.tokens;
    h.text = vocab.decode(h.tokens);
    h.attention_score = att;
    h.ctc_score = ctc;
    h.score = score;
    ended.push_back(std::move(h));
  };
  auto joint = [w](double att, double ctc) {
    if (w == 0.0) return att;
    if (w == 1.0) return ctc;
    return (1.0 - w) * att + w * ctc;
  };

  for (std::size_t step = 0; step <= max_len && !alive.empty(); ++step) {
    const bool last_step = step == max_len;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const Partial& p = alive[i];
      std::vector<int> inputs{eos};
      inputs.insert(inputs.end(), p.tokens.begin(), p.tokens.end());
      const ad::Tensor att_lp = model.next_token_log_probs(encoded, inputs).value();
      const double eos_ctc = w > 0.0 ? scorer.final_score(p.ctc) : 0.0;
      const double eos_att = p.att + att_lp[static_cast<std::size_t>(eos)];
      if (eos_ctc != kNegInf) {
        cands.push_back({i, eos, eos_att, eos_ctc, joint(eos_att, eos_ctc)});
      }
      if (last_step) continue;
      for (int c = 1; c < eos; ++c) {
        const double att = p.att + att_lp[static_cast<std::size_t>(c)];
        double ctc = 0.0;
        if (w > 0.0) {
          ctc = scorer.extend(p.ctc, c).prefix_score;
          if (ctc == kNegInf) continue;
        }
        cands.push_back({i, c, att, ctc, joint(att, ctc)});
      }
    }
    if (cands.empty()) break;
    const std::size_t keep = std::min(options.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return token_less(alive[a.parent].tokens, a.token,
                                          alive[b.parent].tokens, b.token);
                      });
    std::vector<Partial> next;
    for (std::size_t j = 0; j < keep; ++j) {
      const Candidate& c = cands[j];
      const Partial& parent = alive[c.parent];
      if (c.token == eos) {
        finish(parent, c.att, c.ctc, c.score);
        continue;
      }
      Partial child;
      child.tokens = parent.tokens;
      child.tokens.push_back(c.token);
      child.att = c.att;
      child.score = c.score;
      child.ctc = w > 0.0 ? scorer.extend(parent.ctc, c.token) : parent.ctc;
      next.push_back(std::move(child));
    }
    alive = std::move(next);
    if (!ended.empty() && !alive.empty()) {
      double best_end = kNegInf, best_alive = kNegInf;
      for (const Hypothesis& h : ended) best_end = std::max(best_end, h.score);
      for (const Partial& p : alive) best_alive = std::max(best_alive, p.score);
      if (best_end >= best_alive) break;
    }
  }
  if (ended.empty()) {
    throw NumericError("decode: no hypothesis reached eos within " + std::to_string(max_len) +
                       " symbols");
  }
  std::stable_sort(ended.begin(), ended.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  return ended.front();
}

Hypothesis decode(const ConformerModel& model, const ad::Tensor& features,
                  const HiddenTransform* transform, const DecodeOptions& options) {
  ad::Tape tape(0, ad::Mode::kEval);
  const EncoderOutput enc = model.encode(tape, features, transform);
  return beam_search(model, enc.hidden, options);
}

}  // namespace fsat::asr
