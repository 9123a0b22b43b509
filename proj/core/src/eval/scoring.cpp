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

#include "fsat/eval/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

#include "fsat/error.hpp"

namespace fsat::eval {

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference_tokens += o.reference_tokens;
  return *this;
}

AlignmentResult edit_align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t R = ref.size(), H = hyp.size();
  std::vector<std::size_t> d((R + 1) * (H + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (H + 1) + j]; };
  for (std::size_t i = 0; i <= R; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= H; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= R; ++i) {
    for (std::size_t j = 1; j <= H; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  AlignmentResult out;
  out.counts.reference_tokens = R;
  std::size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      const bool same = ref[i - 1] == hyp[j - 1];
      out.pairs.push_back({same ? EditOp::kMatch : EditOp::kSubstitution, ref[i - 1], hyp[j - 1]});
      if (!same) ++out.counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      out.pairs.push_back({EditOp::kDeletion, ref[i - 1], ""});
      ++out.counts.deletions;
      --i;
    } else {
      out.pairs.push_back({EditOp::kInsertion, "", hyp[j - 1]});
      ++out.counts.insertions;
      --j;
    }
  }
  std::reverse(out.pairs.begin(), out.pairs.end());
  return out;
}

std::vector<std::string> char_tokens(const std::string& text) {
  std::vector<std::string> out;
  for (char c : text) {
    if (c != ' ' && c != '\t') out.emplace_back(1, c);
  }
  return out;
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double error_rate(const ErrorCounts& c) {
  if (c.reference_tokens == 0) throw DomainError("error rate: reference holds no tokens");
  return 100.0 * static_cast<double>(c.errors()) / static_cast<double>(c.reference_tokens);
}

GroupKey parse_group_key(const std::string& text) {
  if (text == "env") return GroupKey::kEnvironment;
  if (text == "snr") return GroupKey::kSnr;
  if (text == "seen") return GroupKey::kSeen;
  if (text == "speaker") return GroupKey::kSpeaker;
  throw ConfigError("unknown grouping '" + text + "' (env, snr, seen, speaker)");
}

const char* group_key_name(GroupKey key) {
  switch (key) {
    case GroupKey::kEnvironment: return "env";
    case GroupKey::kSnr: return "snr";
    case GroupKey::kSeen: return "seen";
    case GroupKey::kSpeaker: return "speaker";
  }
  return "?";
}

void ScoreReport::add(UtteranceScore score) { utterances_.push_back(std::move(score)); }

ErrorCounts ScoreReport::total() const {
  ErrorCounts c;
  for (const UtteranceScore& u : utterances_) c += u.counts;
  return c;
}

std::map<std::string, ErrorCounts> ScoreReport::grouped(GroupKey key) const {
  std::map<std::string, ErrorCounts> out;
  for (const UtteranceScore& u : utterances_) {
    std::string g = "-";
    switch (key) {
      case GroupKey::kEnvironment: g = u.env_id; break;
      case GroupKey::kSpeaker: g = u.speaker_id; break;
      case GroupKey::kSnr:
        if (u.snr_db) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%g", *u.snr_db);
          g = buf;
        }
        break;
      case GroupKey::kSeen:
        if (u.seen) g = *u.seen ? "seen" : "unseen";
        break;
    }
    out[g] += u.counts;
  }
  return out;
}

ConfidenceInterval ScoreReport::bootstrap(std::size_t resamples, double level,
                                          std::uint64_t seed) const {
  if (utterances_.empty()) throw DomainError("bootstrap: no utterances");
  if (resamples == 0 || !(level > 0.0 && level < 1.0)) {
    throw DomainError("bootstrap: need resamples > 0 and level in (0,1)");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, utterances_.size() - 1);
  std::vector<double> rates;
  rates.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    ErrorCounts c;
    for (std::size_t i = 0; i < utterances_.size(); ++i) c += utterances_[pick(rng)].counts;
    if (c.reference_tokens > 0) rates.push_back(eval::error_rate(c));
  }
  if (rates.empty()) throw DomainError("bootstrap: every resample had an empty reference");
  std::sort(rates.begin(), rates.end());
  const double tail = (1.0 - level) / 2.0;
  auto q = [&](double p) {
    const auto idx = static_cast<std::size_t>(p * static_cast<double>(rates.size() - 1) + 0.5);
    return rates[std::min(idx, rates.size() - 1)];
  };
  return {q(tail), q(1.0 - tail), rates.size()};
}

namespace {

std::string row(const std::string& group, const std::string& value, const ErrorCounts& c,
                bool tsv) {
  char buf[256];
  const double rate = c.reference_tokens ? error_rate(c) : 0.0;
  if (tsv) {
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%zu\t%zu\t%zu\t%zu\t%.4f\n", group.c_str(),
                  value.c_str(), c.reference_tokens, c.substitutions, c.deletions, c.insertions,
                  rate);
  } else {
    std::snprintf(buf, sizeof(buf), "%-8s %-16s %8zu %6zu %6zu %6zu %8.2f\n", group.c_str(),
                  value.c_str(), c.reference_tokens, c.substitutions, c.deletions, c.insertions,
                  rate);
  }
  return buf;
}

}  // namespace

std::string ScoreReport::to_text(std::span<const GroupKey> keys) const {
  std::string out;
  char head[128];
  std::snprintf(head, sizeof(head), "%-8s %-16s %8s %6s %6s %6s %8s\n", "group", "value", "tokens",
                "sub", "del", "ins", "err%");
  out += head;
  out += row("all", "all", total(), false);
  for (GroupKey k : keys) {
    for (const auto& [g, c] : grouped(k)) out += row(group_key_name(k), g, c, false);
  }
  return out;
}

std::string ScoreReport::to_tsv(std::span<const GroupKey> keys) const {
  std::string out = "group\tvalue\ttokens\tsub\tdel\tins\terror_rate\n";
  out += row("all", "all", total(), true);
  for (GroupKey k : keys) {
    for (const auto& [g, c] : grouped(k)) out += row(group_key_name(k), g, c, true);
  }
  return out;
}

}  // namespace fsat::eval
