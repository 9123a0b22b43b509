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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fsat::eval {

enum class EditOp { kMatch, kSubstitution, kDeletion, kInsertion };

struct AlignedPair {
  EditOp op;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_tokens = 0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
  ErrorCounts& operator+=(const ErrorCounts& o);
};

struct AlignmentResult {
  ErrorCounts counts;
  std::vector<AlignedPair> pairs;
};

/// Minimum unit-cost edit alignment. The backtrace prefers substitution (or
/// match), then deletion, then insertion.
AlignmentResult edit_align(std::span<const std::string> ref, std::span<const std::string> hyp);

/// One token per character.
std::vector<std::string> char_tokens(const std::string& text);
/// Whitespace separated words.
std::vector<std::string> word_tokens(const std::string& text);

/// 100 (S + D + I) / N_ref from summed counts. Throws DomainError when the
/// reference holds no tokens.
double error_rate(const ErrorCounts& counts);

struct UtteranceScore {
  std::string utterance_id;
  std::string speaker_id;
  std::string env_id;
  std::optional<double> snr_db;
  std::optional<bool> seen;
  ErrorCounts counts;
};

enum class GroupKey { kEnvironment, kSnr, kSeen, kSpeaker };
GroupKey parse_group_key(const std::string& text);
const char* group_key_name(GroupKey key);

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t resamples = 0;
};

class ScoreReport {
 public:
  void add(UtteranceScore score);

  const std::vector<UtteranceScore>& utterances() const noexcept { return utterances_; }
  ErrorCounts total() const;
  double error_rate() const { return eval::error_rate(total()); }
  /// Summed counts per group value; utterances lacking the key land in "-".
  std::map<std::string, ErrorCounts> grouped(GroupKey key) const;

  /// Percentile bootstrap over utterances. This is a resampling interval, not
  /// a matched-pairs significance test.
  ConfidenceInterval bootstrap(std::size_t resamples, double level, std::uint64_t seed) const;

  /// Aligned-column text and a tab-delimited table with one row per group.
  std::string to_text(std::span<const GroupKey> keys) const;
  std::string to_tsv(std::span<const GroupKey> keys) const;

 private:
  std::vector<UtteranceScore> utterances_;
};

}  // namespace fsat::eval
