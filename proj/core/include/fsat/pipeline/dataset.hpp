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
#include <utility>
#include <vector>

#include "fsat/frontend/archive.hpp"

namespace fsat::pipeline {

/// Utterances indexed by their (speaker, environment) cell.
class AdaptationDataset {
 public:
  using Indices = std::vector<std::size_t>;

  AdaptationDataset() = default;
  /// Throws FormatError on duplicate utterance ids or empty speaker/env ids.
  explicit AdaptationDataset(std::vector<frontend::FeatureSequence> utterances);

  const std::vector<frontend::FeatureSequence>& utterances() const noexcept { return utts_; }
  std::size_t size() const noexcept { return utts_.size(); }
  bool empty() const noexcept { return utts_.empty(); }
  const frontend::FeatureSequence& operator[](std::size_t i) const { return utts_[i]; }

  std::vector<std::string> speakers() const;
  std::vector<std::string> environments() const;

  /// Empty when the cell holds no utterances.
  const Indices& cell(const std::string& speaker, const std::string& environment) const;
  /// All environments of one speaker.
  Indices speaker_union(const std::string& speaker) const;
  /// All speakers in one environment.
  Indices environment_union(const std::string& environment) const;
  /// Data the (speaker, environment) pair of transforms is estimated on: the
  /// environment union joined with the speaker union, sorted, each index once.
  Indices factor_union(const std::string& speaker, const std::string& environment) const;

  AdaptationDataset subset(const Indices& indices) const;

 private:
  std::vector<frontend::FeatureSequence> utts_;
  std::map<std::pair<std::string, std::string>, Indices> cells_;
};

}  // namespace fsat::pipeline
