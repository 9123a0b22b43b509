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

#include "fsat/pipeline/dataset.hpp"

#include <algorithm>
#include <set>

#include "fsat/error.hpp"

namespace fsat::pipeline {

AdaptationDataset::AdaptationDataset(std::vector<frontend::FeatureSequence> utterances)
    : utts_(std::move(utterances)) {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < utts_.size(); ++i) {
    const auto& u = utts_[i];
    if (u.speaker_id.empty() || u.env_id.empty()) {
      throw FormatError("dataset: utterance '" + u.utterance_id + "' lacks a speaker or env id");
    }
    if (!ids.insert(u.utterance_id).second) {
      throw FormatError("dataset: duplicate utterance id '" + u.utterance_id + "'");
    }
    cells_[{u.speaker_id, u.env_id}].push_back(i);
  }
}

std::vector<std::string> AdaptationDataset::speakers() const {
  std::set<std::string> s;
  for (const auto& [key, idx] : cells_) s.insert(key.first);
  return {s.begin(), s.end()};
}

std::vector<std::string> AdaptationDataset::environments() const {
  std::set<std::string> s;
  for (const auto& [key, idx] : cells_) s.insert(key.second);
  return {s.begin(), s.end()};
}

const AdaptationDataset::Indices& AdaptationDataset::cell(const std::string& speaker,
                                                          const std::string& environment) const {
  static const Indices kEmpty;
  auto it = cells_.find({speaker, environment});
  return it == cells_.end() ? kEmpty : it->second;
}

AdaptationDataset::Indices AdaptationDataset::speaker_union(const std::string& speaker) const {
  Indices out;
  for (const auto& [key, idx] : cells_) {
    if (key.first == speaker) out.insert(out.end(), idx.begin(), idx.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

AdaptationDataset::Indices AdaptationDataset::environment_union(
    const std::string& environment) const {
  Indices out;
  for (const auto& [key, idx] : cells_) {
    if (key.second == environment) out.insert(out.end(), idx.begin(), idx.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

AdaptationDataset::Indices AdaptationDataset::factor_union(const std::string& speaker,
                                                           const std::string& environment) const {
  Indices a = speaker_union(speaker), b = environment_union(environment), out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

AdaptationDataset AdaptationDataset::subset(const Indices& indices) const {
  std::vector<frontend::FeatureSequence> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(utts_.at(i));
  return AdaptationDataset(std::move(picked));
}

}  // namespace fsat::pipeline
