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

#include "fsat/asr/vocab.hpp"

#include <algorithm>

#include "fsat/error.hpp"

namespace fsat::asr {

Vocabulary::Vocabulary(std::string alphabet) : alphabet_(std::move(alphabet)) {
  if (alphabet_.empty()) throw ConfigError("vocabulary: alphabet is empty");
  std::fill(std::begin(lookup_), std::end(lookup_), -1);
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    const auto c = static_cast<unsigned char>(alphabet_[i]);
    if (c < 0x21 || c > 0x7e) {
      throw ConfigError("vocabulary: alphabet must be printable ASCII without spaces");
    }
    if (lookup_[c] != -1) {
      throw ConfigError(std::string("vocabulary: duplicate symbol '") + alphabet_[i] + "'");
    }
    lookup_[c] = static_cast<int>(i) + 1;
  }
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    const int id = lookup_[static_cast<unsigned char>(ch)];
    if (id < 0) throw DomainError(std::string("vocabulary: unknown symbol '") + ch + "'");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const int> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (int id : tokens) {
    if (!is_symbol(id)) {
      throw DomainError("vocabulary: token id " + std::to_string(id) + " is not a symbol");
    }
    out.push_back(alphabet_[static_cast<std::size_t>(id - 1)]);
  }
  return out;
}

}  // namespace fsat::asr
