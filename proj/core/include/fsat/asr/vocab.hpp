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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsat::asr {

/// Character vocabulary. Id 0 is the CTC blank, ids 1..n are the alphabet in
/// order, and the last id doubles as sos and eos for decoder framing.
class Vocabulary {
 public:
  explicit Vocabulary(std::string alphabet);

  static constexpr int kBlank = 0;

  int blank() const noexcept { return kBlank; }
  int sos_eos() const noexcept { return static_cast<int>(alphabet_.size()) + 1; }
  std::size_t size() const noexcept { return alphabet_.size() + 2; }
  const std::string& alphabet() const noexcept { return alphabet_; }

  bool is_symbol(int id) const noexcept {
    return id >= 1 && id <= static_cast<int>(alphabet_.size());
  }

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> tokens) const;

 private:
  std::string alphabet_;
  int lookup_[256];
};

}  // namespace fsat::asr
