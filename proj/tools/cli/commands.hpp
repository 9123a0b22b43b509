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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fsat/asr/decode.hpp"
#include "fsat/error.hpp"

namespace fsat::cli {

/// Process exit codes. Library errors map by category.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIo = 4,
  kExitFormat = 5,
  kExitShape = 6,
  kExitDomain = 7,
  kExitNumeric = 8,
  kExitState = 9,
  kExitCheckFailed = 10,
};

int exit_code_for(ErrorCategory category);

/// Entry point shared by the binary and the tests. Never throws; failures
/// print one line `error: category=<name> message=<text>` to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hypothesis files: a `# fsat-hypotheses <version>` header, then one
/// `utt_id <TAB> text <TAB> score` line per utterance.
inline constexpr int kHypothesisFormatVersion = 1;
inline constexpr int kRunSummaryVersion = 1;

struct HypothesisLine {
  std::string utterance_id;
  std::string text;
  double score = 0.0;
};

void write_hypotheses(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<asr::Hypothesis>& hyps);
std::vector<HypothesisLine> read_hypotheses(const std::filesystem::path& path);

}  // namespace fsat::cli
