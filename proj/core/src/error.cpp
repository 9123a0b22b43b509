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

#include "fsat/error.hpp"

namespace fsat {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kDomain: return "domain";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kState: return "state";
  }
  return "unknown";
}

}  // namespace fsat
