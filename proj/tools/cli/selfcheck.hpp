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
#include <functional>
#include <string>
#include <vector>

namespace fsat::cli {

/// Outcome of one oracle suite. `detail` is a single line of numbers.
struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteSizes {
  std::size_t gradient_points = 20;   // random points per autodiff primitive
  std::size_t ctc_tables = 200;
  std::size_t kl_pairs = 50;
  std::size_t snr_triples = 1000;
  std::size_t uniformity_draws = 10000;
  std::size_t edit_pairs = 1000;
};

/// Primitive, multitask-loss and variational-objective gradients against
/// central differences; max relative error <= 1e-4.
SuiteResult check_gradients(const SuiteSizes& sizes);
/// CTC loss against enumeration of every frame path (T <= 6, V <= 3, L <= 3).
SuiteResult check_ctc_oracle(const SuiteSizes& sizes);
/// Gaussian KL against Simpson quadrature, and KL(q, q) = 0.
SuiteResult check_kl_oracle(const SuiteSizes& sizes);
/// LFA/LHUC boundaries, identity transforms, (HUB, HUB) = summed-bias HUB.
SuiteResult check_boundaries(const SuiteSizes& sizes);
/// Mixed SNR re-measured from the residual, corpus cardinalities and the
/// uniformity of sampled conditions.
SuiteResult check_snr(const SuiteSizes& sizes);
/// Edit distance against exhaustive recursion and grouped-total identity.
SuiteResult check_scoring(const SuiteSizes& sizes);

using Suite = std::function<SuiteResult(const SuiteSizes&)>;
/// (name, suite) in report order.
const std::vector<std::pair<std::string, Suite>>& oracle_suites();

}  // namespace fsat::cli
