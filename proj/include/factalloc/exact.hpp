// Copyright 2026 The Authors.
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

#ifndef FACTALLOC_EXACT_HPP_
#define FACTALLOC_EXACT_HPP_

// Closed-form optimal proportions for complete randomization, randomized
// blocks and budget-constrained designs.

#include <string>
#include <vector>

#include "factalloc/factorial.hpp"

namespace factalloc {

struct ExactAllocation {
  Criterion criterion = Criterion::kA;
  // One row for a completely randomized design, H rows for blocks. Each row
  // sums to one.
  std::vector<std::vector<double>> proportions;
  // Names of the conditions the result relies on, e.g. "WBH".
  std::vector<std::string> conditions_used;
  std::vector<std::string> warnings;
};

// A: p_j proportional to S_j. D: p_j = 1/J. E: p_j proportional to S^2_j.
// Throws ValidationError under A/E when every variance is zero.
ExactAllocation exact_crd(const VarianceSpec& vs, Criterion c);

// A: per-block A-optimal rule. D needs WBH or BBH; E needs WBH. Both then
// give the balanced split; otherwise ConditionNotMetError is thrown.
ExactAllocation exact_block(const BlockVarianceSpec& vs, Criterion c,
                            double tol = kDefaultConditionTolerance);

// Per-unit costs C_j > 0 and a total budget C > 0.
class CostSpec {
 public:
  CostSpec(std::vector<double> costs, double budget);

  const std::vector<double>& costs() const { return costs_; }
  double budget() const { return budget_; }

 private:
  std::vector<double> costs_;
  double budget_;
};

struct CostAllocation {
  Criterion criterion = Criterion::kA;
  // Share of the budget spent on each arm; sums to one.
  std::vector<double> budget_shares;
  // floor(C * share_j / C_j).
  std::vector<long long> integer_counts;
  double spent = 0.0;
  std::vector<std::string> warnings;
};

// A: share_j proportional to S_j sqrt(C_j). D: 1/J. E: proportional to
// S^2_j C_j. Counts below two are flagged in warnings, not rejected.
CostAllocation exact_cost(const VarianceSpec& vs, const CostSpec& cost,
                          Criterion c);

}  // namespace factalloc

#endif  // FACTALLOC_EXACT_HPP_
