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

#ifndef FACTALLOC_GREEDY_HPP_
#define FACTALLOC_GREEDY_HPP_

// Greedy integer allocations. Every variant starts at the lower bounds and
// hands out one unit per step; ties always go to the smallest index, so the
// output is a deterministic function of the inputs.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "factalloc/design.hpp"
#include "factalloc/factorial.hpp"

namespace factalloc {

struct IntegerAllocation {
  Criterion criterion = Criterion::kA;
  // One row for a completely randomized design, H rows for blocks.
  CountMatrix counts;
  double criterion_value = 0.0;
  // Units handed out after initialization at the lower bounds.
  long long iterations = 0;
  // (block, arm) cells that finished at their upper bound.
  std::vector<std::pair<int, int>> saturated_arms;
  std::vector<std::string> warnings;
};

// A and D: minimum marginal increment of f_j(N_j) = S^2_j/N_j (A) or
// log(S^2_j/N_j) (D). Globally optimal for these separable convex objectives.
IntegerAllocation greedy_crd_separable(const VarianceSpec& vs,
                                       const DesignSpec& spec);

// E: the next unit goes to the arm with the largest S^2_j/N_j.
IntegerAllocation greedy_crd_e(const VarianceSpec& vs, const DesignSpec& spec);

// Dispatches on spec.criterion.
IntegerAllocation greedy_crd(const VarianceSpec& vs, const DesignSpec& spec);

// Block designs. The block sizes in `vs` must match `design`.
//   A: independent per-block runs of the separable rule.
//   D: one global pass over the (h, j) cells picking the smallest increment
//      of log S^2_blk,j, with each block capped at M_h.
//   E: pick the arm with the largest S^2_blk,j, then the block whose extra
//      unit lowers it most.
IntegerAllocation greedy_block(const BlockVarianceSpec& vs,
                               const BlockDesign& design);

// Sample variances per block from pilot observations, then greedy_block on
// the target block sizes with default bounds.
IntegerAllocation greedy_block_from_pilot(std::span<const Observation> pilot,
                                          int k,
                                          const std::vector<int>& block_sizes,
                                          Criterion c);

}  // namespace factalloc

#endif  // FACTALLOC_GREEDY_HPP_
