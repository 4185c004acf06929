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

#ifndef FACTALLOC_ORACLE_HPP_
#define FACTALLOC_ORACLE_HPP_

// Brute-force enumeration of every feasible integer allocation. Used to
// certify greedy results and to list all optima when they are not unique.

#include <cstdint>
#include <span>
#include <vector>

#include "factalloc/design.hpp"
#include "factalloc/greedy.hpp"

namespace factalloc {

struct OracleOptions {
  // Refuse problems with more feasible points than this.
  std::uint64_t cap = 100'000'000;
  // Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 0;
  // Relative tolerance used to decide that two values tie.
  double tie_tolerance = 1e-12;
};

struct OptimalSet {
  Criterion criterion = Criterion::kA;
  // Every minimizer, in lexicographic order of the (h, j) counts.
  std::vector<IntegerAllocation> optima;
  double value = 0.0;
  // Feasible points visited.
  std::uint64_t enumerated = 0;
};

// Number of integer vectors x with sum(x) = total and lower <= x <= upper.
// Saturates at UINT64_MAX.
std::uint64_t count_bounded_compositions(long long total,
                                         std::span<const int> lower,
                                         std::span<const int> upper);

// Size of the search space enumerate_block would visit.
std::uint64_t block_state_space(const BlockDesign& design);

OptimalSet enumerate_crd(const VarianceSpec& vs, const DesignSpec& spec,
                         const OracleOptions& options = {});

// A decomposes over blocks and is searched block by block (the optimal set
// is the cross product of the per-block sets). D and E couple the blocks and
// are searched over the full cross product of per-block compositions.
OptimalSet enumerate_block(const BlockVarianceSpec& vs,
                           const BlockDesign& design,
                           const OracleOptions& options = {});

}  // namespace factalloc

#endif  // FACTALLOC_ORACLE_HPP_
