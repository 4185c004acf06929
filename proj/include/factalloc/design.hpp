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

#ifndef FACTALLOC_DESIGN_HPP_
#define FACTALLOC_DESIGN_HPP_

#include <vector>

#include "factalloc/factorial.hpp"

namespace factalloc {

// Lower bound used when none is given: two units per arm keep every group
// variance estimable.
inline constexpr int kDefaultLowerBound = 2;

// Integer allocation problem for a completely randomized design.
struct DesignSpec {
  int k = 1;
  int n = 0;
  std::vector<int> lower;
  std::vector<int> upper;
  Criterion criterion = Criterion::kA;

  int arms() const { return num_arms(k); }

  // l_j = 2, u_j = N.
  static DesignSpec with_defaults(int k, int n, Criterion c);

  // Throws ValidationError on malformed bounds and InfeasibleError when
  // sum(l) > N or sum(u) < N.
  void validate() const;
};

// Block analogue: one row of bounds per block, each block filled to M_h.
struct BlockDesign {
  int k = 1;
  std::vector<int> block_sizes;
  CountMatrix lower;
  CountMatrix upper;
  Criterion criterion = Criterion::kA;

  int arms() const { return num_arms(k); }
  int blocks() const { return static_cast<int>(block_sizes.size()); }
  long long total_units() const;

  // l_{h,j} = 2, u_{h,j} = M_h.
  static BlockDesign with_defaults(int k, std::vector<int> block_sizes,
                                   Criterion c);

  void validate() const;
};

}  // namespace factalloc

#endif  // FACTALLOC_DESIGN_HPP_
