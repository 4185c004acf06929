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

#include "factalloc/design.hpp"

#include <numeric>
#include <string>

#include "factalloc/errors.hpp"

namespace factalloc {
namespace {

void check_bound_row(const std::vector<int>& lower,
                     const std::vector<int>& upper, int arms, long long total,
                     const std::string& where) {
  if (static_cast<int>(lower.size()) != arms ||
      static_cast<int>(upper.size()) != arms) {
    throw ValidationError("bounds" + where + " need 2^K entries");
  }
  for (int j = 0; j < arms; ++j) {
    if (lower[j] < 0 || lower[j] > upper[j] || upper[j] > total) {
      throw ValidationError("bounds" + where +
                            " must satisfy 0 <= l_j <= u_j <= size");
    }
  }
  const long long lo = std::accumulate(lower.begin(), lower.end(), 0LL);
  const long long hi = std::accumulate(upper.begin(), upper.end(), 0LL);
  if (lo > total || hi < total) {
    throw InfeasibleError("no allocation" + where + ": lower bounds sum to " +
                          std::to_string(lo) + ", upper bounds to " +
                          std::to_string(hi) + ", target is " +
                          std::to_string(total));
  }
}

}  // namespace

DesignSpec DesignSpec::with_defaults(int k, int n, Criterion c) {
  const int arms = num_arms(k);
  return {k, n, std::vector<int>(arms, kDefaultLowerBound),
          std::vector<int>(arms, n), c};
}

void DesignSpec::validate() const {
  const int j = arms();
  if (n < 1) throw ValidationError("N must be positive");
  check_bound_row(lower, upper, j, n, "");
}

long long BlockDesign::total_units() const {
  return std::accumulate(block_sizes.begin(), block_sizes.end(), 0LL);
}

BlockDesign BlockDesign::with_defaults(int k, std::vector<int> block_sizes,
                                       Criterion c) {
  const int arms = num_arms(k);
  BlockDesign d;
  d.k = k;
  d.criterion = c;
  for (int m : block_sizes) {
    d.lower.emplace_back(arms, kDefaultLowerBound);
    d.upper.emplace_back(arms, m);
  }
  d.block_sizes = std::move(block_sizes);
  return d;
}

void BlockDesign::validate() const {
  const int j = arms();
  if (block_sizes.empty()) throw ValidationError("no blocks given");
  if (static_cast<int>(lower.size()) != blocks() ||
      static_cast<int>(upper.size()) != blocks()) {
    throw ValidationError("need one row of bounds per block");
  }
  for (int h = 0; h < blocks(); ++h) {
    if (block_sizes[h] < 1) throw ValidationError("block sizes must be positive");
    check_bound_row(lower[h], upper[h], j, block_sizes[h],
                    " in block " + std::to_string(h + 1));
  }
}

}  // namespace factalloc
