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

#include "factalloc/greedy.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "factalloc/errors.hpp"

namespace factalloc {
namespace {

// Each step either hands out a unit or retires a cell, so exceeding this
// is a logic error rather than an input problem.
void check_step_budget(bool within) {
  if (!within) throw std::logic_error("greedy loop exceeded its step budget");
}

void require_positive_lower(const std::vector<int>& lower,
                            const std::string& where) {
  for (int l : lower) {
    if (l < 1) {
      throw ValidationError("greedy search needs lower bounds >= 1" + where +
                            "; the criterion is undefined for empty arms");
    }
  }
}

void warn_zero_variance(const std::vector<double>& variances, int k,
                        Criterion c, const std::string& where,
                        std::vector<std::string>& warnings) {
  for (std::size_t j = 0; j < variances.size(); ++j) {
    if (variances[j] != 0.0) continue;
    if (c == Criterion::kD) {
      throw ValidationError("D criterion undefined: treatment " +
                            treatment_code(static_cast<int>(j) + 1, k) + where +
                            " has zero variance");
    }
    warnings.push_back("treatment " +
                       treatment_code(static_cast<int>(j) + 1, k) + where +
                       " has zero variance and stays at its lower bound");
  }
}

std::vector<std::pair<int, int>> saturated_cells(const CountMatrix& counts,
                                                 const CountMatrix& upper) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t h = 0; h < counts.size(); ++h) {
    for (std::size_t j = 0; j < counts[h].size(); ++j) {
      if (counts[h][j] == upper[h][j]) {
        out.emplace_back(static_cast<int>(h), static_cast<int>(j));
      }
    }
  }
  return out;
}

// S^2/(n+1) - S^2/n.
double a_step(double s2, int n) {
  return -s2 / (static_cast<double>(n) * (n + 1.0));
}

// Unit-at-a-time loop over one vector of arms. delta(j, n) is the change in
// the separable objective when arm j grows from n to n + 1. Returns the
// number of units handed out.
long long separable_greedy(std::vector<int>& counts, long long target,
                           const std::vector<int>& upper,
                           const std::function<double(int, int)>& delta) {
  const int arms = static_cast<int>(counts.size());
  std::vector<char> active(arms, 1);
  long long total = std::accumulate(counts.begin(), counts.end(), 0LL);
  const long long budget = target - total;
  long long added = 0;
  long long steps = 0;
  int remaining = arms;
  while (total != target && remaining > 0) {
    ++steps;
    check_step_budget(steps <= budget + arms);
    int best = -1;
    double best_delta = 0.0;
    for (int j = 0; j < arms; ++j) {
      if (!active[j]) continue;
      const double d = delta(j, counts[j]);
      if (best < 0 || d < best_delta) {
        best = j;
        best_delta = d;
      }
    }
    if (counts[best] + 1 <= upper[best]) {
      ++counts[best];
      ++total;
      ++added;
    } else {
      active[best] = 0;
      --remaining;
    }
  }
  if (total != target) {
    throw InfeasibleError("upper bounds exhausted before the target size");
  }
  return added;
}

}  // namespace

IntegerAllocation greedy_crd_separable(const VarianceSpec& vs,
                                       const DesignSpec& spec) {
  spec.validate();
  if (spec.criterion == Criterion::kE) {
    throw ValidationError("the separable greedy handles A and D only");
  }
  if (vs.arms() != spec.arms()) {
    throw ValidationError("variance vector length != 2^K");
  }
  require_positive_lower(spec.lower, "");
  IntegerAllocation out;
  out.criterion = spec.criterion;
  warn_zero_variance(vs.variances(), spec.k, spec.criterion, "", out.warnings);
  const auto& s2 = vs.variances();
  std::function<double(int, int)> delta;
  if (spec.criterion == Criterion::kA) {
    delta = [&s2](int j, int n) { return a_step(s2[j], n); };
  } else {
    // log(S^2/(n+1)) - log(S^2/n) does not depend on S^2.
    delta = [](int, int n) { return -std::log1p(1.0 / n); };
  }
  std::vector<int> counts = spec.lower;
  out.iterations = separable_greedy(counts, spec.n, spec.upper, delta);
  out.criterion_value = criterion_value(vs, std::span<const int>(counts),
                                        spec.criterion);
  out.counts = {std::move(counts)};
  out.saturated_arms = saturated_cells(out.counts, {spec.upper});
  return out;
}

IntegerAllocation greedy_crd_e(const VarianceSpec& vs, const DesignSpec& spec) {
  spec.validate();
  if (vs.arms() != spec.arms()) {
    throw ValidationError("variance vector length != 2^K");
  }
  require_positive_lower(spec.lower, "");
  IntegerAllocation out;
  out.criterion = Criterion::kE;
  warn_zero_variance(vs.variances(), spec.k, Criterion::kE, "", out.warnings);
  const auto& s2 = vs.variances();
  const int arms = vs.arms();
  std::vector<int> counts = spec.lower;
  std::vector<char> active(arms, 1);
  long long total = std::accumulate(counts.begin(), counts.end(), 0LL);
  const long long budget = spec.n - total;
  long long steps = 0;
  int remaining = arms;
  while (total != spec.n && remaining > 0) {
    ++steps;
    check_step_budget(steps <= budget + arms);
    int best = -1;
    double best_value = 0.0;
    for (int j = 0; j < arms; ++j) {
      if (!active[j]) continue;
      const double value = s2[j] / counts[j];
      if (best < 0 || value > best_value) {
        best = j;
        best_value = value;
      }
    }
    if (counts[best] + 1 <= spec.upper[best]) {
      ++counts[best];
      ++total;
      ++out.iterations;
    } else {
      active[best] = 0;
      --remaining;
    }
  }
  if (total != spec.n) {
    throw InfeasibleError("upper bounds exhausted before N units");
  }
  out.criterion_value =
      criterion_value(vs, std::span<const int>(counts), Criterion::kE);
  out.counts = {std::move(counts)};
  out.saturated_arms = saturated_cells(out.counts, {spec.upper});
  return out;
}

IntegerAllocation greedy_crd(const VarianceSpec& vs, const DesignSpec& spec) {
  return spec.criterion == Criterion::kE ? greedy_crd_e(vs, spec)
                                         : greedy_crd_separable(vs, spec);
}

namespace {

// sum_h w_h S^2_{h,j} / M_{h,j}, optionally with one cell bumped by one.
double aggregate_term(const BlockVarianceSpec& vs, const CountMatrix& m, int j,
                      int bumped_block = -1) {
  double total = 0.0;
  for (int h = 0; h < vs.blocks(); ++h) {
    const int count = m[h][j] + (h == bumped_block ? 1 : 0);
    total += vs.weight(h) * vs.variances()[h][j] / count;
  }
  return total;
}

class CellTracker {
 public:
  CellTracker(int blocks, int arms)
      : active_(blocks, std::vector<char>(arms, 1)), remaining_(blocks * arms) {}

  bool active(int h, int j) const { return active_[h][j] != 0; }
  bool any() const { return remaining_ > 0; }
  bool arm_active(int j) const {
    for (const auto& row : active_) {
      if (row[j]) return true;
    }
    return false;
  }
  void drop(int h, int j) {
    if (active_[h][j]) {
      active_[h][j] = 0;
      --remaining_;
    }
  }
  void drop_block(int h) {
    for (std::size_t j = 0; j < active_[h].size(); ++j) {
      drop(h, static_cast<int>(j));
    }
  }

 private:
  std::vector<std::vector<char>> active_;
  int remaining_;
};

// Adds a unit to (h, j) when block h has room and the cell is below its
// upper bound; otherwise retires the block or the cell.
bool try_add(CountMatrix& m, std::vector<long long>& block_totals,
             const BlockDesign& design, CellTracker& cells, int h, int j) {
  if (block_totals[h] < design.block_sizes[h]) {
    if (m[h][j] < design.upper[h][j]) {
      ++m[h][j];
      ++block_totals[h];
      return true;
    }
    cells.drop(h, j);
  } else {
    cells.drop_block(h);
  }
  return false;
}

}  // namespace

IntegerAllocation greedy_block(const BlockVarianceSpec& vs,
                               const BlockDesign& design) {
  design.validate();
  if (vs.arms() != design.arms()) {
    throw ValidationError("block variances need 2^K columns");
  }
  if (vs.block_sizes() != design.block_sizes) {
    throw ValidationError("block sizes of the variances and design differ");
  }
  IntegerAllocation out;
  out.criterion = design.criterion;
  const int blocks = design.blocks();
  const int arms = design.arms();
  for (int h = 0; h < blocks; ++h) {
    const std::string where = " in block " + std::to_string(h + 1);
    require_positive_lower(design.lower[h], where);
    warn_zero_variance(vs.variances()[h], design.k, design.criterion, where,
                       out.warnings);
  }

  CountMatrix m = design.lower;
  if (design.criterion == Criterion::kA) {
    // The block weight is common to every arm of a block and cannot change
    // the argmin.
    for (int h = 0; h < blocks; ++h) {
      const auto& s2 = vs.variances()[h];
      out.iterations += separable_greedy(
          m[h], design.block_sizes[h], design.upper[h],
          [&s2](int j, int n) { return a_step(s2[j], n); });
    }
  } else {
    std::vector<long long> block_totals(blocks);
    for (int h = 0; h < blocks; ++h) {
      block_totals[h] = std::accumulate(m[h].begin(), m[h].end(), 0LL);
    }
    const long long target = design.total_units();
    long long total =
        std::accumulate(block_totals.begin(), block_totals.end(), 0LL);
    const long long budget = target - total;
    long long steps = 0;
    CellTracker cells(blocks, arms);
    while (total != target && cells.any()) {
      ++steps;
      check_step_budget(steps <= budget + 2LL * blocks * arms);
      int best_h = -1;
      int best_j = -1;
      if (design.criterion == Criterion::kD) {
        double best_delta = 0.0;
        for (int h = 0; h < blocks; ++h) {
          for (int j = 0; j < arms; ++j) {
            if (!cells.active(h, j)) continue;
            const double delta = std::log(aggregate_term(vs, m, j, h)) -
                                 std::log(aggregate_term(vs, m, j));
            if (best_h < 0 || delta < best_delta) {
              best_h = h;
              best_j = j;
              best_delta = delta;
            }
          }
        }
      } else {
        double best_term = 0.0;
        for (int j = 0; j < arms; ++j) {
          if (!cells.arm_active(j)) continue;
          const double term = aggregate_term(vs, m, j);
          if (best_j < 0 || term > best_term) {
            best_j = j;
            best_term = term;
          }
        }
        double best_delta = 0.0;
        for (int h = 0; h < blocks; ++h) {
          if (!cells.active(h, best_j)) continue;
          const double f = vs.weight(h) * vs.variances()[h][best_j];
          const double delta =
              f / (m[h][best_j] + 1) - f / m[h][best_j];
          if (best_h < 0 || delta < best_delta) {
            best_h = h;
            best_delta = delta;
          }
        }
      }
      if (try_add(m, block_totals, design, cells, best_h, best_j)) {
        ++total;
        ++out.iterations;
      }
    }
    if (total != target) {
      throw InfeasibleError("cell upper bounds exhausted before filling blocks");
    }
  }
  out.criterion_value = criterion_value(vs, m, design.criterion);
  out.saturated_arms = saturated_cells(m, design.upper);
  out.counts = std::move(m);
  return out;
}

IntegerAllocation greedy_block_from_pilot(std::span<const Observation> pilot,
                                          int k,
                                          const std::vector<int>& block_sizes,
                                          Criterion c) {
  const BlockVarianceSpec observed = sample_block_variances(pilot, k);
  if (observed.blocks() != static_cast<int>(block_sizes.size())) {
    throw ValidationError("pilot data has " + std::to_string(observed.blocks()) +
                          " blocks but " + std::to_string(block_sizes.size()) +
                          " target sizes were given");
  }
  return greedy_block(observed.with_block_sizes(block_sizes),
                      BlockDesign::with_defaults(k, block_sizes, c));
}

}  // namespace factalloc
