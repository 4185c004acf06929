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

#include "factalloc/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <numeric>
#include <thread>

#include "factalloc/errors.hpp"

namespace factalloc {
namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t add_sat(std::uint64_t a, std::uint64_t b) {
  return a > kSaturated - b ? kSaturated : a + b;
}

std::uint64_t mul_sat(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  return a > kSaturated / b ? kSaturated : a * b;
}

// A search over H segments of J cells each; segment h sums to targets[h].
// Cells are visited in (h, j) row-major order, which is also the
// lexicographic order of the reported optima.
struct SearchProblem {
  int blocks = 0;
  int arms = 0;
  std::vector<long long> targets;
  CountMatrix lower;
  CountMatrix upper;
  // contribution[h][j][m]: the (h, j) cell's share of arm j's criterion term
  // at count m.
  std::vector<std::vector<std::vector<double>>> contribution;
  Criterion criterion = Criterion::kA;
  double tie_tolerance = 1e-12;
};

struct TaskResult {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> values;
  std::vector<std::vector<int>> members;
  std::uint64_t visited = 0;
};

class Searcher {
 public:
  explicit Searcher(const SearchProblem& p)
      : p_(p),
        cells_(p.blocks * p.arms),
        counts_(cells_, 0),
        terms_(p.arms, 0.0),
        min_rest_(cells_ + 1, 0),
        max_rest_(cells_ + 1, 0) {
    // Suffix sums of bounds within each block, excluding the cell itself.
    for (int h = 0; h < p.blocks; ++h) {
      long long lo = 0;
      long long hi = 0;
      for (int j = p.arms - 1; j >= 0; --j) {
        min_rest_[h * p.arms + j] = lo;
        max_rest_[h * p.arms + j] = hi;
        lo += p.lower[h][j];
        hi += p.upper[h][j];
      }
    }
  }

  // Feasible value range of cell c given what is left in its block.
  std::pair<long long, long long> range(int cell, long long remaining) const {
    const int h = cell / p_.arms;
    const int j = cell % p_.arms;
    const long long lo =
        std::max<long long>(p_.lower[h][j], remaining - max_rest_[cell]);
    const long long hi =
        std::min<long long>(p_.upper[h][j], remaining - min_rest_[cell]);
    return {lo, hi};
  }

  TaskResult run(int first_value) {
    result_ = TaskResult{};
    counts_[0] = first_value;
    const long long remaining = p_.targets[0] - first_value;
    visit(1, remaining);  // J >= 2, so cell 1 is still in block 0
    return std::move(result_);
  }

 private:
  void next_block(int cell, long long remaining) {
    if (remaining != 0) return;
    if (cell == cells_) {
      leaf();
      return;
    }
    visit(cell, p_.targets[cell / p_.arms]);
  }

  void visit(int cell, long long remaining) {
    const auto [lo, hi] = range(cell, remaining);
    const bool last_in_block = (cell % p_.arms) == p_.arms - 1;
    for (long long v = lo; v <= hi; ++v) {
      counts_[cell] = static_cast<int>(v);
      if (last_in_block) {
        next_block(cell + 1, remaining - v);
      } else {
        visit(cell + 1, remaining - v);
      }
    }
  }

  void leaf() {
    ++result_.visited;
    std::fill(terms_.begin(), terms_.end(), 0.0);
    for (int h = 0; h < p_.blocks; ++h) {
      const auto& table = p_.contribution[h];
      for (int j = 0; j < p_.arms; ++j) {
        terms_[j] += table[j][counts_[h * p_.arms + j]];
      }
    }
    const double value = criterion_from_terms(terms_, p_.criterion);
    if (value < result_.best) {
      result_.best = value;
      std::size_t keep = 0;
      for (std::size_t i = 0; i < result_.values.size(); ++i) {
        if (nearly_equal(result_.values[i], value, p_.tie_tolerance)) {
          if (keep != i) {
            result_.values[keep] = result_.values[i];
            result_.members[keep] = std::move(result_.members[i]);
          }
          ++keep;
        }
      }
      result_.values.resize(keep);
      result_.members.resize(keep);
    } else if (!nearly_equal(value, result_.best, p_.tie_tolerance)) {
      return;
    }
    result_.values.push_back(value);
    result_.members.push_back(counts_);
  }

  const SearchProblem& p_;
  int cells_;
  std::vector<int> counts_;
  std::vector<double> terms_;
  std::vector<long long> min_rest_;
  std::vector<long long> max_rest_;
  TaskResult result_;
};

struct SearchOutcome {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> members;
  std::vector<double> values;
  std::uint64_t visited = 0;
};

// Splits the space on the value of the first cell (contiguous lexicographic
// chunks), searches the chunks on a pool of workers and merges them in chunk
// order, so the result does not depend on the thread count.
SearchOutcome search(const SearchProblem& p, unsigned threads) {
  const Searcher probe(p);
  const auto [lo, hi] = probe.range(0, p.targets[0]);
  SearchOutcome out;
  if (lo > hi) return out;
  const int tasks = static_cast<int>(hi - lo + 1);
  std::vector<TaskResult> results(tasks);
  std::atomic<int> next{0};
  auto worker = [&] {
    Searcher searcher(p);
    for (int t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) {
      results[t] = searcher.run(static_cast<int>(lo) + t);
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(tasks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& r : results) {
    out.best = std::min(out.best, r.best);
    out.visited += r.visited;
  }
  for (auto& r : results) {
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (nearly_equal(r.values[i], out.best, p.tie_tolerance)) {
        out.values.push_back(r.values[i]);
        out.members.push_back(std::move(r.members[i]));
      }
    }
  }
  return out;
}

SearchProblem single_block_problem(const std::vector<double>& variances,
                                   double weight, long long target,
                                   const std::vector<int>& lower,
                                   const std::vector<int>& upper,
                                   Criterion c, double tol, bool weighted) {
  SearchProblem p;
  p.blocks = 1;
  p.arms = static_cast<int>(variances.size());
  p.targets = {target};
  p.lower = {lower};
  p.upper = {upper};
  p.criterion = c;
  p.tie_tolerance = tol;
  p.contribution.resize(1);
  for (int j = 0; j < p.arms; ++j) {
    std::vector<double> column(upper[j] + 1, 0.0);
    for (int m = std::max(1, lower[j]); m <= upper[j]; ++m) {
      // Same arithmetic as criterion_terms / block_criterion_terms so oracle
      // and greedy values compare bit-for-bit.
      column[m] = weighted ? weight * variances[j] / m
                           : variances[j] / static_cast<double>(m);
    }
    p.contribution[0].push_back(std::move(column));
  }
  return p;
}

void require_positive_lower(const CountMatrix& lower) {
  for (const auto& row : lower) {
    for (int l : row) {
      if (l < 1) {
        throw ValidationError(
            "exhaustive search needs lower bounds >= 1; the criterion is "
            "undefined for empty arms");
      }
    }
  }
}

void require_positive_variances_for_d(const std::vector<double>& row,
                                      Criterion c) {
  if (c != Criterion::kD) return;
  for (double v : row) {
    if (v == 0.0) {
      throw ValidationError("D criterion undefined with a zero-variance arm");
    }
  }
}

IntegerAllocation to_allocation(const std::vector<int>& flat, int blocks,
                                int arms, double value, Criterion c) {
  IntegerAllocation a;
  a.criterion = c;
  a.criterion_value = value;
  for (int h = 0; h < blocks; ++h) {
    a.counts.emplace_back(flat.begin() + h * arms,
                          flat.begin() + (h + 1) * arms);
  }
  return a;
}

void mark_saturated(IntegerAllocation& a, const CountMatrix& upper) {
  for (std::size_t h = 0; h < a.counts.size(); ++h) {
    for (std::size_t j = 0; j < a.counts[h].size(); ++j) {
      if (a.counts[h][j] == upper[h][j]) {
        a.saturated_arms.emplace_back(static_cast<int>(h),
                                      static_cast<int>(j));
      }
    }
  }
}

}  // namespace

std::uint64_t count_bounded_compositions(long long total,
                                         std::span<const int> lower,
                                         std::span<const int> upper) {
  if (total < 0 || lower.size() != upper.size()) return 0;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (lower[j] < 0 || lower[j] > upper[j]) return 0;
  }
  std::vector<std::uint64_t> ways(total + 1, 0);
  ways[0] = 1;
  for (std::size_t j = 0; j < lower.size(); ++j) {
    // next[t] = sum of ways[t - x] for lower <= x <= upper, as a sliding
    // window. Saturated entries are counted apart so the window never has
    // to subtract a clipped value.
    std::vector<std::uint64_t> next(total + 1, 0);
    unsigned __int128 window = 0;
    long long saturated = 0;
    auto add = [&](long long s, int sign) {
      if (s < 0 || s > total) return;
      if (ways[s] == kSaturated) {
        saturated += sign;
      } else if (sign > 0) {
        window += ways[s];
      } else {
        window -= ways[s];
      }
    };
    for (long long t = 0; t <= total; ++t) {
      add(t - lower[j], +1);
      add(t - static_cast<long long>(upper[j]) - 1, -1);
      next[t] = saturated > 0 || window >= kSaturated
                    ? kSaturated
                    : static_cast<std::uint64_t>(window);
    }
    ways = std::move(next);
  }
  return ways[total];
}

std::uint64_t block_state_space(const BlockDesign& design) {
  std::uint64_t product = 1;
  std::uint64_t sum = 0;
  for (int h = 0; h < design.blocks(); ++h) {
    const auto n = count_bounded_compositions(design.block_sizes[h],
                                              design.lower[h], design.upper[h]);
    product = mul_sat(product, n);
    sum = add_sat(sum, n);
  }
  return design.criterion == Criterion::kA ? sum : product;
}

OptimalSet enumerate_crd(const VarianceSpec& vs, const DesignSpec& spec,
                         const OracleOptions& options) {
  spec.validate();
  if (vs.arms() != spec.arms()) {
    throw ValidationError("variance vector length != 2^K");
  }
  require_positive_lower({spec.lower});
  require_positive_variances_for_d(vs.variances(), spec.criterion);
  const auto space =
      count_bounded_compositions(spec.n, spec.lower, spec.upper);
  if (space > options.cap) throw OracleCapExceededError(space, options.cap);

  const SearchProblem p =
      single_block_problem(vs.variances(), 1.0, spec.n, spec.lower, spec.upper,
                           spec.criterion, options.tie_tolerance, false);
  const SearchOutcome found = search(p, options.threads);
  OptimalSet out;
  out.criterion = spec.criterion;
  out.value = found.best;
  out.enumerated = found.visited;
  for (std::size_t i = 0; i < found.members.size(); ++i) {
    auto a = to_allocation(found.members[i], 1, vs.arms(), found.values[i],
                           spec.criterion);
    mark_saturated(a, {spec.upper});
    out.optima.push_back(std::move(a));
  }
  return out;
}

OptimalSet enumerate_block(const BlockVarianceSpec& vs,
                           const BlockDesign& design,
                           const OracleOptions& options) {
  design.validate();
  if (vs.arms() != design.arms()) {
    throw ValidationError("block variances need 2^K columns");
  }
  if (vs.block_sizes() != design.block_sizes) {
    throw ValidationError("block sizes of the variances and design differ");
  }
  require_positive_lower(design.lower);
  for (const auto& row : vs.variances()) {
    require_positive_variances_for_d(row, design.criterion);
  }
  const auto space = block_state_space(design);
  if (space > options.cap) throw OracleCapExceededError(space, options.cap);

  const int blocks = design.blocks();
  const int arms = design.arms();
  OptimalSet out;
  out.criterion = design.criterion;

  if (design.criterion == Criterion::kA) {
    // Per-block optimal rows, then their cross product.
    std::vector<std::vector<std::vector<int>>> rows(blocks);
    for (int h = 0; h < blocks; ++h) {
      const SearchProblem p = single_block_problem(
          vs.variances()[h], vs.weight(h), design.block_sizes[h],
          design.lower[h], design.upper[h], Criterion::kA,
          options.tie_tolerance, true);
      SearchOutcome found = search(p, options.threads);
      out.enumerated += found.visited;
      rows[h] = std::move(found.members);
    }
    std::vector<std::size_t> pick(blocks, 0);
    out.value = std::numeric_limits<double>::infinity();
    while (true) {
      IntegerAllocation a;
      a.criterion = Criterion::kA;
      for (int h = 0; h < blocks; ++h) a.counts.push_back(rows[h][pick[h]]);
      a.criterion_value = criterion_value(vs, a.counts, Criterion::kA);
      out.value = std::min(out.value, a.criterion_value);
      mark_saturated(a, design.upper);
      out.optima.push_back(std::move(a));
      int h = blocks - 1;
      while (h >= 0 && ++pick[h] == rows[h].size()) pick[h--] = 0;
      if (h < 0) break;
    }
    return out;
  }

  SearchProblem p;
  p.blocks = blocks;
  p.arms = arms;
  p.lower = design.lower;
  p.upper = design.upper;
  p.criterion = design.criterion;
  p.tie_tolerance = options.tie_tolerance;
  for (int h = 0; h < blocks; ++h) {
    p.targets.push_back(design.block_sizes[h]);
    std::vector<std::vector<double>> table;
    const double w = vs.weight(h);
    for (int j = 0; j < arms; ++j) {
      std::vector<double> column(design.upper[h][j] + 1, 0.0);
      for (int m = design.lower[h][j]; m <= design.upper[h][j]; ++m) {
        column[m] = w * vs.variances()[h][j] / m;
      }
      table.push_back(std::move(column));
    }
    p.contribution.push_back(std::move(table));
  }
  const SearchOutcome found = search(p, options.threads);
  out.value = found.best;
  out.enumerated = found.visited;
  for (std::size_t i = 0; i < found.members.size(); ++i) {
    auto a = to_allocation(found.members[i], blocks, arms, found.values[i],
                           design.criterion);
    mark_saturated(a, design.upper);
    out.optima.push_back(std::move(a));
  }
  return out;
}

}  // namespace factalloc
