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

#ifndef FACTALLOC_TESTS_SUPPORT_ORACLES_HPP_
#define FACTALLOC_TESTS_SUPPORT_ORACLES_HPP_

// Reference computations that share no code with the library. They favour
// the most literal formula over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace factalloc::testing {

inline std::string data_path(const std::string& name) {
  return std::string(FACTALLOC_TEST_DATA_DIR) + "/" + name;
}

// Level (0/1) of factor f (1-based, factor 1 most significant) in arm j.
inline int level(int j, int f, int k) { return ((j - 1) >> (k - f)) & 1; }

// L built from its definition: the column for a factor subset is the
// product of the +-1 coded levels of the factors in it.
inline Eigen::MatrixXd reference_contrasts(int k) {
  const int arms = 1 << k;
  Eigen::MatrixXd l(arms, arms);
  for (int j = 1; j <= arms; ++j) {
    for (int subset = 0; subset < arms; ++subset) {
      double v = 1.0;
      for (int f = 1; f <= k; ++f) {
        if ((subset >> (k - f)) & 1) v *= 2.0 * level(j, f, k) - 1.0;
      }
      l(j - 1, subset) = v;
    }
  }
  return l;
}

// Eigenvalues of L^T diag(d) L, ascending.
inline Eigen::VectorXd reference_eigenvalues(const std::vector<double>& d) {
  const int arms = static_cast<int>(d.size());
  const int k = static_cast<int>(std::lround(std::log2(arms)));
  const Eigen::MatrixXd l = reference_contrasts(k);
  Eigen::VectorXd diag(arms);
  for (int j = 0; j < arms; ++j) diag(j) = d[j];
  const Eigen::MatrixXd v = l.transpose() * diag.asDiagonal() * l;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
  return eig.eigenvalues();
}

// Criterion from the dense matrix: trace, log-determinant, top eigenvalue.
inline double reference_criterion(const std::vector<double>& d, char c) {
  const Eigen::VectorXd ev = reference_eigenvalues(d);
  if (c == 'A') return ev.sum();
  if (c == 'D') return ev.array().log().sum();
  return ev.maxCoeff();
}

inline std::vector<double> crd_terms(const std::vector<double>& s2,
                                     const std::vector<int>& n) {
  std::vector<double> d(s2.size());
  for (std::size_t j = 0; j < s2.size(); ++j) d[j] = s2[j] / n[j];
  return d;
}

inline std::vector<double> block_terms(const std::vector<std::vector<double>>& s2,
                                       const std::vector<int>& m,
                                       const std::vector<std::vector<int>>& n) {
  double total = 0.0;
  for (int x : m) total += x;
  std::vector<double> d(s2.front().size(), 0.0);
  for (std::size_t h = 0; h < s2.size(); ++h) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      d[j] += (m[h] / total) * (m[h] / total) * s2[h][j] / n[h][j];
    }
  }
  return d;
}

// Every composition of total into parts with lower <= x <= upper.
inline void for_each_composition(int total, const std::vector<int>& lower,
                                 const std::vector<int>& upper,
                                 const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> x(lower.size());
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == x.size()) {
      if (left >= lower[i] && left <= upper[i]) {
        x[i] = left;
        f(x);
      }
      return;
    }
    for (int v = lower[i]; v <= std::min(upper[i], left); ++v) {
      x[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, total);
}

// Inclusion-exclusion over the upper bounds.
inline std::uint64_t inclusion_exclusion_count(int total, const std::vector<int>& lower,
                                               const std::vector<int>& upper) {
  const int parts = static_cast<int>(lower.size());
  int free = total;
  for (int l : lower) free -= l;
  if (free < 0) return 0;
  auto binom = [](long long n, long long r) -> long double {
    if (r < 0 || n < r) return 0;
    long double b = 1;
    for (long long i = 1; i <= r; ++i) b = b * (n - r + i) / i;
    return b;
  };
  long double count = 0;
  for (int mask = 0; mask < (1 << parts); ++mask) {
    long long rem = free;
    int sign = 1;
    for (int i = 0; i < parts; ++i) {
      if (mask & (1 << i)) {
        rem -= upper[i] - lower[i] + 1;
        sign = -sign;
      }
    }
    if (rem < 0) continue;
    count += sign * binom(rem + parts - 1, parts - 1);
  }
  return static_cast<std::uint64_t>(std::llround(count));
}

// Brute-force optimum of a completely randomized design.
struct ReferenceOptimum {
  double value = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> argmins;
};

inline ReferenceOptimum reference_crd_optimum(const std::vector<double>& s2, int n,
                                              const std::vector<int>& lower,
                                              const std::vector<int>& upper, char c,
                                              double rel_tol = 1e-12) {
  ReferenceOptimum best;
  for_each_composition(n, lower, upper, [&](const std::vector<int>& x) {
    const double v = reference_criterion(crd_terms(s2, x), c);
    const double scale = std::max(std::abs(v), std::abs(best.value));
    if (std::isfinite(best.value) && std::abs(v - best.value) <= rel_tol * scale) {
      best.argmins.push_back(x);
      best.value = std::min(best.value, v);
    } else if (v < best.value) {
      best.value = v;
      best.argmins = {x};
    }
  });
  return best;
}

// Effects tau-hat = 2^{-(K-1)} L^T ybar for one assignment of a
// potential-outcome matrix, blocks combined with weights M_h / N.
inline Eigen::VectorXd reference_estimate(const Eigen::MatrixXd& y,
                                          const std::vector<int>& blocks,
                                          const std::vector<int>& assignment) {
  const int arms = static_cast<int>(y.cols());
  const int k = static_cast<int>(std::lround(std::log2(arms)));
  const Eigen::MatrixXd l = reference_contrasts(k);
  int num_blocks = 1;
  for (int b : blocks) num_blocks = std::max(num_blocks, b + 1);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(arms);
  const double n = static_cast<double>(y.rows());
  for (int h = 0; h < num_blocks; ++h) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(arms);
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(arms);
    int m = 0;
    for (int i = 0; i < y.rows(); ++i) {
      if (!blocks.empty() && blocks[i] != h) continue;
      ++m;
      sum(assignment[i]) += y(i, assignment[i]);
      cnt(assignment[i]) += 1;
    }
    const Eigen::VectorXd ybar = sum.cwiseQuotient(cnt);
    tau += (m / n) * l.transpose() * ybar / std::pow(2.0, k - 1);
  }
  return tau;
}

// Mean and covariance of tau-hat over every assignment, by brute force.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> reference_randomization_moments(
    const Eigen::MatrixXd& y, const std::vector<int>& blocks,
    const std::vector<std::vector<int>>& counts) {
  const int units = static_cast<int>(y.rows());
  int num_blocks = static_cast<int>(counts.size());
  std::vector<std::vector<int>> members(num_blocks);
  for (int i = 0; i < units; ++i) members[blocks.empty() ? 0 : blocks[i]].push_back(i);
  std::vector<std::vector<int>> labels(num_blocks);
  for (int h = 0; h < num_blocks; ++h) {
    for (std::size_t j = 0; j < counts[h].size(); ++j) {
      labels[h].insert(labels[h].end(), counts[h][j], static_cast<int>(j));
    }
  }
  std::vector<Eigen::VectorXd> draws;
  std::vector<int> assignment(units);
  std::function<void(int)> rec = [&](int h) {
    if (h == num_blocks) {
      draws.push_back(reference_estimate(y, blocks, assignment));
      return;
    }
    std::vector<int> perm = labels[h];
    std::sort(perm.begin(), perm.end());
    do {
      for (std::size_t u = 0; u < perm.size(); ++u) assignment[members[h][u]] = perm[u];
      rec(h + 1);
    } while (std::next_permutation(perm.begin(), perm.end()));
  };
  rec(0);
  const int dim = static_cast<int>(y.cols());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& d : draws) mean += d;
  mean /= static_cast<double>(draws.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= static_cast<double>(draws.size());
  return {mean, cov};
}

}  // namespace factalloc::testing

#endif  // FACTALLOC_TESTS_SUPPORT_ORACLES_HPP_
