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

#ifndef FACTALLOC_SIMULATION_HPP_
#define FACTALLOC_SIMULATION_HPP_

// Randomization distribution of the factorial-effect estimator over complete
// or block randomizations of a known potential-outcome matrix.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factalloc/factorial.hpp"

namespace factalloc {

// Treatment (0-based arm) received by each unit.
struct Assignment {
  std::vector<int> treatments;
};

// Uniform draw among assignments giving arm j exactly counts[h][j] units of
// block h (a single row for an unblocked matrix). Fisher-Yates on the unit
// indices of each block, driven by CounterRng(seed, stream).
Assignment draw_assignment(const PotentialOutcomeMatrix& po,
                           const CountMatrix& counts, std::uint64_t seed,
                           std::uint64_t stream = 0);

// tau-hat for one realized assignment; blocks are combined with weights
// M_h / N.
EffectVector estimate_from_assignment(const PotentialOutcomeMatrix& po,
                                      const Assignment& assignment);

struct CovarianceReport {
  EffectVector population;
  // 2^{-2(K-1)} L^T diag(S^2_j/N_j) L, block-weighted when blocked.
  Eigen::MatrixXd exact_first_term;
  // 1/(N(N-1)) sum_i (tau_i - tau)(tau_i - tau)^T, block-weighted.
  Eigen::MatrixXd heterogeneity_term;
  Eigen::MatrixXd exact_cov;

  // Monte-Carlo fields; empty until monte_carlo fills them.
  std::optional<Eigen::VectorXd> empirical_mean;
  std::optional<Eigen::MatrixXd> empirical_cov;
  std::optional<Eigen::VectorXd> mean_standard_error;
  std::optional<Eigen::MatrixXd> cov_standard_error;
  std::uint64_t replicates = 0;
  std::uint64_t seed = 0;
  std::string rng_algorithm;
};

// Both terms of the finite-population covariance of tau-hat. Needs N >= 2
// (M_h >= 2 per block) and every count >= 1.
CovarianceReport exact_covariance(const PotentialOutcomeMatrix& po,
                                  const CountMatrix& counts);

// exact_covariance plus the empirical mean and covariance of tau-hat over
// `replicates` seeded draws. Replicate r uses stream r, and aggregation runs
// in replicate order, so the result is independent of `threads`.
CovarianceReport monte_carlo(const PotentialOutcomeMatrix& po,
                             const CountMatrix& counts,
                             std::uint64_t replicates, std::uint64_t seed,
                             unsigned threads = 0);

struct EnumeratedMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::uint64_t assignments = 0;
};

inline constexpr std::uint64_t kMaxEnumeratedAssignments = 1'000'000;

// Number of distinct assignments (product of per-block multinomials),
// saturating.
std::uint64_t assignment_count(const PotentialOutcomeMatrix& po,
                               const CountMatrix& counts);

// Exact mean and covariance of tau-hat by visiting every assignment once.
// Refuses spaces larger than kMaxEnumeratedAssignments.
EnumeratedMoments enumerate_assignment_moments(const PotentialOutcomeMatrix& po,
                                               const CountMatrix& counts);

}  // namespace factalloc

#endif  // FACTALLOC_SIMULATION_HPP_
