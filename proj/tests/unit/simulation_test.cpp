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

#include "factalloc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "factalloc/errors.hpp"
#include "factalloc/rng.hpp"
#include "support/oracles.hpp"

namespace factalloc {
namespace {

Eigen::MatrixXd random_outcomes(int n, int arms, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd y(n, arms);
  for (auto& v : y.reshaped()) v = z(gen);
  return y;
}

TEST(CounterRng, ReproducibleAndStreamSeparated) {
  CounterRng a(42, 0);
  CounterRng b(42, 0);
  CounterRng c(42, 1);
  int same_as_other_stream = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    same_as_other_stream += x == c();
  }
  EXPECT_EQ(same_as_other_stream, 0);
}

TEST(CounterRng, BoundedDrawsAreInRangeAndRoughlyUniform) {
  CounterRng r(7, 3);
  std::vector<int> hist(6, 0);
  const int draws = 60000;
  for (int i = 0; i < draws; ++i) {
    const auto v = r.uniform_below(6);
    ASSERT_LT(v, 6u);
    ++hist[v];
  }
  const double se = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  for (int h : hist) EXPECT_NEAR(h, draws / 6.0, 4 * se);
}

TEST(DrawAssignment, OneUnitPerArmIsAPermutation) {
  const PotentialOutcomeMatrix po(random_outcomes(8, 8, 1));
  const auto a = draw_assignment(po, {{1, 1, 1, 1, 1, 1, 1, 1}}, 5);
  std::vector<int> sorted = a.treatments;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(DrawAssignment, FixedSeedIsReproducible) {
  const PotentialOutcomeMatrix po(random_outcomes(20, 4, 2));
  const CountMatrix counts{{5, 5, 4, 6}};
  EXPECT_EQ(draw_assignment(po, counts, 9, 3).treatments, draw_assignment(po, counts, 9, 3).treatments);
  EXPECT_NE(draw_assignment(po, counts, 9, 3).treatments, draw_assignment(po, counts, 9, 4).treatments);
}

TEST(DrawAssignment, FirstUnitMarginal) {
  const PotentialOutcomeMatrix po(random_outcomes(10, 4, 3));
  const CountMatrix counts{{1, 2, 3, 4}};
  const int reps = 100000;
  std::vector<int> hits(4, 0);
  for (int r = 0; r < reps; ++r) ++hits[draw_assignment(po, counts, 11, r).treatments[0]];
  for (int j = 0; j < 4; ++j) {
    const double p = counts[0][j] / 10.0;
    EXPECT_NEAR(hits[j] / static_cast<double>(reps), p, 3 * std::sqrt(p * (1 - p) / reps));
  }
}

TEST(DrawAssignment, BlocksKeepTheirUnits) {
  const PotentialOutcomeMatrix po(random_outcomes(10, 2, 4), {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const auto a = draw_assignment(po, {{2, 3}, {3, 2}}, 1);
  int block0_arm1 = 0;
  for (int i = 0; i < 10; i += 2) block0_arm1 += a.treatments[i] == 1;
  EXPECT_EQ(block0_arm1, 3);
}

TEST(DrawAssignment, CountsMustMatchBlocks) {
  const PotentialOutcomeMatrix po(random_outcomes(10, 2, 4));
  EXPECT_THROW(draw_assignment(po, {{5, 4}}, 1), ValidationError);
  EXPECT_THROW(draw_assignment(po, {{5, 5}, {1, 1}}, 1), ValidationError);
}

TEST(ExactCovariance, StrictlyAdditiveHasNoEffectHeterogeneity) {
  Eigen::MatrixXd y(12, 4);
  Eigen::VectorXd base(12);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z;
  for (int i = 0; i < 12; ++i) {
    base(i) = z(gen);
    for (int j = 0; j < 4; ++j) y(i, j) = base(i) + 0.5 * j;
  }
  const PotentialOutcomeMatrix po(y);
  const CountMatrix counts{{2, 3, 3, 4}};
  auto rep = exact_covariance(po, counts);
  // Unit-level factorial effects are constant; only the grand-mean entry,
  // twice the unit average, still varies across units.
  const double s2_base = (base.array() - base.mean()).square().sum() / 11.0;
  EXPECT_NEAR(rep.heterogeneity_term(0, 0), 4.0 * s2_base / 12.0, 1e-14);
  rep.heterogeneity_term(0, 0) = 0.0;
  EXPECT_LT(rep.heterogeneity_term.cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::MatrixXd v = criterion_matrix(finite_population_variances(po), counts.front());
  EXPECT_TRUE(rep.exact_first_term.isApprox(v / 4.0, 1e-12));
  EXPECT_LT((rep.exact_cov - v / 4.0).bottomRightCorner(3, 3).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ExactCovariance, ConstantOutcomesHaveZeroCovariance) {
  const PotentialOutcomeMatrix po(Eigen::MatrixXd::Constant(8, 4, 3.0));
  EXPECT_LT(exact_covariance(po, {{2, 2, 2, 2}}).exact_cov.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExactCovariance, MatchesFullEnumeration) {
  const Eigen::MatrixXd y = random_outcomes(8, 4, 7);
  const PotentialOutcomeMatrix po(y);
  const CountMatrix counts{{2, 2, 2, 2}};
  const auto rep = exact_covariance(po, counts);
  const auto [mean, cov] = testing::reference_randomization_moments(y, {}, counts);
  EXPECT_LT((cov - rep.exact_cov).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((mean - rep.population.values).cwiseAbs().maxCoeff(), 1e-10);
  const auto lib = enumerate_assignment_moments(po, counts);
  EXPECT_EQ(lib.assignments, 2520u);
  EXPECT_LT((lib.cov - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ExactCovariance, BlockedMatchesFullEnumeration) {
  const Eigen::MatrixXd y = random_outcomes(10, 2, 8);
  const std::vector<int> blocks{0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const PotentialOutcomeMatrix po(y, blocks);
  const CountMatrix counts{{2, 2}, {2, 4}};
  const auto rep = exact_covariance(po, counts);
  const auto [mean, cov] = testing::reference_randomization_moments(y, blocks, counts);
  EXPECT_LT((cov - rep.exact_cov).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((mean - rep.population.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ExactCovariance, HeterogeneityTermIsPsd) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const PotentialOutcomeMatrix po(random_outcomes(15, 8, 100 + seed));
    const auto rep = exact_covariance(po, {{2, 2, 2, 2, 2, 2, 2, 1}});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.heterogeneity_term);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(MonteCarlo, UnbiasedAndMatchesExactCovariance) {
  const PotentialOutcomeMatrix po(random_outcomes(12, 4, 9));
  const auto rep = monte_carlo(po, {{3, 3, 3, 3}}, 100000, 2024);
  const Eigen::VectorXd& mean = *rep.empirical_mean;
  const Eigen::VectorXd& se = *rep.mean_standard_error;
  for (int c = 0; c < 4; ++c) {
    EXPECT_LE(std::abs(mean(c) - rep.population.values(c)), 4 * se(c)) << "component " << c;
  }
  const Eigen::MatrixXd& cse = *rep.cov_standard_error;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      EXPECT_LE(std::abs((*rep.empirical_cov)(r, c) - rep.exact_cov(r, c)), 4 * cse(r, c));
    }
  }
  EXPECT_EQ(rep.seed, 2024u);
  EXPECT_EQ(rep.rng_algorithm, CounterRng::kAlgorithm);
}

TEST(MonteCarlo, IndependentOfThreadCount) {
  const PotentialOutcomeMatrix po(random_outcomes(12, 4, 10));
  const auto a = monte_carlo(po, {{3, 3, 3, 3}}, 5000, 1, 1);
  const auto b = monte_carlo(po, {{3, 3, 3, 3}}, 5000, 1, 3);
  EXPECT_EQ(*a.empirical_mean, *b.empirical_mean);
  EXPECT_EQ(*a.empirical_cov, *b.empirical_cov);
}

TEST(Enumeration, RefusesLargeSpaces) {
  const PotentialOutcomeMatrix po(random_outcomes(40, 4, 1));
  EXPECT_THROW(enumerate_assignment_moments(po, {{10, 10, 10, 10}}), ValidationError);
}

}  // namespace
}  // namespace factalloc
