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
#include <atomic>
#include <limits>
#include <cmath>
#include <numeric>
#include <thread>

#include "factalloc/errors.hpp"
#include "factalloc/rng.hpp"

namespace factalloc {
namespace {

void check_counts(const PotentialOutcomeMatrix& po, const CountMatrix& counts) {
  const auto sizes = po.block_sizes();
  if (counts.size() != sizes.size()) {
    throw ValidationError("allocation has " + std::to_string(counts.size()) +
                          " rows but the outcome matrix has " +
                          std::to_string(sizes.size()) + " block(s)");
  }
  for (std::size_t h = 0; h < counts.size(); ++h) {
    if (static_cast<int>(counts[h].size()) != po.arms()) {
      throw ValidationError("allocation row length != J");
    }
    long long total = 0;
    for (int c : counts[h]) {
      if (c < 1) throw ValidationError("every arm needs at least one unit");
      total += c;
    }
    if (total != sizes[h]) {
      throw ValidationError("allocation sums to " + std::to_string(total) +
                            " but the block has " + std::to_string(sizes[h]) +
                            " units");
    }
  }
}

double effect_scale(int k) { return std::ldexp(1.0, -(k - 1)); }

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

Assignment draw_assignment(const PotentialOutcomeMatrix& po,
                           const CountMatrix& counts, std::uint64_t seed,
                           std::uint64_t stream) {
  check_counts(po, counts);
  CounterRng rng(seed, stream);
  Assignment out;
  out.treatments.assign(po.units(), -1);
  for (std::size_t h = 0; h < counts.size(); ++h) {
    std::vector<int> units = po.block_members(static_cast<int>(h));
    for (std::size_t i = units.size(); i > 1; --i) {
      const auto r = static_cast<std::size_t>(rng.uniform_below(i));
      std::swap(units[i - 1], units[r]);
    }
    std::size_t pos = 0;
    for (int j = 0; j < po.arms(); ++j) {
      for (int c = 0; c < counts[h][j]; ++c) out.treatments[units[pos++]] = j;
    }
  }
  return out;
}

EffectVector estimate_from_assignment(const PotentialOutcomeMatrix& po,
                                      const Assignment& assignment) {
  if (static_cast<int>(assignment.treatments.size()) != po.units()) {
    throw ValidationError("assignment length != N");
  }
  const int arms = po.arms();
  const int blocks = po.num_blocks();
  const ContrastMatrix lmat(po.k());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(blocks, arms);
  Eigen::MatrixXi n = Eigen::MatrixXi::Zero(blocks, arms);
  for (int i = 0; i < po.units(); ++i) {
    const int h = po.blocked() ? po.block_labels()[i] : 0;
    const int j = assignment.treatments[i];
    if (j < 0 || j >= arms) throw ValidationError("assignment arm out of range");
    sums(h, j) += po.outcomes()(i, j);
    ++n(h, j);
  }
  const auto sizes = po.block_sizes();
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(arms);
  for (int h = 0; h < blocks; ++h) {
    Eigen::VectorXd means(arms);
    for (int j = 0; j < arms; ++j) {
      if (n(h, j) == 0) throw ValidationError("an arm received no units");
      means(j) = sums(h, j) / n(h, j);
    }
    const double weight = static_cast<double>(sizes[h]) / po.units();
    tau += weight * effect_scale(po.k()) * lmat.apply_transpose(means);
  }
  return {po.k(), tau};
}

CovarianceReport exact_covariance(const PotentialOutcomeMatrix& po,
                                  const CountMatrix& counts) {
  check_counts(po, counts);
  const int arms = po.arms();
  const int k = po.k();
  const ContrastMatrix lmat(k);
  const Eigen::MatrixXd l = lmat.dense();
  const double scale = effect_scale(k);
  const double n_total = po.units();

  CovarianceReport report;
  report.population = population_effects(po);
  report.exact_first_term = Eigen::MatrixXd::Zero(arms, arms);
  report.heterogeneity_term = Eigen::MatrixXd::Zero(arms, arms);

  for (int h = 0; h < po.num_blocks(); ++h) {
    const auto members = po.block_members(h);
    const double m = static_cast<double>(members.size());
    if (members.size() < 2) {
      throw ValidationError("covariance needs at least two units per block");
    }
    Eigen::MatrixXd y(members.size(), arms);
    for (std::size_t r = 0; r < members.size(); ++r) {
      y.row(static_cast<Eigen::Index>(r)) = po.outcomes().row(members[r]);
    }
    const Eigen::RowVectorXd mean = y.colwise().mean();
    const Eigen::MatrixXd centered = y.rowwise() - mean;
    Eigen::VectorXd a(arms);
    for (int j = 0; j < arms; ++j) {
      const double s2 = centered.col(j).squaredNorm() / (m - 1.0);
      a(j) = s2 / counts[h][j];
    }
    const double weight = (m * m) / (n_total * n_total);
    report.exact_first_term +=
        weight * scale * scale * (l.transpose() * a.asDiagonal() * l);
    // Rows of centered * L scaled are tau_i - tau_h.
    const Eigen::MatrixXd dev = scale * centered * l;
    report.heterogeneity_term +=
        weight * (dev.transpose() * dev) / (m * (m - 1.0));
  }
  report.exact_cov = report.exact_first_term - report.heterogeneity_term;
  return report;
}

CovarianceReport monte_carlo(const PotentialOutcomeMatrix& po,
                             const CountMatrix& counts,
                             std::uint64_t replicates, std::uint64_t seed,
                             unsigned threads) {
  if (replicates < 1) throw ValidationError("need at least one replicate");
  CovarianceReport report = exact_covariance(po, counts);
  const int arms = po.arms();
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(replicates), arms);

  std::atomic<std::uint64_t> next{0};
  constexpr std::uint64_t kChunk = 1024;
  auto worker = [&] {
    for (std::uint64_t start = next.fetch_add(kChunk); start < replicates;
         start = next.fetch_add(kChunk)) {
      const std::uint64_t stop = std::min(replicates, start + kChunk);
      for (std::uint64_t r = start; r < stop; ++r) {
        const Assignment a = draw_assignment(po, counts, seed, r);
        draws.row(static_cast<Eigen::Index>(r)) =
            estimate_from_assignment(po, a).values.transpose();
      }
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  const auto reps = static_cast<double>(replicates);
  Eigen::VectorXd mean(arms);
  for (int a = 0; a < arms; ++a) {
    CompensatedSum s;
    for (Eigen::Index r = 0; r < draws.rows(); ++r) s.add(draws(r, a));
    mean(a) = s.value() / reps;
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(arms, arms);
  Eigen::MatrixXd cov_se = Eigen::MatrixXd::Zero(arms, arms);
  if (replicates > 1) {
    const Eigen::MatrixXd centered = draws.rowwise() - mean.transpose();
    for (int a = 0; a < arms; ++a) {
      for (int b = a; b < arms; ++b) {
        CompensatedSum s;
        CompensatedSum s2;
        for (Eigen::Index r = 0; r < draws.rows(); ++r) {
          const double prod = centered(r, a) * centered(r, b);
          s.add(prod);
          s2.add(prod * prod);
        }
        const double c = s.value() / (reps - 1.0);
        const double mean_prod = s.value() / reps;
        const double var_prod =
            std::max(0.0, s2.value() / reps - mean_prod * mean_prod);
        cov(a, b) = cov(b, a) = c;
        cov_se(a, b) = cov_se(b, a) = std::sqrt(var_prod / reps);
      }
    }
  }
  report.empirical_mean = mean;
  report.empirical_cov = cov;
  report.mean_standard_error = (cov.diagonal() / reps).cwiseSqrt();
  report.cov_standard_error = cov_se;
  report.replicates = replicates;
  report.seed = seed;
  report.rng_algorithm = std::string(CounterRng::kAlgorithm);
  return report;
}

std::uint64_t assignment_count(const PotentialOutcomeMatrix& po,
                               const CountMatrix& counts) {
  check_counts(po, counts);
  // Multinomial as a product of binomials, each computed exactly.
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 1;
  for (const auto& row : counts) {
    std::uint64_t placed = 0;
    for (int c : row) {
      std::uint64_t binom = 1;
      for (std::uint64_t i = 1; i <= static_cast<std::uint64_t>(c); ++i) {
        const std::uint64_t num = placed + i;
        // binom * num / i stays integral at each step.
        if (binom > kMax / num) return kMax;
        binom = binom * num / i;
      }
      placed += c;
      if (binom != 0 && total > kMax / binom) return kMax;
      total *= binom;
    }
  }
  return total;
}

EnumeratedMoments enumerate_assignment_moments(const PotentialOutcomeMatrix& po,
                                               const CountMatrix& counts) {
  const std::uint64_t space = assignment_count(po, counts);
  if (space > kMaxEnumeratedAssignments) {
    throw ValidationError("assignment space of " + std::to_string(space) +
                          " exceeds the enumeration limit");
  }
  const int arms = po.arms();
  const int blocks = po.num_blocks();
  std::vector<std::vector<int>> members(blocks);
  std::vector<std::vector<int>> labels(blocks);
  for (int h = 0; h < blocks; ++h) {
    members[h] = po.block_members(h);
    for (int j = 0; j < arms; ++j) {
      labels[h].insert(labels[h].end(), counts[h][j], j);
    }
  }
  std::vector<CompensatedSum> first(arms);
  std::vector<CompensatedSum> second(arms * arms);
  // Moments are accumulated about the first draw to limit cancellation.
  std::optional<Eigen::VectorXd> shift;
  Assignment a;
  a.treatments.assign(po.units(), 0);
  std::uint64_t visited = 0;
  // Odometer over blocks, each cycling through its multiset permutations.
  while (true) {
    for (int h = 0; h < blocks; ++h) {
      for (std::size_t u = 0; u < members[h].size(); ++u) {
        a.treatments[members[h][u]] = labels[h][u];
      }
    }
    Eigen::VectorXd tau = estimate_from_assignment(po, a).values;
    if (!shift) shift = tau;
    tau -= *shift;
    for (int x = 0; x < arms; ++x) {
      first[x].add(tau(x));
      for (int y = 0; y < arms; ++y) second[x * arms + y].add(tau(x) * tau(y));
    }
    ++visited;
    int h = blocks - 1;
    while (h >= 0 && !std::next_permutation(labels[h].begin(), labels[h].end())) {
      --h;  // next_permutation wrapped this block back to sorted order
    }
    if (h < 0) break;
  }
  EnumeratedMoments out;
  out.assignments = visited;
  out.mean.resize(arms);
  out.cov.resize(arms, arms);
  const auto n = static_cast<double>(visited);
  Eigen::VectorXd shifted_mean(arms);
  for (int x = 0; x < arms; ++x) shifted_mean(x) = first[x].value() / n;
  for (int x = 0; x < arms; ++x) {
    for (int y = 0; y < arms; ++y) {
      out.cov(x, y) =
          second[x * arms + y].value() / n - shifted_mean(x) * shifted_mean(y);
    }
  }
  out.mean = shifted_mean + *shift;
  return out;
}

}  // namespace factalloc
