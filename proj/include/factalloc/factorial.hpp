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

#ifndef FACTALLOC_FACTORIAL_HPP_
#define FACTALLOC_FACTORIAL_HPP_

// Contrast machinery for 2^K factorial designs: treatment numbering, the
// J x J contrast matrix, population/estimated factorial effects, group
// variances, the criterion matrix and its A/D/E functionals, and the
// homoscedasticity/additivity condition checks.
//
// Conventions used throughout the library:
//  * Treatment combinations are numbered 1..J at the API edge
//    (treatment_index / treatment_bits / treatment_code) and stored 0-based
//    ("arm" j-1) in every vector and matrix.
//  * Factor 1 is the most significant bit of (j-1).
//  * Contrast column c is the bitmask of the factors in the effect, using the
//    same bit convention; column 0 is the grand mean.

#include <Eigen/Dense>

#include <bit>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factalloc {

enum class Criterion { kA, kD, kE };

std::string_view criterion_name(Criterion c);
// Accepts "A", "D", "E" (case-insensitive). Throws ValidationError.
Criterion parse_criterion(std::string_view text);

inline constexpr int kMaxFactors = 16;
inline constexpr double kDefaultConditionTolerance = 1e-9;

// J = 2^K. Throws ValidationError when K is outside [1, kMaxFactors].
int num_arms(int k);
// log2(J) for a power-of-two column count; throws ValidationError otherwise.
int factors_for_arms(int arms);

// Treatment number j in 1..J of the level vector z (z_1 first).
int treatment_index(std::span<const int> levels);
// Inverse of treatment_index: the K levels of treatment j (1-based j).
std::vector<int> treatment_bits(int j, int k);
// Level string such as "011" for treatment j (1-based j).
std::string treatment_code(int j, int k);
// Human-readable name of contrast column c: "mean", "F1", "F1:F3", ...
std::string effect_label(int column, int k);

// The J x J matrix of +/-1 contrasts. Entries are computed on demand so the
// object stays cheap for large K; dense() materializes it.
class ContrastMatrix {
 public:
  explicit ContrastMatrix(int k);

  int k() const { return k_; }
  int size() const { return size_; }

  // Row = treatment arm (0-based), column = effect bitmask.
  int operator()(int row, int column) const {
    // -1 for every factor of the effect held at level 0 in this treatment.
    return (std::popcount(static_cast<unsigned>(column & ~row)) & 1) ? -1 : 1;
  }

  Eigen::MatrixXd dense() const;
  // L^T y and L t without materializing L.
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& t) const;

 private:
  int k_;
  int size_;
};

ContrastMatrix build_contrast_matrix(int k);

// N x J matrix of potential outcomes, optionally with 0-based block labels.
class PotentialOutcomeMatrix {
 public:
  explicit PotentialOutcomeMatrix(Eigen::MatrixXd outcomes,
                                  std::vector<int> block_labels = {});

  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const std::vector<int>& block_labels() const { return block_labels_; }
  int k() const { return k_; }
  int units() const { return static_cast<int>(outcomes_.rows()); }
  int arms() const { return static_cast<int>(outcomes_.cols()); }
  bool blocked() const { return !block_labels_.empty(); }
  int num_blocks() const { return num_blocks_; }
  // Units in each block, or {units()} when unblocked.
  std::vector<int> block_sizes() const;
  // Rows belonging to one block (all rows when unblocked and block == 0).
  std::vector<int> block_members(int block) const;

 private:
  Eigen::MatrixXd outcomes_;
  std::vector<int> block_labels_;
  int k_ = 0;
  int num_blocks_ = 1;
};

// Element 0 is twice the grand mean; the rest follow contrast column order.
struct EffectVector {
  int k = 0;
  Eigen::VectorXd values;
};

// One observed outcome. arm is 0-based; block and replicate are 0-based
// labels and default to a single block / replicate.
struct Observation {
  int arm = 0;
  double outcome = 0.0;
  int block = 0;
  int replicate = 0;
};

EffectVector population_effects(const PotentialOutcomeMatrix& po);
// Mean-outcome vector recovered from effects: (1/2) L tau.
Eigen::VectorXd mean_outcomes_from_effects(const EffectVector& effects);
// tau-hat from observed group means. Every arm needs an observation.
EffectVector estimate_effects(std::span<const Observation> observed, int k);

class VarianceSpec {
 public:
  VarianceSpec() = default;
  explicit VarianceSpec(std::vector<double> variances);

  const std::vector<double>& variances() const { return variances_; }
  int arms() const { return static_cast<int>(variances_.size()); }
  int k() const { return factors_for_arms(arms()); }

 private:
  std::vector<double> variances_;
};

// H x J block variances S^2_{h,j} together with the block sizes M_h.
class BlockVarianceSpec {
 public:
  BlockVarianceSpec() = default;
  BlockVarianceSpec(std::vector<std::vector<double>> variances,
                    std::vector<int> block_sizes);

  const std::vector<std::vector<double>>& variances() const {
    return variances_;
  }
  const std::vector<int>& block_sizes() const { return block_sizes_; }
  int blocks() const { return static_cast<int>(variances_.size()); }
  int arms() const { return static_cast<int>(variances_.front().size()); }
  int k() const { return factors_for_arms(arms()); }
  long long total_units() const;
  // M_h^2 / N^2 for block h.
  double weight(int block) const;
  // Same variances, different block sizes.
  BlockVarianceSpec with_block_sizes(std::vector<int> block_sizes) const;

 private:
  std::vector<std::vector<double>> variances_;
  std::vector<int> block_sizes_;
};

using CountMatrix = std::vector<std::vector<int>>;

// Column variances of the potential-outcome matrix, divisor N-1.
VarianceSpec finite_population_variances(const PotentialOutcomeMatrix& po);
// Per-block column variances, divisor M_h-1; block sizes are the M_h.
BlockVarianceSpec finite_population_block_variances(
    const PotentialOutcomeMatrix& po);
// Per-arm sample variances, divisor N_j-1. Needs two observations per arm.
VarianceSpec sample_variances(std::span<const Observation> observed, int k);
// Per-block sample variances; the block sizes are the observed block counts.
BlockVarianceSpec sample_block_variances(std::span<const Observation> observed,
                                         int k);

// Diagonal of A: S^2_j / N_j. Counts may be fractional.
std::vector<double> criterion_terms(const VarianceSpec& vs,
                                    std::span<const double> counts);
std::vector<double> criterion_terms(const VarianceSpec& vs,
                                    std::span<const int> counts);
// Diagonal of A_blk: S^2_blk,j = sum_h (M_h^2/N^2) S^2_{h,j} / M_{h,j}.
std::vector<double> block_criterion_terms(const BlockVarianceSpec& vs,
                                          const CountMatrix& counts);

// L^T diag(terms) L.
Eigen::MatrixXd criterion_matrix_from_terms(std::span<const double> terms);
Eigen::MatrixXd criterion_matrix(const VarianceSpec& vs,
                                 std::span<const int> counts);
Eigen::MatrixXd criterion_matrix(const BlockVarianceSpec& vs,
                                 const CountMatrix& counts);

// A = J sum(terms), D = J log J + sum(log terms), E = J max(terms).
// D is reported on the log scale; a zero term under D throws.
double criterion_from_terms(std::span<const double> terms, Criterion c);
double criterion_value(const VarianceSpec& vs, std::span<const int> counts,
                       Criterion c);
double criterion_value(const VarianceSpec& vs, std::span<const double> counts,
                       Criterion c);
double criterion_value(const BlockVarianceSpec& vs, const CountMatrix& counts,
                       Criterion c);

// |a - b| <= tol * max(|a|, |b|).
bool nearly_equal(double a, double b, double tol);

struct ConditionReport {
  std::optional<bool> homoscedastic;
  std::optional<bool> strictly_additive;
  std::optional<bool> within_block_homoscedastic;
  std::optional<bool> between_block_homoscedastic;
};

ConditionReport check_conditions(const PotentialOutcomeMatrix& po,
                                 double tol = kDefaultConditionTolerance);
ConditionReport check_conditions(const VarianceSpec& vs,
                                 double tol = kDefaultConditionTolerance);
ConditionReport check_conditions(const BlockVarianceSpec& vs,
                                 double tol = kDefaultConditionTolerance);

}  // namespace factalloc

#endif  // FACTALLOC_FACTORIAL_HPP_
