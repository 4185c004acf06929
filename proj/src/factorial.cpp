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

#include "factalloc/factorial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "factalloc/errors.hpp"

namespace factalloc {

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::kA:
      return "A";
    case Criterion::kD:
      return "D";
    case Criterion::kE:
      return "E";
  }
  return "?";
}

Criterion parse_criterion(std::string_view text) {
  if (text.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(text[0]))) {
      case 'A':
        return Criterion::kA;
      case 'D':
        return Criterion::kD;
      case 'E':
        return Criterion::kE;
      default:
        break;
    }
  }
  throw ValidationError("unknown criterion '" + std::string(text) +
                        "' (expected A, D or E)");
}

int num_arms(int k) {
  if (k < 1 || k > kMaxFactors) {
    throw ValidationError("number of factors K=" + std::to_string(k) +
                          " outside [1, " + std::to_string(kMaxFactors) + "]");
  }
  return 1 << k;
}

int factors_for_arms(int arms) {
  if (arms < 2 || !std::has_single_bit(static_cast<unsigned>(arms))) {
    throw ValidationError(std::to_string(arms) +
                          " treatment arms is not 2^K for K >= 1");
  }
  const int k = std::countr_zero(static_cast<unsigned>(arms));
  num_arms(k);
  return k;
}

int treatment_index(std::span<const int> levels) {
  if (levels.empty()) throw ValidationError("empty level vector");
  num_arms(static_cast<int>(levels.size()));
  int j = 0;
  for (int z : levels) {
    if (z != 0 && z != 1) {
      throw ValidationError("factor levels must be 0 or 1");
    }
    j = (j << 1) | z;
  }
  return j + 1;
}

std::vector<int> treatment_bits(int j, int k) {
  const int arms = num_arms(k);
  if (j < 1 || j > arms) {
    throw ValidationError("treatment " + std::to_string(j) + " outside 1.." +
                          std::to_string(arms));
  }
  std::vector<int> levels(k);
  for (int f = 0; f < k; ++f) levels[f] = ((j - 1) >> (k - 1 - f)) & 1;
  return levels;
}

std::string treatment_code(int j, int k) {
  std::string code;
  for (int z : treatment_bits(j, k)) code.push_back(z ? '1' : '0');
  return code;
}

std::string effect_label(int column, int k) {
  const int arms = num_arms(k);
  if (column < 0 || column >= arms) {
    throw ValidationError("contrast column out of range");
  }
  if (column == 0) return "mean";
  std::string label;
  for (int f = 0; f < k; ++f) {
    if ((column >> (k - 1 - f)) & 1) {
      if (!label.empty()) label += ':';
      label += 'F' + std::to_string(f + 1);
    }
  }
  return label;
}

ContrastMatrix::ContrastMatrix(int k) : k_(k), size_(num_arms(k)) {}

Eigen::MatrixXd ContrastMatrix::dense() const {
  Eigen::MatrixXd out(size_, size_);
  for (int r = 0; r < size_; ++r) {
    for (int c = 0; c < size_; ++c) out(r, c) = (*this)(r, c);
  }
  return out;
}

Eigen::VectorXd ContrastMatrix::apply_transpose(const Eigen::VectorXd& y) const {
  if (y.size() != size_) throw ValidationError("vector length != J");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
  for (int c = 0; c < size_; ++c) {
    double acc = 0.0;
    for (int r = 0; r < size_; ++r) acc += (*this)(r, c) * y(r);
    out(c) = acc;
  }
  return out;
}

Eigen::VectorXd ContrastMatrix::apply(const Eigen::VectorXd& t) const {
  if (t.size() != size_) throw ValidationError("vector length != J");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
  for (int r = 0; r < size_; ++r) {
    double acc = 0.0;
    for (int c = 0; c < size_; ++c) acc += (*this)(r, c) * t(c);
    out(r) = acc;
  }
  return out;
}

ContrastMatrix build_contrast_matrix(int k) { return ContrastMatrix(k); }

PotentialOutcomeMatrix::PotentialOutcomeMatrix(Eigen::MatrixXd outcomes,
                                               std::vector<int> block_labels)
    : outcomes_(std::move(outcomes)), block_labels_(std::move(block_labels)) {
  if (outcomes_.rows() < 1) {
    throw ValidationError("potential-outcome matrix has no units");
  }
  k_ = factors_for_arms(static_cast<int>(outcomes_.cols()));
  if (!outcomes_.allFinite()) {
    throw ValidationError("potential outcomes must be finite");
  }
  if (block_labels_.empty()) return;
  if (static_cast<Eigen::Index>(block_labels_.size()) != outcomes_.rows()) {
    throw ValidationError("need exactly one block label per unit");
  }
  const auto [lo, hi] =
      std::minmax_element(block_labels_.begin(), block_labels_.end());
  if (*lo < 0) throw ValidationError("block labels must be non-negative");
  num_blocks_ = *hi + 1;
  std::vector<int> seen(num_blocks_, 0);
  for (int b : block_labels_) ++seen[b];
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ValidationError("every block must contain at least one unit");
  }
}

std::vector<int> PotentialOutcomeMatrix::block_sizes() const {
  if (!blocked()) return {units()};
  std::vector<int> sizes(num_blocks_, 0);
  for (int b : block_labels_) ++sizes[b];
  return sizes;
}

std::vector<int> PotentialOutcomeMatrix::block_members(int block) const {
  std::vector<int> rows;
  for (int i = 0; i < units(); ++i) {
    if ((blocked() ? block_labels_[i] : 0) == block) rows.push_back(i);
  }
  return rows;
}

EffectVector population_effects(const PotentialOutcomeMatrix& po) {
  const Eigen::VectorXd means = po.outcomes().colwise().mean().transpose();
  const ContrastMatrix lmat(po.k());
  return {po.k(), lmat.apply_transpose(means) / std::ldexp(1.0, po.k() - 1)};
}

Eigen::VectorXd mean_outcomes_from_effects(const EffectVector& effects) {
  return 0.5 * ContrastMatrix(effects.k).apply(effects.values);
}

EffectVector estimate_effects(std::span<const Observation> observed, int k) {
  const int arms = num_arms(k);
  std::vector<double> sums(arms, 0.0);
  std::vector<int> counts(arms, 0);
  for (const auto& obs : observed) {
    if (obs.arm < 0 || obs.arm >= arms) {
      throw ValidationError("observation arm outside 1.." +
                            std::to_string(arms));
    }
    sums[obs.arm] += obs.outcome;
    ++counts[obs.arm];
  }
  Eigen::VectorXd means(arms);
  for (int j = 0; j < arms; ++j) {
    if (counts[j] == 0) {
      throw ValidationError("treatment " + treatment_code(j + 1, k) +
                            " has no observations");
    }
    means(j) = sums[j] / counts[j];
  }
  return {k, ContrastMatrix(k).apply_transpose(means) / std::ldexp(1.0, k - 1)};
}

VarianceSpec::VarianceSpec(std::vector<double> variances)
    : variances_(std::move(variances)) {
  factors_for_arms(arms());
  for (double v : variances_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("variances must be finite and non-negative");
    }
  }
}

BlockVarianceSpec::BlockVarianceSpec(
    std::vector<std::vector<double>> variances, std::vector<int> block_sizes)
    : variances_(std::move(variances)), block_sizes_(std::move(block_sizes)) {
  if (variances_.empty()) throw ValidationError("no blocks given");
  if (variances_.size() != block_sizes_.size()) {
    throw ValidationError("variance rows and block sizes disagree on H");
  }
  const int arms = static_cast<int>(variances_.front().size());
  factors_for_arms(arms);
  for (const auto& row : variances_) {
    if (static_cast<int>(row.size()) != arms) {
      throw ValidationError("every block needs 2^K variances");
    }
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("variances must be finite and non-negative");
      }
    }
  }
  for (int m : block_sizes_) {
    if (m < 1) throw ValidationError("block sizes must be positive");
  }
}

long long BlockVarianceSpec::total_units() const {
  return std::accumulate(block_sizes_.begin(), block_sizes_.end(), 0LL);
}

double BlockVarianceSpec::weight(int block) const {
  const double m = block_sizes_[block];
  const double n = static_cast<double>(total_units());
  return (m * m) / (n * n);
}

BlockVarianceSpec BlockVarianceSpec::with_block_sizes(
    std::vector<int> block_sizes) const {
  return BlockVarianceSpec(variances_, std::move(block_sizes));
}

namespace {

double column_variance(const Eigen::MatrixXd& y, const std::vector<int>& rows,
                       int column) {
  const auto n = static_cast<double>(rows.size());
  double mean = 0.0;
  for (int i : rows) mean += y(i, column);
  mean /= n;
  double ss = 0.0;
  for (int i : rows) ss += (y(i, column) - mean) * (y(i, column) - mean);
  return ss / (n - 1.0);
}

}  // namespace

VarianceSpec finite_population_variances(const PotentialOutcomeMatrix& po) {
  if (po.units() < 2) {
    throw ValidationError("finite-population variance needs N >= 2");
  }
  std::vector<int> rows(po.units());
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<double> out(po.arms());
  for (int j = 0; j < po.arms(); ++j) {
    out[j] = column_variance(po.outcomes(), rows, j);
  }
  return VarianceSpec(std::move(out));
}

BlockVarianceSpec finite_population_block_variances(
    const PotentialOutcomeMatrix& po) {
  std::vector<std::vector<double>> rows_out;
  std::vector<int> sizes;
  for (int h = 0; h < po.num_blocks(); ++h) {
    const auto members = po.block_members(h);
    if (members.size() < 2) {
      throw ValidationError("block " + std::to_string(h + 1) +
                            " needs at least two units");
    }
    std::vector<double> row(po.arms());
    for (int j = 0; j < po.arms(); ++j) {
      row[j] = column_variance(po.outcomes(), members, j);
    }
    rows_out.push_back(std::move(row));
    sizes.push_back(static_cast<int>(members.size()));
  }
  return BlockVarianceSpec(std::move(rows_out), std::move(sizes));
}

namespace {

std::vector<double> arm_sample_variances(std::span<const Observation> observed,
                                         int k, std::string_view where) {
  const int arms = num_arms(k);
  std::vector<std::vector<double>> groups(arms);
  for (const auto& obs : observed) {
    if (obs.arm < 0 || obs.arm >= arms) {
      throw ValidationError("observation arm outside 1.." +
                            std::to_string(arms));
    }
    groups[obs.arm].push_back(obs.outcome);
  }
  std::vector<double> out(arms);
  for (int j = 0; j < arms; ++j) {
    const auto& g = groups[j];
    if (g.size() < 2) {
      throw ValidationError("treatment " + treatment_code(j + 1, k) +
                            std::string(where) +
                            " has fewer than two observations");
    }
    const double mean =
        std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    double ss = 0.0;
    for (double v : g) ss += (v - mean) * (v - mean);
    out[j] = ss / static_cast<double>(g.size() - 1);
  }
  return out;
}

}  // namespace

VarianceSpec sample_variances(std::span<const Observation> observed, int k) {
  return VarianceSpec(arm_sample_variances(observed, k, ""));
}

BlockVarianceSpec sample_block_variances(std::span<const Observation> observed,
                                         int k) {
  int blocks = 0;
  for (const auto& obs : observed) {
    if (obs.block < 0) throw ValidationError("negative block label");
    blocks = std::max(blocks, obs.block + 1);
  }
  if (blocks == 0) throw ValidationError("no observations");
  std::vector<std::vector<Observation>> split(blocks);
  for (const auto& obs : observed) split[obs.block].push_back(obs);
  std::vector<std::vector<double>> rows;
  std::vector<int> sizes;
  for (int h = 0; h < blocks; ++h) {
    rows.push_back(arm_sample_variances(
        split[h], k, " in block " + std::to_string(h + 1)));
    sizes.push_back(static_cast<int>(split[h].size()));
  }
  return BlockVarianceSpec(std::move(rows), std::move(sizes));
}

std::vector<double> criterion_terms(const VarianceSpec& vs,
                                    std::span<const double> counts) {
  if (static_cast<int>(counts.size()) != vs.arms()) {
    throw ValidationError("allocation length != J");
  }
  std::vector<double> terms(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!(counts[j] > 0.0)) {
      throw ValidationError("every arm needs a positive count");
    }
    terms[j] = vs.variances()[j] / counts[j];
  }
  return terms;
}

std::vector<double> criterion_terms(const VarianceSpec& vs,
                                    std::span<const int> counts) {
  std::vector<double> as_real(counts.begin(), counts.end());
  return criterion_terms(vs, as_real);
}

std::vector<double> block_criterion_terms(const BlockVarianceSpec& vs,
                                          const CountMatrix& counts) {
  if (static_cast<int>(counts.size()) != vs.blocks()) {
    throw ValidationError("allocation has the wrong number of blocks");
  }
  std::vector<double> terms(vs.arms(), 0.0);
  for (int h = 0; h < vs.blocks(); ++h) {
    if (static_cast<int>(counts[h].size()) != vs.arms()) {
      throw ValidationError("allocation row length != J");
    }
    const double w = vs.weight(h);
    for (int j = 0; j < vs.arms(); ++j) {
      if (counts[h][j] < 1) {
        throw ValidationError("every cell needs a positive count");
      }
      terms[j] += w * vs.variances()[h][j] / counts[h][j];
    }
  }
  return terms;
}

Eigen::MatrixXd criterion_matrix_from_terms(std::span<const double> terms) {
  const int arms = static_cast<int>(terms.size());
  const ContrastMatrix lmat(factors_for_arms(arms));
  const Eigen::MatrixXd l = lmat.dense();
  const Eigen::Map<const Eigen::VectorXd> diag(terms.data(), arms);
  return l.transpose() * diag.asDiagonal() * l;
}

Eigen::MatrixXd criterion_matrix(const VarianceSpec& vs,
                                 std::span<const int> counts) {
  return criterion_matrix_from_terms(criterion_terms(vs, counts));
}

Eigen::MatrixXd criterion_matrix(const BlockVarianceSpec& vs,
                                 const CountMatrix& counts) {
  return criterion_matrix_from_terms(block_criterion_terms(vs, counts));
}

double criterion_from_terms(std::span<const double> terms, Criterion c) {
  const double arms = static_cast<double>(terms.size());
  switch (c) {
    case Criterion::kA: {
      double sum = 0.0;
      for (double t : terms) sum += t;
      return arms * sum;
    }
    case Criterion::kD: {
      double sum = arms * std::log(arms);
      for (double t : terms) {
        if (!(t > 0.0)) {
          throw ValidationError(
              "D criterion undefined with a zero-variance arm");
        }
        sum += std::log(t);
      }
      return sum;
    }
    case Criterion::kE:
      return arms * *std::max_element(terms.begin(), terms.end());
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double criterion_value(const VarianceSpec& vs, std::span<const int> counts,
                       Criterion c) {
  return criterion_from_terms(criterion_terms(vs, counts), c);
}

double criterion_value(const VarianceSpec& vs, std::span<const double> counts,
                       Criterion c) {
  return criterion_from_terms(criterion_terms(vs, counts), c);
}

double criterion_value(const BlockVarianceSpec& vs, const CountMatrix& counts,
                       Criterion c) {
  return criterion_from_terms(block_criterion_terms(vs, counts), c);
}

bool nearly_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

namespace {

bool all_nearly_equal(std::span<const double> values, double tol) {
  for (double v : values) {
    if (!nearly_equal(v, values.front(), tol)) return false;
  }
  return true;
}

}  // namespace

ConditionReport check_conditions(const VarianceSpec& vs, double tol) {
  ConditionReport report;
  report.homoscedastic = all_nearly_equal(vs.variances(), tol);
  return report;
}

ConditionReport check_conditions(const BlockVarianceSpec& vs, double tol) {
  ConditionReport report;
  bool wbh = true;
  for (const auto& row : vs.variances()) wbh = wbh && all_nearly_equal(row, tol);
  bool bbh = true;
  for (int j = 0; j < vs.arms(); ++j) {
    std::vector<double> column;
    for (const auto& row : vs.variances()) column.push_back(row[j]);
    bbh = bbh && all_nearly_equal(column, tol);
  }
  report.within_block_homoscedastic = wbh;
  report.between_block_homoscedastic = bbh;
  return report;
}

ConditionReport check_conditions(const PotentialOutcomeMatrix& po, double tol) {
  ConditionReport report;
  const auto& y = po.outcomes();
  if (po.units() >= 2) {
    report = check_conditions(finite_population_variances(po), tol);
  }
  // Strict additivity: every column minus column 0 is constant over units,
  // which makes every pairwise difference constant as well.
  const double scale = y.cwiseAbs().maxCoeff();
  bool additive = true;
  for (int j = 1; j < po.arms() && additive; ++j) {
    const double ref = y(0, j) - y(0, 0);
    for (int i = 1; i < po.units(); ++i) {
      if (std::abs((y(i, j) - y(i, 0)) - ref) > tol * scale) {
        additive = false;
        break;
      }
    }
  }
  report.strictly_additive = additive;
  if (po.blocked()) {
    bool all_blocks_big_enough = true;
    for (int m : po.block_sizes()) all_blocks_big_enough &= m >= 2;
    if (all_blocks_big_enough) {
      const auto blocked = check_conditions(finite_population_block_variances(po), tol);
      report.within_block_homoscedastic = blocked.within_block_homoscedastic;
      report.between_block_homoscedastic = blocked.between_block_homoscedastic;
    }
  }
  return report;
}

}  // namespace factalloc
