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

#include "factalloc/exact.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "factalloc/errors.hpp"

namespace factalloc {
namespace {

// Normalizes weights to proportions. Zero-weight arms are reported.
std::vector<double> normalize(const std::vector<double>& weights,
                              std::vector<std::string>& warnings,
                              const std::string& context) {
  // Equal weights give exactly 1/J rather than w / (w + ... + w).
  if (std::adjacent_find(weights.begin(), weights.end(),
                         std::not_equal_to<>()) == weights.end() &&
      weights.front() > 0.0) {
    return std::vector<double>(weights.size(), 1.0 / weights.size());
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) {
    throw ValidationError("all variances are zero" + context +
                          "; the optimal direction is undefined");
  }
  std::vector<double> p(weights.size());
  const int k = factors_for_arms(static_cast<int>(weights.size()));
  for (std::size_t j = 0; j < weights.size(); ++j) {
    p[j] = weights[j] / total;
    if (weights[j] == 0.0) {
      warnings.push_back("treatment " + treatment_code(static_cast<int>(j) + 1, k) +
                         context + " has zero variance and receives no units");
    }
  }
  return p;
}

std::vector<double> balanced(int arms) {
  return std::vector<double>(arms, 1.0 / arms);
}

std::vector<double> crd_weights(const std::vector<double>& variances,
                                Criterion c) {
  std::vector<double> w(variances.size());
  for (std::size_t j = 0; j < variances.size(); ++j) {
    w[j] = c == Criterion::kA ? std::sqrt(variances[j]) : variances[j];
  }
  return w;
}

void note_zero_variance_under_d(const std::vector<double>& variances,
                                std::vector<std::string>& warnings) {
  for (double v : variances) {
    if (v == 0.0) {
      warnings.push_back(
          "zero-variance arm present; the D-optimal split does not depend on "
          "the variances");
      return;
    }
  }
}

}  // namespace

ExactAllocation exact_crd(const VarianceSpec& vs, Criterion c) {
  ExactAllocation out;
  out.criterion = c;
  if (c == Criterion::kD) {
    note_zero_variance_under_d(vs.variances(), out.warnings);
    out.proportions.push_back(balanced(vs.arms()));
  } else {
    out.proportions.push_back(
        normalize(crd_weights(vs.variances(), c), out.warnings, ""));
  }
  return out;
}

ExactAllocation exact_block(const BlockVarianceSpec& vs, Criterion c,
                            double tol) {
  ExactAllocation out;
  out.criterion = c;
  if (c == Criterion::kA) {
    for (int h = 0; h < vs.blocks(); ++h) {
      out.proportions.push_back(
          normalize(crd_weights(vs.variances()[h], c), out.warnings,
                    " in block " + std::to_string(h + 1)));
    }
    return out;
  }
  const ConditionReport cond = check_conditions(vs, tol);
  const bool wbh = *cond.within_block_homoscedastic;
  const bool bbh = *cond.between_block_homoscedastic;
  if (c == Criterion::kD) {
    if (!wbh && !bbh) {
      throw ConditionNotMetError(
          "no closed-form D-optimal block allocation: the variances are "
          "neither within-block (WBH) nor between-block (BBH) "
          "homoscedastic; use the greedy mode");
    }
    if (wbh) out.conditions_used.emplace_back("WBH");
    if (bbh) out.conditions_used.emplace_back("BBH");
  } else {
    if (!wbh) {
      throw ConditionNotMetError(
          "no closed-form E-optimal block allocation: the variances are not "
          "within-block homoscedastic (WBH); use the greedy mode");
    }
    out.conditions_used.emplace_back("WBH");
  }
  for (const auto& row : vs.variances()) {
    if (c == Criterion::kD) note_zero_variance_under_d(row, out.warnings);
    out.proportions.push_back(balanced(vs.arms()));
  }
  return out;
}

CostSpec::CostSpec(std::vector<double> costs, double budget)
    : costs_(std::move(costs)), budget_(budget) {
  factors_for_arms(static_cast<int>(costs_.size()));
  for (double cj : costs_) {
    if (!std::isfinite(cj) || cj <= 0.0) {
      throw ValidationError("per-unit costs must be positive");
    }
  }
  if (!std::isfinite(budget_) || budget_ <= 0.0) {
    throw ValidationError("budget must be positive");
  }
}

CostAllocation exact_cost(const VarianceSpec& vs, const CostSpec& cost,
                          Criterion c) {
  if (vs.arms() != static_cast<int>(cost.costs().size())) {
    throw ValidationError("cost vector length != J");
  }
  CostAllocation out;
  out.criterion = c;
  const auto& s2 = vs.variances();
  const auto& cj = cost.costs();
  if (c == Criterion::kD) {
    note_zero_variance_under_d(s2, out.warnings);
    out.budget_shares = balanced(vs.arms());
  } else {
    std::vector<double> w(s2.size());
    for (std::size_t j = 0; j < s2.size(); ++j) {
      w[j] = c == Criterion::kA ? std::sqrt(s2[j]) * std::sqrt(cj[j])
                                : s2[j] * cj[j];
    }
    out.budget_shares = normalize(w, out.warnings, "");
  }
  const int k = vs.k();
  for (std::size_t j = 0; j < s2.size(); ++j) {
    const auto n = static_cast<long long>(
        std::floor(cost.budget() * out.budget_shares[j] / cj[j]));
    out.integer_counts.push_back(n);
    out.spent += cj[j] * static_cast<double>(n);
    if (n < 2) {
      out.warnings.push_back("treatment " +
                             treatment_code(static_cast<int>(j) + 1, k) +
                             " receives " + std::to_string(n) +
                             " units; fewer than two leaves its variance "
                             "inestimable");
    }
  }
  return out;
}

}  // namespace factalloc
