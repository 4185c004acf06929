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

#ifndef FACTALLOC_CLI_PROBLEM_HPP_
#define FACTALLOC_CLI_PROBLEM_HPP_

// Problem files (JSON) and the JSON forms of allocation results.
//
// {
//   "design":    {"K": 2, "N": 1656}            or
//                {"K": 2, "blocks": [{"name": "female", "size": 948}, ...]},
//   "variances": [1, 1, 1, 1]                   or one row per block,
//   "costs":     {"per_unit": [500, 5000, 5000, 10000], "budget": 4.5e6},
//   "bounds":    {"lower": 2, "upper": [..]}    scalar, per arm or per cell,
//   "criterion": "A",
//   "tolerance": 1e-9,
//   "allocation": [[...]]                       optional, used by simulate
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "factalloc/design.hpp"
#include "factalloc/exact.hpp"
#include "factalloc/greedy.hpp"
#include "factalloc/oracle.hpp"

namespace factalloc::cli {

struct BlockInfo {
  std::string name;
  int size = 0;
};

struct ProblemFile {
  int k = 1;
  std::optional<int> n;
  std::vector<BlockInfo> blocks;
  std::vector<std::vector<double>> variances;  // one row unless blocked
  std::optional<std::vector<double>> unit_costs;
  std::optional<double> budget;
  std::optional<CountMatrix> lower;
  std::optional<CountMatrix> upper;
  Criterion criterion = Criterion::kA;
  std::optional<double> tolerance;
  std::optional<CountMatrix> allocation;

  bool blocked() const { return !blocks.empty(); }
  std::vector<int> block_sizes() const;

  VarianceSpec variance_spec() const;
  BlockVarianceSpec block_variance_spec() const;
  DesignSpec design_spec() const;
  BlockDesign block_design() const;
  CostSpec cost_spec() const;
};

// Throws ValidationError describing the first schema violation.
ProblemFile parse_problem(const nlohmann::json& doc);
ProblemFile load_problem(const std::filesystem::path& path);

nlohmann::json to_json(const IntegerAllocation& a);
nlohmann::json to_json(const ExactAllocation& a);
nlohmann::json to_json(const CostAllocation& a);
nlohmann::json to_json(const OptimalSet& s);

IntegerAllocation integer_allocation_from_json(const nlohmann::json& j);
ExactAllocation exact_allocation_from_json(const nlohmann::json& j);
CostAllocation cost_allocation_from_json(const nlohmann::json& j);
OptimalSet optimal_set_from_json(const nlohmann::json& j);

}  // namespace factalloc::cli

#endif  // FACTALLOC_CLI_PROBLEM_HPP_
