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

#include "factalloc/cli/problem.hpp"

#include <fstream>
#include <limits>
#include <string>
#include <utility>

#include "factalloc/errors.hpp"

namespace factalloc::cli {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw ValidationError("problem file: " + what);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    schema_error(where + " is missing \"" + key + "\"");
  }
  return obj.at(key);
}

int as_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) schema_error(what + " must be an integer");
  const auto x = v.get<long long>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    schema_error(what + " is out of range");
  }
  return static_cast<int>(x);
}

double as_double(const json& v, const std::string& what) {
  if (!v.is_number()) schema_error(what + " must be a number");
  return v.get<double>();
}

std::vector<double> as_doubles(const json& v, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_double(v[i], what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> as_ints(const json& v, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be a list");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_int(v[i], what + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// Scalar, per-arm list or per-cell matrix, expanded to rows x arms.
CountMatrix expand_bound(const json& v, int rows, int arms,
                         const std::string& what) {
  if (v.is_number()) {
    return CountMatrix(rows, std::vector<int>(arms, as_int(v, what)));
  }
  if (!v.is_array() || v.empty()) schema_error(what + " must be a number or list");
  if (!v.front().is_array()) {
    auto row = as_ints(v, what);
    if (static_cast<int>(row.size()) != arms) {
      schema_error(what + " must list 2^K = " + std::to_string(arms) + " values");
    }
    return CountMatrix(rows, row);
  }
  if (static_cast<int>(v.size()) != rows) {
    schema_error(what + " must have one row per block");
  }
  CountMatrix out;
  for (std::size_t h = 0; h < v.size(); ++h) {
    auto row = as_ints(v[h], what + "[" + std::to_string(h) + "]");
    if (static_cast<int>(row.size()) != arms) {
      schema_error(what + " rows must have 2^K entries");
    }
    out.push_back(std::move(row));
  }
  return out;
}

CountMatrix as_count_matrix(const json& v, const std::string& what) {
  if (!v.is_array()) schema_error(what + " must be a list of rows");
  CountMatrix out;
  for (std::size_t h = 0; h < v.size(); ++h) {
    out.push_back(as_ints(v[h], what + "[" + std::to_string(h) + "]"));
  }
  return out;
}

}  // namespace

std::vector<int> ProblemFile::block_sizes() const {
  std::vector<int> sizes;
  for (const auto& b : blocks) sizes.push_back(b.size);
  return sizes;
}

VarianceSpec ProblemFile::variance_spec() const {
  if (blocked()) schema_error("a blocked design has per-block variances");
  return VarianceSpec(variances.front());
}

BlockVarianceSpec ProblemFile::block_variance_spec() const {
  if (!blocked()) schema_error("design has no blocks");
  return BlockVarianceSpec(variances, block_sizes());
}

DesignSpec ProblemFile::design_spec() const {
  if (blocked()) schema_error("design has blocks; use the block command");
  if (!n) schema_error("design.N is required for a completely randomized design");
  auto spec = DesignSpec::with_defaults(k, *n, criterion);
  if (lower) spec.lower = lower->front();
  if (upper) spec.upper = upper->front();
  spec.validate();
  return spec;
}

BlockDesign ProblemFile::block_design() const {
  if (!blocked()) schema_error("design has no blocks; use the crd command");
  auto design = BlockDesign::with_defaults(k, block_sizes(), criterion);
  if (lower) design.lower = *lower;
  if (upper) design.upper = *upper;
  design.validate();
  return design;
}

CostSpec ProblemFile::cost_spec() const {
  if (!unit_costs || !budget) schema_error("\"costs\" is required");
  return CostSpec(*unit_costs, *budget);
}

ProblemFile parse_problem(const json& doc) {
  if (!doc.is_object()) schema_error("top level must be an object");
  ProblemFile p;
  const json& design = require(doc, "design", "document");
  p.k = as_int(require(design, "K", "design"), "design.K");
  if (p.k < 1 || p.k > kMaxFactors) {
    schema_error("design.K must be in 1.." + std::to_string(kMaxFactors));
  }
  const int arms = num_arms(p.k);
  if (design.contains("N")) p.n = as_int(design.at("N"), "design.N");
  if (design.contains("blocks")) {
    const json& blocks = design.at("blocks");
    if (!blocks.is_array() || blocks.empty()) {
      schema_error("design.blocks must be a nonempty list");
    }
    for (std::size_t h = 0; h < blocks.size(); ++h) {
      const std::string where = "design.blocks[" + std::to_string(h) + "]";
      BlockInfo info;
      info.size = as_int(require(blocks[h], "size", where), where + ".size");
      if (blocks[h].contains("name")) {
        if (!blocks[h].at("name").is_string()) schema_error(where + ".name must be a string");
        info.name = blocks[h].at("name").get<std::string>();
      } else {
        info.name = "block " + std::to_string(h + 1);
      }
      p.blocks.push_back(std::move(info));
    }
    if (p.n) {
      long long total = 0;
      for (const auto& b : p.blocks) total += b.size;
      if (total != *p.n) schema_error("design.N differs from the sum of block sizes");
    }
  }
  if (!p.n && p.blocks.empty() && !doc.contains("costs")) {
    schema_error("design needs N or blocks");
  }
  const int rows = p.blocked() ? static_cast<int>(p.blocks.size()) : 1;

  const json& var = require(doc, "variances", "document");
  if (!var.is_array() || var.empty()) schema_error("variances must be a nonempty list");
  if (var.front().is_array()) {
    if (!p.blocked()) schema_error("a variance matrix needs design.blocks");
    if (static_cast<int>(var.size()) != rows) {
      schema_error("variances must have one row per block");
    }
    for (std::size_t h = 0; h < var.size(); ++h) {
      p.variances.push_back(as_doubles(var[h], "variances[" + std::to_string(h) + "]"));
    }
  } else {
    if (p.blocked()) schema_error("a blocked design needs an H x 2^K variance matrix");
    p.variances.push_back(as_doubles(var, "variances"));
  }
  for (const auto& row : p.variances) {
    if (static_cast<int>(row.size()) != arms) {
      schema_error("variance rows must have 2^K = " + std::to_string(arms) + " entries");
    }
  }

  if (doc.contains("costs")) {
    const json& costs = doc.at("costs");
    p.unit_costs = as_doubles(require(costs, "per_unit", "costs"), "costs.per_unit");
    p.budget = as_double(require(costs, "budget", "costs"), "costs.budget");
    if (static_cast<int>(p.unit_costs->size()) != arms) {
      schema_error("costs.per_unit must have 2^K entries");
    }
  }
  if (doc.contains("bounds")) {
    const json& b = doc.at("bounds");
    if (!b.is_object()) schema_error("bounds must be an object");
    if (b.contains("lower")) p.lower = expand_bound(b.at("lower"), rows, arms, "bounds.lower");
    if (b.contains("upper")) p.upper = expand_bound(b.at("upper"), rows, arms, "bounds.upper");
  }
  if (doc.contains("criterion")) {
    const json& c = doc.at("criterion");
    if (!c.is_string()) schema_error("criterion must be \"A\", \"D\" or \"E\"");
    p.criterion = parse_criterion(c.get<std::string>());
  }
  if (doc.contains("tolerance")) {
    p.tolerance = as_double(doc.at("tolerance"), "tolerance");
    if (!(*p.tolerance >= 0.0)) schema_error("tolerance must be nonnegative");
  }
  if (doc.contains("allocation")) {
    p.allocation = as_count_matrix(doc.at("allocation"), "allocation");
  }
  return p;
}

ProblemFile load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_problem(doc);
}

json to_json(const IntegerAllocation& a) {
  json cells = json::array();
  for (const auto& [h, j] : a.saturated_arms) cells.push_back({h, j});
  return {{"criterion", std::string(criterion_name(a.criterion))},
          {"counts", a.counts},
          {"criterion_value", a.criterion_value},
          {"iterations", a.iterations},
          {"saturated", cells},
          {"warnings", a.warnings}};
}

json to_json(const ExactAllocation& a) {
  return {{"criterion", std::string(criterion_name(a.criterion))},
          {"proportions", a.proportions},
          {"conditions_used", a.conditions_used},
          {"warnings", a.warnings}};
}

json to_json(const CostAllocation& a) {
  return {{"criterion", std::string(criterion_name(a.criterion))},
          {"budget_shares", a.budget_shares},
          {"integer_counts", a.integer_counts},
          {"spent", a.spent},
          {"warnings", a.warnings}};
}

json to_json(const OptimalSet& s) {
  json optima = json::array();
  for (const auto& a : s.optima) optima.push_back(to_json(a));
  return {{"criterion", std::string(criterion_name(s.criterion))},
          {"value", s.value},
          {"enumerated", s.enumerated},
          {"optima", optima}};
}

IntegerAllocation integer_allocation_from_json(const json& j) {
  IntegerAllocation a;
  a.criterion = parse_criterion(j.at("criterion").get<std::string>());
  a.counts = j.at("counts").get<CountMatrix>();
  a.criterion_value = j.at("criterion_value").get<double>();
  a.iterations = j.at("iterations").get<long long>();
  for (const auto& cell : j.at("saturated")) {
    a.saturated_arms.emplace_back(cell.at(0).get<int>(), cell.at(1).get<int>());
  }
  a.warnings = j.at("warnings").get<std::vector<std::string>>();
  return a;
}

ExactAllocation exact_allocation_from_json(const json& j) {
  ExactAllocation a;
  a.criterion = parse_criterion(j.at("criterion").get<std::string>());
  a.proportions = j.at("proportions").get<std::vector<std::vector<double>>>();
  a.conditions_used = j.at("conditions_used").get<std::vector<std::string>>();
  a.warnings = j.at("warnings").get<std::vector<std::string>>();
  return a;
}

CostAllocation cost_allocation_from_json(const json& j) {
  CostAllocation a;
  a.criterion = parse_criterion(j.at("criterion").get<std::string>());
  a.budget_shares = j.at("budget_shares").get<std::vector<double>>();
  a.integer_counts = j.at("integer_counts").get<std::vector<long long>>();
  a.spent = j.at("spent").get<double>();
  a.warnings = j.at("warnings").get<std::vector<std::string>>();
  return a;
}

OptimalSet optimal_set_from_json(const json& j) {
  OptimalSet s;
  s.criterion = parse_criterion(j.at("criterion").get<std::string>());
  s.value = j.at("value").get<double>();
  s.enumerated = j.at("enumerated").get<std::uint64_t>();
  for (const auto& a : j.at("optima")) s.optima.push_back(integer_allocation_from_json(a));
  return s;
}

}  // namespace factalloc::cli
