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

#ifndef FACTALLOC_CLI_TABLES_HPP_
#define FACTALLOC_CLI_TABLES_HPP_

// Delimited pilot-data and potential-outcome files.
//
// Both are comma- or tab-separated with a header row; the delimiter is
// taken from the header. Pilot columns are matched by name:
//   unit_id, block (optional), treatment, outcome, replicate (optional)
// A potential-outcome file has an optional "block" column and 2^K numeric
// columns, one per arm in index order.

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "factalloc/factorial.hpp"

namespace factalloc::cli {

struct DelimitedTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based file line of each row, for messages.
  std::vector<int> lines;
};

DelimitedTable read_delimited(std::istream& in, const std::string& source);

struct PilotData {
  int k = 1;
  std::vector<Observation> observations;
  // Labels in order of first appearance; observation indices refer to these.
  std::vector<std::string> block_names;
  std::vector<std::string> replicate_names;

  bool has_blocks() const { return !block_names.empty(); }
  bool has_replicates() const { return !replicate_names.empty(); }
};

// Treatment codes are read either as K-character bit strings or as
// integers 1..J; the choice is made once for the whole column.
PilotData parse_pilot(std::istream& in, int k, const std::string& source);
PilotData load_pilot(const std::filesystem::path& path, int k);

struct GroupSummary {
  std::vector<int> sizes;
  std::vector<double> means;
  std::vector<double> variances;
};

// Per-arm sizes, means and sample variances (divisor n_j - 1).
GroupSummary summarize_groups(std::span<const Observation> observed, int k);

// Degrees-of-freedom weighted average per arm:
// sum_r (n_rj - 1) s^2_rj / sum_r (n_rj - 1).
std::vector<double> pool_variances(std::span<const GroupSummary> replicates);

PotentialOutcomeMatrix parse_potential_outcomes(std::istream& in,
                                                const std::string& source);
PotentialOutcomeMatrix load_potential_outcomes(const std::filesystem::path& path);

}  // namespace factalloc::cli

#endif  // FACTALLOC_CLI_TABLES_HPP_
