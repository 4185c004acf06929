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

#include "factalloc/cli/tables.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

#include "factalloc/errors.hpp"

namespace factalloc::cli {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string where(const std::string& source, int line) {
  return source + ":" + std::to_string(line) + ": ";
}

double parse_real(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ValidationError(context + "expected a number, got \"" + text + "\"");
  }
  return v;
}

bool is_bit_code(const std::string& s, int k) {
  return static_cast<int>(s.size()) == k &&
         std::all_of(s.begin(), s.end(), [](char c) { return c == '0' || c == '1'; });
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                       std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (lower(header[i]) == name) return i;
  }
  return std::nullopt;
}

int intern(std::vector<std::string>& names, std::map<std::string, int>& index,
           const std::string& label) {
  auto [it, inserted] = index.emplace(label, static_cast<int>(names.size()));
  if (inserted) names.push_back(label);
  return it->second;
}

}  // namespace

DelimitedTable read_delimited(std::istream& in, const std::string& source) {
  DelimitedTable t;
  std::string line;
  int line_no = 0;
  char delim = ',';
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    if (!have_header) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      t.header = split(line, delim);
      have_header = true;
      continue;
    }
    auto fields = split(line, delim);
    if (fields.size() != t.header.size()) {
      throw ValidationError(where(source, line_no) + "expected " +
                            std::to_string(t.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw ValidationError(source + ": missing header row");
  return t;
}

PilotData parse_pilot(std::istream& in, int k, const std::string& source) {
  const int arms = num_arms(k);
  const auto table = read_delimited(in, source);
  const auto treatment_col = find_column(table.header, "treatment");
  const auto outcome_col = find_column(table.header, "outcome");
  if (!treatment_col || !outcome_col) {
    throw ValidationError(source + ": header needs \"treatment\" and \"outcome\" columns");
  }
  const auto block_col = find_column(table.header, "block");
  const auto replicate_col = find_column(table.header, "replicate");
  if (table.rows.empty()) throw ValidationError(source + ": no data rows");

  const bool bit_codes =
      std::all_of(table.rows.begin(), table.rows.end(), [&](const auto& row) {
        return is_bit_code(row[*treatment_col], k);
      });

  PilotData data;
  data.k = k;
  std::map<std::string, int> block_index;
  std::map<std::string, int> replicate_index;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string ctx = where(source, table.lines[r]);
    const std::string& code = row[*treatment_col];
    Observation obs;
    if (bit_codes) {
      std::vector<int> levels;
      for (char c : code) levels.push_back(c - '0');
      obs.arm = treatment_index(levels) - 1;
    } else {
      int j = 0;
      auto [ptr, ec] = std::from_chars(code.data(), code.data() + code.size(), j);
      if (ec != std::errc() || ptr != code.data() + code.size() || j < 1 || j > arms) {
        throw ValidationError(ctx + "unknown treatment code \"" + code +
                              "\"; expected 1.." + std::to_string(arms) +
                              " or a " + std::to_string(k) + "-bit string");
      }
      obs.arm = j - 1;
    }
    obs.outcome = parse_real(row[*outcome_col], ctx);
    if (block_col) obs.block = intern(data.block_names, block_index, row[*block_col]);
    if (replicate_col) {
      obs.replicate = intern(data.replicate_names, replicate_index, row[*replicate_col]);
    }
    data.observations.push_back(obs);
  }
  return data;
}

PilotData load_pilot(const std::filesystem::path& path, int k) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_pilot(in, k, path.string());
}

GroupSummary summarize_groups(std::span<const Observation> observed, int k) {
  const int arms = num_arms(k);
  GroupSummary g;
  g.sizes.assign(arms, 0);
  g.means.assign(arms, 0.0);
  g.variances.assign(arms, 0.0);
  for (const auto& obs : observed) {
    ++g.sizes[obs.arm];
    g.means[obs.arm] += obs.outcome;
  }
  for (int j = 0; j < arms; ++j) {
    if (g.sizes[j] < 2) {
      throw ValidationError("treatment " + treatment_code(j + 1, k) +
                            " has fewer than two observations");
    }
    g.means[j] /= g.sizes[j];
  }
  for (const auto& obs : observed) {
    const double d = obs.outcome - g.means[obs.arm];
    g.variances[obs.arm] += d * d;
  }
  for (int j = 0; j < arms; ++j) g.variances[j] /= g.sizes[j] - 1;
  return g;
}

std::vector<double> pool_variances(std::span<const GroupSummary> replicates) {
  if (replicates.empty()) throw ValidationError("nothing to pool");
  const std::size_t arms = replicates.front().variances.size();
  std::vector<double> pooled(arms, 0.0);
  for (std::size_t j = 0; j < arms; ++j) {
    double num = 0.0;
    double df = 0.0;
    for (const auto& r : replicates) {
      if (r.variances.size() != arms) throw ValidationError("replicate arm counts differ");
      num += (r.sizes[j] - 1) * r.variances[j];
      df += r.sizes[j] - 1;
    }
    pooled[j] = num / df;
  }
  return pooled;
}

PotentialOutcomeMatrix parse_potential_outcomes(std::istream& in,
                                                const std::string& source) {
  const auto table = read_delimited(in, source);
  const auto block_col = find_column(table.header, "block");
  const int cols = static_cast<int>(table.header.size()) - (block_col ? 1 : 0);
  if (cols < 2 || (cols & (cols - 1)) != 0) {
    throw ValidationError(source + ": expected 2^K outcome columns, found " +
                          std::to_string(cols));
  }
  if (table.rows.empty()) throw ValidationError(source + ": no units");
  Eigen::MatrixXd y(table.rows.size(), cols);
  std::vector<int> blocks;
  std::vector<std::string> block_names;
  std::map<std::string, int> block_index;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string ctx = where(source, table.lines[i]);
    int c = 0;
    for (std::size_t f = 0; f < table.rows[i].size(); ++f) {
      if (block_col && f == *block_col) {
        blocks.push_back(intern(block_names, block_index, table.rows[i][f]));
      } else {
        y(static_cast<Eigen::Index>(i), c++) = parse_real(table.rows[i][f], ctx);
      }
    }
  }
  return PotentialOutcomeMatrix(std::move(y), std::move(blocks));
}

PotentialOutcomeMatrix load_potential_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_potential_outcomes(in, path.string());
}

}  // namespace factalloc::cli
