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

#include "factalloc/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "json.hpp"

#include "factalloc/cli/problem.hpp"
#include "factalloc/cli/tables.hpp"
#include "factalloc/errors.hpp"
#include "factalloc/exact.hpp"
#include "factalloc/greedy.hpp"
#include "factalloc/oracle.hpp"
#include "factalloc/simulation.hpp"

namespace factalloc::cli {

using nlohmann::json;

namespace {

constexpr double kUnbiasednessBand = 4.0;
constexpr double kPsdTolerance = 1e-9;

std::string fmt(const char* pattern, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, ap);
  va_end(ap);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string yes_no(const std::optional<bool>& v) {
  if (!v) return "n/a";
  return *v ? "yes" : "no";
}

// One labelled row per line under a header of treatment codes.
class Table {
 public:
  explicit Table(int k) : k_(k) {}

  void add(std::string label, std::vector<std::string> cells) {
    rows_.emplace_back(std::move(label), std::move(cells));
  }

  void print(std::ostream& out) const {
    const int arms = num_arms(k_);
    std::size_t label_width = 10;
    std::size_t cell_width = static_cast<std::size_t>(k_) + 1;
    for (const auto& [label, cells] : rows_) {
      label_width = std::max(label_width, label.size());
      for (const auto& c : cells) cell_width = std::max(cell_width, c.size() + 1);
    }
    out << std::string(label_width, ' ');
    for (int j = 1; j <= arms; ++j) out << ' ' << pad(treatment_code(j, k_), cell_width);
    out << '\n';
    for (const auto& [label, cells] : rows_) {
      out << label << std::string(label_width - label.size(), ' ');
      for (const auto& c : cells) out << ' ' << pad(c, cell_width);
      out << '\n';
    }
  }

 private:
  int k_;
  std::vector<std::pair<std::string, std::vector<std::string>>> rows_;
};

std::vector<std::string> fixed_cells(const std::vector<double>& v, int digits) {
  std::vector<std::string> out;
  for (double x : v) out.push_back(fmt("%.*f", digits, x));
  return out;
}

template <typename T>
std::vector<std::string> int_cells(const std::vector<T>& v) {
  std::vector<std::string> out;
  for (T x : v) out.push_back(std::to_string(x));
  return out;
}

json conditions_json(const ConditionReport& c) {
  auto opt = [](const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); };
  return {{"homoscedastic", opt(c.homoscedastic)},
          {"strictly_additive", opt(c.strictly_additive)},
          {"within_block_homoscedastic", opt(c.within_block_homoscedastic)},
          {"between_block_homoscedastic", opt(c.between_block_homoscedastic)}};
}

void print_conditions(std::ostream& out, const ConditionReport& c) {
  out << "conditions:";
  if (c.homoscedastic) out << " homoscedastic=" << yes_no(c.homoscedastic);
  if (c.within_block_homoscedastic) {
    out << " within-block-homoscedastic=" << yes_no(c.within_block_homoscedastic);
  }
  if (c.between_block_homoscedastic) {
    out << " between-block-homoscedastic=" << yes_no(c.between_block_homoscedastic);
  }
  if (c.strictly_additive) out << " strictly-additive=" << yes_no(c.strictly_additive);
  out << '\n';
}

void print_warnings(std::ostream& out, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) out << "warning: " << w << '\n';
}

std::vector<std::string> row_labels(const ProblemFile& p) {
  if (!p.blocked()) return {"count"};
  std::vector<std::string> labels;
  for (const auto& b : p.blocks) labels.push_back(b.name);
  return labels;
}

void print_counts(std::ostream& out, const ProblemFile& p, const CountMatrix& counts) {
  Table t(p.k);
  const auto labels = row_labels(p);
  for (std::size_t h = 0; h < counts.size(); ++h) {
    t.add(h < labels.size() ? labels[h] : "row " + std::to_string(h + 1),
          int_cells(counts[h]));
  }
  t.print(out);
}

struct AllocateOptions {
  std::string mode = "greedy";
  std::string spec;
  std::string output = "text";
  std::optional<double> tol;
  std::uint64_t cap = OracleOptions{}.cap;
  unsigned threads = 0;
};

json header_json(const std::string& command, const AllocateOptions& o,
                 const ProblemFile& p) {
  json treatments = json::array();
  for (int j = 1; j <= num_arms(p.k); ++j) treatments.push_back(treatment_code(j, p.k));
  json design = {{"K", p.k}};
  if (p.n) design["N"] = *p.n;
  if (p.blocked()) {
    json blocks = json::array();
    for (const auto& b : p.blocks) blocks.push_back({{"name", b.name}, {"size", b.size}});
    design["blocks"] = blocks;
  }
  return {{"command", command},
          {"mode", o.mode},
          {"criterion", std::string(criterion_name(p.criterion))},
          {"design", design},
          {"treatments", treatments}};
}

void print_header(std::ostream& out, const std::string& command,
                  const AllocateOptions& o, const ProblemFile& p) {
  out << "command: " << command << "  mode: " << o.mode
      << "  criterion: " << criterion_name(p.criterion) << '\n';
  out << "design: K=" << p.k << ", J=" << num_arms(p.k);
  if (p.blocked()) {
    out << ", blocks:";
    for (const auto& b : p.blocks) out << ' ' << b.name << '=' << b.size;
  } else if (p.n) {
    out << ", N=" << *p.n;
  }
  out << '\n';
}

void emit_integer(std::ostream& out, const ProblemFile& p, const IntegerAllocation& a) {
  print_counts(out, p, a.counts);
  out << "criterion value (" << criterion_name(a.criterion)
      << (a.criterion == Criterion::kD ? ", log scale" : "") << "): "
      << fmt("%.10g", a.criterion_value) << '\n';
  out << "greedy steps: " << a.iterations << '\n';
  if (!a.saturated_arms.empty()) {
    out << "at upper bound:";
    const auto labels = row_labels(p);
    for (const auto& [h, j] : a.saturated_arms) {
      out << ' ' << treatment_code(j + 1, p.k);
      if (p.blocked()) out << '@' << labels[h];
    }
    out << '\n';
  }
  print_warnings(out, a.warnings);
}

int cmd_allocate(const std::string& command, const AllocateOptions& o,
                 std::ostream& out) {
  const ProblemFile p = load_problem(o.spec);
  const double tol = o.tol.value_or(p.tolerance.value_or(kDefaultConditionTolerance));
  const bool as_json = o.output == "json";
  json doc = header_json(command, o, p);
  ConditionReport conditions;
  OracleOptions oracle_options;
  oracle_options.cap = o.cap;
  oracle_options.threads = o.threads;

  if (command == "cost") {
    if (p.blocked()) throw ValidationError("cost allocation takes an unblocked design");
    if (o.mode != "exact") {
      throw ValidationError("cost allocation supports --mode exact only");
    }
    const auto vs = p.variance_spec();
    conditions = check_conditions(vs, tol);
    const auto a = exact_cost(vs, p.cost_spec(), p.criterion);
    if (as_json) {
      doc["conditions"] = conditions_json(conditions);
      doc["result"] = to_json(a);
      out << doc.dump(2) << '\n';
      return kExitOk;
    }
    print_header(out, command, o, p);
    print_conditions(out, conditions);
    Table t(p.k);
    t.add("budget share", fixed_cells(a.budget_shares, 3));
    t.add("units", int_cells(a.integer_counts));
    t.print(out);
    out << "spent: " << fmt("%.2f", a.spent) << " of " << fmt("%.2f", *p.budget) << '\n';
    print_warnings(out, a.warnings);
    return kExitOk;
  }

  const bool blocked = command == "block";
  if (blocked != p.blocked()) {
    throw ValidationError(blocked ? "the block command needs design.blocks"
                                  : "design has blocks; use the block command");
  }

  if (o.mode == "exact") {
    ExactAllocation a;
    if (blocked) {
      const auto vs = p.block_variance_spec();
      conditions = check_conditions(vs, tol);
      a = exact_block(vs, p.criterion, tol);
    } else {
      const auto vs = p.variance_spec();
      conditions = check_conditions(vs, tol);
      a = exact_crd(vs, p.criterion);
    }
    if (as_json) {
      doc["conditions"] = conditions_json(conditions);
      doc["result"] = to_json(a);
      out << doc.dump(2) << '\n';
      return kExitOk;
    }
    print_header(out, command, o, p);
    print_conditions(out, conditions);
    Table t(p.k);
    const auto labels = row_labels(p);
    for (std::size_t h = 0; h < a.proportions.size(); ++h) {
      t.add(blocked ? labels[h] : "proportion", fixed_cells(a.proportions[h], 3));
      const double units = blocked ? p.blocks[h].size : p.n.value_or(0);
      if (units > 0) {
        std::vector<double> expected;
        for (double pi : a.proportions[h]) expected.push_back(pi * units);
        t.add(blocked ? labels[h] + " units" : "units", fixed_cells(expected, 1));
      }
    }
    t.print(out);
    if (!a.conditions_used.empty()) {
      out << "relies on:";
      for (const auto& c : a.conditions_used) out << ' ' << c;
      out << '\n';
    }
    print_warnings(out, a.warnings);
    return kExitOk;
  }

  if (o.mode != "greedy" && o.mode != "oracle") {
    throw ValidationError("unknown mode \"" + o.mode + "\"");
  }
  std::optional<IntegerAllocation> greedy;
  std::optional<OptimalSet> optimal;
  if (blocked) {
    const auto vs = p.block_variance_spec();
    conditions = check_conditions(vs, tol);
    const auto design = p.block_design();
    if (o.mode == "greedy") {
      greedy = greedy_block(vs, design);
    } else {
      optimal = enumerate_block(vs, design, oracle_options);
    }
  } else {
    const auto vs = p.variance_spec();
    conditions = check_conditions(vs, tol);
    const auto spec = p.design_spec();
    if (o.mode == "greedy") {
      greedy = greedy_crd(vs, spec);
    } else {
      optimal = enumerate_crd(vs, spec, oracle_options);
    }
  }
  if (as_json) {
    doc["conditions"] = conditions_json(conditions);
    doc["result"] = greedy ? to_json(*greedy) : to_json(*optimal);
    out << doc.dump(2) << '\n';
    return kExitOk;
  }
  print_header(out, command, o, p);
  print_conditions(out, conditions);
  if (greedy) {
    emit_integer(out, p, *greedy);
    return kExitOk;
  }
  out << "optimal allocations: " << optimal->optima.size() << " (criterion value "
      << fmt("%.10g", optimal->value) << ", " << optimal->enumerated
      << " feasible points searched)\n";
  for (std::size_t i = 0; i < optimal->optima.size(); ++i) {
    out << "optimum " << i + 1 << ":\n";
    print_counts(out, p, optimal->optima[i].counts);
  }
  return kExitOk;
}

struct EstimateOptions {
  std::string data;
  int k = 0;
  bool pool = false;
  std::string output = "text";
};

json summary_json(const GroupSummary& g) {
  return {{"sizes", g.sizes}, {"means", g.means}, {"variances", g.variances}};
}

int cmd_estimate(const EstimateOptions& o, std::ostream& out) {
  if (o.k < 1 || o.k > kMaxFactors) {
    throw ValidationError("--k must be in 1.." + std::to_string(kMaxFactors));
  }
  const PilotData data = load_pilot(o.data, o.k);
  const int blocks = data.has_blocks() ? static_cast<int>(data.block_names.size()) : 1;
  const bool as_json = o.output == "json";
  json doc = {{"command", "estimate"}, {"K", o.k}, {"groups", json::array()}};
  for (int h = 0; h < blocks; ++h) {
    std::vector<Observation> obs;
    for (const auto& x : data.observations) {
      if (x.block == h) obs.push_back(x);
    }
    const std::string name = data.has_blocks() ? data.block_names[h] : "all";
    const GroupSummary overall = summarize_groups(obs, o.k);
    std::vector<GroupSummary> replicates;
    if (data.has_replicates()) {
      for (std::size_t r = 0; r < data.replicate_names.size(); ++r) {
        std::vector<Observation> sub;
        for (const auto& x : obs) {
          if (x.replicate == static_cast<int>(r)) sub.push_back(x);
        }
        replicates.push_back(summarize_groups(sub, o.k));
      }
    } else {
      replicates.push_back(overall);
    }
    std::optional<std::vector<double>> pooled;
    if (o.pool) pooled = pool_variances(replicates);
    const EffectVector tau = estimate_effects(obs, o.k);

    if (as_json) {
      json g = {{"name", name}, {"summary", summary_json(overall)}};
      if (data.has_replicates()) {
        json reps = json::array();
        for (std::size_t r = 0; r < replicates.size(); ++r) {
          json rep = summary_json(replicates[r]);
          rep["name"] = data.replicate_names[r];
          reps.push_back(rep);
        }
        g["replicates"] = reps;
      }
      if (pooled) g["pooled_variances"] = *pooled;
      json effects = json::object();
      json labels = json::array();
      std::vector<double> values(tau.values.data(), tau.values.data() + tau.values.size());
      for (int c = 0; c < tau.values.size(); ++c) labels.push_back(effect_label(c, o.k));
      g["effects"] = {{"labels", labels}, {"values", values}};
      doc["groups"].push_back(g);
      continue;
    }

    if (data.has_blocks()) out << "block: " << name << '\n';
    Table t(o.k);
    t.add("n", int_cells(overall.sizes));
    t.add("mean", fixed_cells(overall.means, 4));
    t.add("variance", fixed_cells(overall.variances, 4));
    if (data.has_replicates()) {
      for (std::size_t r = 0; r < replicates.size(); ++r) {
        t.add("var[" + data.replicate_names[r] + "]",
              fixed_cells(replicates[r].variances, 4));
      }
    }
    if (pooled) t.add("pooled", fixed_cells(*pooled, 4));
    t.print(out);
    out << "effect estimates:\n";
    for (int c = 0; c < tau.values.size(); ++c) {
      std::string value = fmt("%.6f", tau.values(c));
      if (value == "-0.000000") value.erase(0, 1);  // rounding noise
      out << "  " << effect_label(c, o.k) << std::string(
                 std::max<int>(1, 12 - static_cast<int>(effect_label(c, o.k).size())), ' ')
          << value << '\n';
    }
  }
  if (as_json) out << doc.dump(2) << '\n';
  return kExitOk;
}

struct SimulateOptions {
  std::string spec;
  std::string po;
  std::uint64_t reps = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

CountMatrix simulation_allocation(const ProblemFile& p, const PotentialOutcomeMatrix& po) {
  if (p.k != po.k()) {
    throw ValidationError("spec K=" + std::to_string(p.k) +
                          " but the outcome file has " + std::to_string(po.arms()) +
                          " columns");
  }
  if (p.allocation) return *p.allocation;
  if (p.blocked()) {
    if (p.block_sizes() != po.block_sizes()) {
      throw ValidationError("spec block sizes differ from the outcome file");
    }
    return greedy_block(p.block_variance_spec(), p.block_design()).counts;
  }
  if (po.blocked()) throw ValidationError("outcome file has blocks but the spec does not");
  if (p.n && *p.n != po.units()) {
    throw ValidationError("spec N differs from the outcome file's unit count");
  }
  ProblemFile q = p;
  q.n = po.units();
  return greedy_crd(q.variance_spec(), q.design_spec()).counts;
}

void print_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << ' ';
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ' ' << pad(fmt("%.6e", m(r, c)), 14);
    out << '\n';
  }
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
  const ProblemFile p = load_problem(o.spec);
  const PotentialOutcomeMatrix po = load_potential_outcomes(o.po);
  const double tol = p.tolerance.value_or(kDefaultConditionTolerance);
  const CountMatrix counts = simulation_allocation(p, po);
  const CovarianceReport rep = monte_carlo(po, counts, o.reps, o.seed, o.threads);
  const ConditionReport conditions = check_conditions(po, tol);
  const int k = po.k();

  out << "simulation: N=" << po.units() << ", J=" << po.arms()
      << ", blocks=" << po.num_blocks() << '\n';
  out << "seed: " << rep.seed << "  replicates: " << rep.replicates
      << "  rng: " << rep.rng_algorithm << '\n';
  out << "allocation" << (p.allocation ? " (from spec)" : " (greedy)") << ":\n";
  Table alloc(k);
  for (std::size_t h = 0; h < counts.size(); ++h) {
    alloc.add(counts.size() == 1 ? "count" : "block " + std::to_string(h + 1),
              int_cells(counts[h]));
  }
  alloc.print(out);

  if (conditions.strictly_additive.value_or(false)) {
    // The unit-level grand mean may still vary; every factorial effect does not.
    out << "heterogeneity term: 0 (strictly additive detected) on every factorial effect; "
        << "grand-mean entry " << fmt("%.6e", rep.heterogeneity_term(0, 0)) << '\n';
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.heterogeneity_term,
                                                       Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    out << "heterogeneity term: min eigenvalue " << fmt("%.6e", min_eig)
        << ", PSD: " << (min_eig >= -kPsdTolerance ? "pass" : "FAIL") << '\n';
  }

  const auto& mean = *rep.empirical_mean;
  const auto& se = *rep.mean_standard_error;
  bool unbiased = true;
  out << "effect        tau            mean           SE             |z|     verdict\n";
  for (int c = 0; c < mean.size(); ++c) {
    const double diff = std::abs(mean(c) - rep.population.values(c));
    const bool ok = diff <= kUnbiasednessBand * se(c) + 1e-12 * (1.0 + std::abs(rep.population.values(c)));
    unbiased = unbiased && ok;
    const std::string label = effect_label(c, k);
    out << label << std::string(std::max<int>(1, 14 - static_cast<int>(label.size())), ' ')
        << pad(fmt("%.6e", rep.population.values(c)), 14) << ' '
        << pad(fmt("%.6e", mean(c)), 14) << ' ' << pad(fmt("%.6e", se(c)), 14) << ' '
        << pad(se(c) > 0 ? fmt("%.3f", diff / se(c)) : "-", 7) << "  "
        << (ok ? "pass" : "FAIL") << '\n';
  }
  out << "unbiasedness (|mean - tau| <= 4 SE): " << (unbiased ? "pass" : "FAIL") << '\n';
  out << "exact covariance:\n";
  print_matrix(out, rep.exact_cov);
  out << "empirical covariance:\n";
  print_matrix(out, *rep.empirical_cov);
  const Eigen::MatrixXd& cov_se = *rep.cov_standard_error;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < cov_se.rows(); ++r) {
    for (Eigen::Index c = 0; c < cov_se.cols(); ++c) {
      if (cov_se(r, c) > 0) {
        worst = std::max(worst, std::abs((*rep.empirical_cov)(r, c) - rep.exact_cov(r, c)) /
                                    cov_se(r, c));
      }
    }
  }
  out << "max |empirical - exact| / SE over covariance entries: " << fmt("%.3f", worst) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal allocation of units in 2^K factorial experiments", "alloc"};
  app.require_subcommand(1);

  AllocateOptions alloc_opts;
  std::vector<CLI::App*> allocate_cmds;
  for (const char* name : {"crd", "block", "cost"}) {
    const std::string help =
        std::string(name) == "crd"     ? "completely randomized design"
        : std::string(name) == "block" ? "block randomized design"
                                       : "exact allocation under a budget";
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--mode", alloc_opts.mode, "exact, greedy or oracle")
        ->check(CLI::IsMember({"exact", "greedy", "oracle"}))
        ->capture_default_str();
    sub->add_option("--spec", alloc_opts.spec, "problem file (JSON)")->required();
    sub->add_option("--output", alloc_opts.output, "text or json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    sub->add_option("--tol", alloc_opts.tol, "relative tolerance for condition checks")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--cap", alloc_opts.cap, "oracle state-space cap")->capture_default_str();
    sub->add_option("--threads", alloc_opts.threads, "oracle worker threads (0 = all)");
    allocate_cmds.push_back(sub);
  }

  EstimateOptions est_opts;
  auto* est = app.add_subcommand("estimate", "variances and effects from pilot data");
  est->add_option("--data", est_opts.data, "pilot data file")->required();
  est->add_option("--k", est_opts.k, "number of factors")->required();
  est->add_flag("--pool", est_opts.pool, "pool variances across replicates");
  est->add_option("--output", est_opts.output, "text or json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();

  SimulateOptions sim_opts;
  auto* sim = app.add_subcommand("simulate", "randomization simulation of an allocation");
  sim->add_option("--spec", sim_opts.spec, "problem file (JSON)")->required();
  sim->add_option("--po", sim_opts.po, "potential-outcome file")->required();
  sim->add_option("--reps", sim_opts.reps, "Monte-Carlo replicates")->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_opts.seed, "random seed")->required();
  sim->add_option("--threads", sim_opts.threads, "worker threads (0 = all)");

  std::vector<const char*> argv{"alloc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    for (auto* sub : allocate_cmds) {
      if (sub->parsed()) return cmd_allocate(sub->get_name(), alloc_opts, out);
    }
    if (est->parsed()) return cmd_estimate(est_opts, out);
    if (sim->parsed()) return cmd_simulate(sim_opts, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ConditionNotMetError& e) {
    err << "condition not met: " << e.what() << '\n'
        << "hint: rerun with --mode greedy for an integer allocation\n";
    return kExitConditionNotMet;
  } catch (const OracleCapExceededError& e) {
    err << "oracle: " << e.what() << '\n';
    return kExitOracleCap;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace factalloc::cli
