#pragma once

// Command-line front end: map, optimize, experiment, validate.
// Exit status: 0 success, 1 invalid input or failed validation, 2 usage error.

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpmnopt/bpmn_model.hpp"
#include "bpmnopt/cost_model.hpp"
#include "bpmnopt/dag_io.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/experiment.hpp"
#include "bpmnopt/format.hpp"
#include "bpmnopt/mapping.hpp"
#include "bpmnopt/optimizer.hpp"
#include "bpmnopt/stats_catalog.hpp"

namespace bpmnopt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitUsage = 2;

namespace cli_detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

// Writes to `path`, or to `fallback` when the path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error("cannot write '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw Error("write failed");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline std::size_t parse_count(const std::string& text) {
  std::size_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) throw UsageError("not a count: '" + text + "'");
  return value;
}

/// "10..15" (inclusive range) or "10,12,14".
inline std::vector<std::size_t> parse_task_counts(const std::string& text) {
  std::vector<std::size_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    std::size_t lo = parse_count(text.substr(0, dots));
    std::size_t hi = parse_count(text.substr(dots + 2));
    if (lo > hi) throw UsageError("empty range '" + text + "'");
    for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) out.push_back(parse_count(part));
  if (out.empty()) throw UsageError("no task counts in '" + text + "'");
  return out;
}

inline SolveMethod parse_method(const std::string& name) {
  if (name == "exact") return SolveMethod::ExactDP;
  if (name == "greedy") return SolveMethod::Greedy;
  if (name == "brute-force" || name == "brute_force") return SolveMethod::BruteForce;
  throw UsageError("unknown method '" + name + "'");
}

inline int run_map(const std::string& bpmn_path, const std::string& stats_path, const std::string& out_path,
                   const std::string& dot_path, const MappingOptions& opts, std::ostream& out, std::ostream& err) {
  auto bpmn = open_input(bpmn_path);
  BpmnProcess process = parse_bpmn(bpmn);
  StatsCatalog stats;
  if (!stats_path.empty()) {
    auto in = open_input(stats_path);
    stats = load_stats(in);
  }
  MappingOutcome outcome = map_process(process, stats, opts);
  for (const auto& w : outcome.warnings) err << "warning: " << w << '\n';

  Output dag_out(out_path, out);
  *dag_out << serialize_document(outcome.document());
  dag_out.close();
  if (!dot_path.empty()) {
    Output dot(dot_path, out);
    for (std::size_t k = 0; k < outcome.dags.size(); ++k)
      write_dot(*dot, outcome.dags[k], outcome.dags.size() == 1 ? "dag" : "dag" + std::to_string(k));
    dot.close();
  }
  return kExitOk;
}

inline int run_optimize(const std::string& dag_path, SolveMethod method, const std::string& report_path,
                        const std::string& out_path, std::ostream& out) {
  auto in = open_input(dag_path);
  DagDocument doc = read_dag_document(in);

  std::ostringstream report;
  report << "instance,method,baseline_cost,optimized_cost,improvement,ordering\n";
  std::ostringstream summary;
  for (std::size_t k = 0; k < doc.dags.size(); ++k) {
    TokenFlowDag& dag = doc.dags[k];
    auto issues = validate_dag(dag);
    if (!issues.ok()) throw ValidationError("dag " + std::to_string(k) + " is invalid: " + issues.issues.front());
    const double before = evaluate_plan_cost(dag);
    const std::string prefix = doc.dags.size() == 1 ? "" : "dag" + std::to_string(k) + "-";
    for (const auto& inst : extract_instances(dag, prefix)) {
      OptimizationResult r = optimize(inst, method);
      std::string ordering;
      for (std::size_t i : r.ordering) ordering += (ordering.empty() ? "" : ";") + inst.tasks[i];
      report << inst.id << ',' << to_string(r.method) << ',' << format_number(r.baseline_cost) << ','
             << format_number(r.cost) << ',' << format_number(r.improvement) << ',' << ordering << '\n';
      dag = apply_ordering(dag, inst, r.ordering);
    }
    summary << "dag " << k << ": plan cost " << format_number(before) << " -> "
            << format_number(evaluate_plan_cost(dag)) << '\n';
  }

  Output rep(report_path, out);
  *rep << report.str();
  rep.close();
  if (!out_path.empty()) {
    Output dag_out(out_path, out);
    *dag_out << serialize_document(doc);
    dag_out.close();
  }
  if (!report_path.empty() && report_path != "-") out << summary.str();
  return kExitOk;
}

inline int run_validate(const std::string& dag_path, std::ostream& out) {
  auto in = open_input(dag_path);
  DagDocument doc = read_dag_document(in);
  bool ok = true;
  for (std::size_t k = 0; k < doc.dags.size(); ++k) {
    auto report = validate_dag(doc.dags[k]);
    if (report.ok()) {
      out << "dag " << k << ": ok (" << doc.dags[k].size() << " vertices, plan cost "
          << format_number(evaluate_plan_cost(doc.dags[k])) << ")\n";
      continue;
    }
    ok = false;
    out << "dag " << k << ": " << report.issues.size() << " issue(s)\n";
    for (const auto& issue : report.issues) out << "  " << issue << '\n';
  }
  for (const auto& b : doc.barriers)
    if (b.before >= doc.dags.size() || b.after >= doc.dags.size()) {
      ok = false;
      out << "barrier '" << b.event << "' refers to a missing dag\n";
    }
  return ok ? kExitOk : kExitInvalid;
}

inline int run_experiment_command(ExperimentConfig config, const std::string& out_path,
                                  const std::string& aggregate_path, std::ostream& out) {
  ExperimentReport report = run_experiment(config);
  Output rows(out_path, out);
  write_rows_csv(*rows, report);
  rows.close();
  if (!aggregate_path.empty()) {
    Output agg(aggregate_path, out);
    write_aggregates_csv(*agg, report);
    agg.close();
  }
  if (!out_path.empty() && out_path != "-") write_summary(out, report, config);
  return kExitOk;
}

}  // namespace cli_detail

/// Runs one command line. Normal output goes to `out`, diagnostics to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Map BPMN processes to annotated DAGs and optimise task orderings.", "bpmnopt"};
  app.require_subcommand(1);

  // map
  std::string bpmn_path;
  std::string stats_path;
  std::string map_out;
  std::string dot_path;
  std::string loop_mode = "dummy";
  std::string comp_mode = "two-branch";
  bool no_expand = false;
  double time_unit = 1.0;
  MappingOptions map_opts;
  auto* map = app.add_subcommand("map", "Map a BPMN process to a DAG interchange file");
  map->add_option("--bpmn", bpmn_path, "BPMN 2.0 XML file")->required();
  map->add_option("--stats", stats_path, "statistics sidecar (JSON)");
  map->add_option("--out", map_out, "output DAG file (default: stdout)");
  map->add_option("--dot", dot_path, "also write Graphviz DOT");
  map->add_option("--loop-mode", loop_mode, "dummy or amortized")->check(CLI::IsMember({"dummy", "amortized"}));
  map->add_option("--compensation", comp_mode, "two-branch or merged")
      ->check(CLI::IsMember({"two-branch", "merged"}));
  map->add_flag("--no-expand", no_expand, "map subprocesses as single tasks");
  map->add_flag("--checkpoints", map_opts.checkpoint_events, "keep message/signal events as zero-cost vertices");
  map->add_option("--time-unit", time_unit, "seconds per cost unit for ISO-8601 timer durations")
      ->check(CLI::PositiveNumber);

  // optimize
  std::string dag_path;
  std::string method_name = "exact";
  std::string report_path;
  std::string opt_out;
  auto* opt = app.add_subcommand("optimize", "Reorder task chains of a DAG");
  opt->add_option("--dag", dag_path, "DAG interchange file")->required();
  opt->add_option("--method", method_name, "exact, greedy or brute-force")
      ->check(CLI::IsMember({"exact", "greedy", "brute-force"}));
  opt->add_option("--report", report_path, "CSV report (default: stdout)");
  opt->add_option("--out", opt_out, "write the reordered DAG here");

  // experiment
  std::string n_spec = "10..15";
  ExperimentConfig config;
  std::string exp_method = "exact";
  std::string rows_path;
  std::string aggregate_path;
  auto* exp = app.add_subcommand("experiment", "Run the synthetic re-ordering study");
  exp->add_option("--n", n_spec, "task counts, e.g. 10..15 or 10,12");
  exp->add_option("--density", config.densities, "constraint densities (repeat or comma-separate)")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  exp->add_option("--trials", config.trials, "trials per (n, density)")->check(CLI::PositiveNumber);
  exp->add_option("--seed", config.seed, "master seed");
  exp->add_option("--method", exp_method, "exact, greedy or brute-force")
      ->check(CLI::IsMember({"exact", "greedy", "brute-force"}));
  exp->add_option("--jobs", config.jobs, "worker threads")->check(CLI::PositiveNumber);
  exp->add_option("--out", rows_path, "per-trial CSV (default: stdout)");
  exp->add_option("--aggregate", aggregate_path, "per-(n, density) CSV");

  // validate
  std::string validate_path;
  auto* val = app.add_subcommand("validate", "Check the invariants of a DAG file");
  val->add_option("--dag", validate_path, "DAG interchange file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (map->parsed()) {
      map_opts.loop_mode = loop_mode == "amortized" ? LoopMode::Amortized : LoopMode::DummyTask;
      map_opts.compensation_mode =
          comp_mode == "merged" ? CompensationMode::MergedWeighted : CompensationMode::TwoBranch;
      map_opts.expand_subprocesses = !no_expand;
      map_opts.seconds_per_time_unit = time_unit;
      return cli_detail::run_map(bpmn_path, stats_path, map_out, dot_path, map_opts, out, err);
    }
    if (opt->parsed())
      return cli_detail::run_optimize(dag_path, cli_detail::parse_method(method_name), report_path, opt_out, out);
    if (exp->parsed()) {
      config.n_values = cli_detail::parse_task_counts(n_spec);
      config.method = cli_detail::parse_method(exp_method);
      return cli_detail::run_experiment_command(config, rows_path, aggregate_path, out);
    }
    return cli_detail::run_validate(validate_path, out);
  } catch (const cli_detail::UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace bpmnopt
