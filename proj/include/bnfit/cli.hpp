#pragma once

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bnfit/decomposed_solver.hpp"
#include "bnfit/dense_solver.hpp"
#include "bnfit/elimination.hpp"
#include "bnfit/generator.hpp"
#include "bnfit/io.hpp"

namespace bnfit::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kValidation = 3,
  kMaxCycles = 4,
  kOscillating = 5,
  kSubnetBudget = 6,
  kDominance = 7,
  kCheckFailed = 8,
  kScope = 9,
  kIo = 10,
};

inline constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success (run: converged; check: all residuals within epsilon)\n"
    "  1  internal error\n"
    "  2  usage error or invalid argument\n"
    "  3  invalid input document (syntax, version, names, cardinality, cycle, normalization)\n"
    "  4  run stopped at --max-cycles without converging (outputs still written)\n"
    "  5  run detected oscillation (outputs still written)\n"
    "  6  d-ipfp subnet exceeds the size budget\n"
    "  7  dominance failure: a constraint puts mass where the model has none\n"
    "  8  check: some residual exceeds epsilon\n"
    "  9  scope mismatch or dense ceiling exceeded\n"
    " 10  file I/O error\n"
    "Set BNFIT_LOG=quiet|warn|info|debug for diagnostics on stderr.";

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax:
    case ErrorKind::UnsupportedVersion:
    case ErrorKind::UnknownVariable:
    case ErrorKind::DuplicateVariable:
    case ErrorKind::Cardinality:
    case ErrorKind::Cycle:
    case ErrorKind::Normalization: return kValidation;
    case ErrorKind::ScopeMismatch:
    case ErrorKind::DenseCeiling: return kScope;
    case ErrorKind::Dominance: return kDominance;
    case ErrorKind::SubnetBudget: return kSubnetBudget;
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::Io: return kIo;
  }
  return kInternal;
}

enum class Command { Run, Check, Divergence, Gen };
enum class ScheduleMode { DocumentOrder, AncestorsFirst };

struct CliConfig {
  Command command = Command::Run;
  Algorithm algorithm = Algorithm::DIpfp;
  double epsilon = 1e-9;
  std::size_t max_cycles = 10000;
  std::size_t oscillation_window = StopPolicy{}.oscillation_window;
  std::string network_path, constraints_path, out_path, report_path;
  std::vector<std::string> divergence_paths;
  std::uint64_t seed = 0;
  std::size_t nodes = 15;
  std::size_t num_constraints = 8;
  std::size_t subnet_budget = DecomposedOptions{}.subnet_budget;
  ScheduleMode schedule = ScheduleMode::DocumentOrder;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string scope_label(const NetworkSpec& net, const Constraint& r) {
  std::string s = "{";
  for (std::size_t i = 0; i < r.scope.size(); ++i) s += (i ? "," : "") + net.name(r.scope[i]);
  return s + "}";
}

}  // namespace detail

inline int cmd_run(const CliConfig& cfg, std::ostream& out) {
  const NetworkSpec net = io::parse_network(io::read_file(cfg.network_path));
  const auto rs = io::parse_constraints(io::read_file(cfg.constraints_path), net);
  StopPolicy stop;
  stop.epsilon = cfg.epsilon;
  stop.max_cycles = cfg.max_cycles;
  stop.oscillation_window = cfg.oscillation_window;
  const bool structural = cfg.algorithm == Algorithm::EIpfp;
  const Schedule sched = cfg.schedule == ScheduleMode::AncestorsFirst
                             ? Schedule::ancestors_first(net, rs, structural)
                             : Schedule::document_order(rs.size(), structural);

  std::optional<NetworkSpec> result;
  RunReport report;
  switch (cfg.algorithm) {
    case Algorithm::Ipfp: {
      auto [q, rep] = run_ipfp(net, rs, stop, sched);
      // Plain IPFP yields a joint; the network written is its CPT projection.
      result = rs.empty() ? net : net.with_cpts(extract_cpts(q, net));
      report = std::move(rep);
      break;
    }
    case Algorithm::EIpfp: {
      auto [n, rep] = run_e_ipfp(net, rs, stop, sched);
      result = std::move(n);
      report = std::move(rep);
      break;
    }
    case Algorithm::DIpfp: {
      DecomposedOptions opts;
      opts.subnet_budget = cfg.subnet_budget;
      auto [n, rep] = run_d_ipfp(net, rs, stop, sched, opts);
      result = std::move(n);
      report = std::move(rep);
      break;
    }
  }

  io::write_file_atomic(cfg.out_path, io::serialize_network(*result));
  io::write_file_atomic(cfg.report_path, io::serialize_report(report));
  out << to_string(report.algorithm) << ": " << to_string(report.termination) << " after "
      << report.cycles << " cycles, max residual " << detail::fmt(report.max_residual());
  if (report.final_divergence) out << ", divergence " << detail::fmt(*report.final_divergence);
  else out << ", divergence omitted (above dense ceiling)";
  out << "\n";
  switch (report.termination) {
    case Termination::Converged: return kOk;
    case Termination::MaxCycles: return kMaxCycles;
    case Termination::Oscillating: return kOscillating;
  }
  return kInternal;
}

inline int cmd_check(const CliConfig& cfg, std::ostream& out) {
  const NetworkSpec net = io::parse_network(io::read_file(cfg.network_path));
  const auto rs = io::parse_constraints(io::read_file(cfg.constraints_path), net);
  bool ok = true;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const JointTable m = marginal_by_elimination(net, rs[i].scope);
    const double res = max_abs_diff(m.probs, rs[i].dist.probs);
    const bool pass = res <= cfg.epsilon;
    ok = ok && pass;
    out << "constraint " << i << " " << detail::scope_label(net, rs[i]) << " residual "
        << detail::fmt(res) << (pass ? " ok" : " FAIL") << "\n";
  }
  if (fits_dense(net)) {
    const double s = structural_residual(joint_from_network(net), net);
    out << "structural residual " << detail::fmt(s)
        << (s <= cfg.epsilon ? " consistent" : " inconsistent") << "\n";
  } else {
    out << "structural residual omitted (above dense ceiling)\n";
  }
  out << (ok ? "all constraints satisfied\n" : "constraints not satisfied\n");
  return ok ? kOk : kCheckFailed;
}

inline int cmd_divergence(const CliConfig& cfg, std::ostream& out) {
  const NetworkSpec p = io::parse_network(io::read_file(cfg.divergence_paths.at(0)));
  const NetworkSpec q = io::parse_network(io::read_file(cfg.divergence_paths.at(1)));
  if (!p.same_variables(q)) {
    throw Error(ErrorKind::ScopeMismatch, "the two networks declare different variables");
  }
  require_dense(p);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", i_divergence(joint_from_network(p), joint_from_network(q)));
  out << buf << "\n";
  return kOk;
}

inline int cmd_gen(const CliConfig& cfg, std::ostream& out) {
  GeneratorOptions opts;
  opts.nodes = cfg.nodes;
  opts.constraints = cfg.num_constraints;
  const GeneratedInstance inst = generate_instance(cfg.seed, opts);
  io::write_file_atomic(cfg.out_path, io::serialize_network(inst.network));
  io::write_file_atomic(cfg.constraints_path,
                        io::serialize_constraints(inst.constraints, inst.network));
  out << "generated " << inst.network.size() << " variables, " << inst.constraints.size()
      << " constraints\n";
  return kOk;
}

/// Full command line handling; returns the process exit code.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit Bayesian network CPTs to probability constraints (IPFP, E-IPFP, D-IPFP)",
               "bnfit"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  CliConfig cfg;

  const std::map<std::string, Algorithm> algorithms{
      {"ipfp", Algorithm::Ipfp}, {"e-ipfp", Algorithm::EIpfp}, {"d-ipfp", Algorithm::DIpfp}};
  const std::map<std::string, ScheduleMode> schedules{
      {"document-order", ScheduleMode::DocumentOrder},
      {"ancestors-first", ScheduleMode::AncestorsFirst}};

  auto* run = app.add_subcommand("run", "fit a network to a constraint set");
  run->add_option("--network", cfg.network_path, "input network JSON")->required();
  run->add_option("--constraints", cfg.constraints_path, "constraint set JSON")->required();
  run->add_option("--algorithm", cfg.algorithm, "ipfp | e-ipfp | d-ipfp")
      ->transform(CLI::CheckedTransformer(algorithms, CLI::ignore_case).description(""))
      ->capture_default_str();
  run->add_option("--epsilon", cfg.epsilon, "convergence tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--max-cycles", cfg.max_cycles, "cycle budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--oscillation-window", cfg.oscillation_window, "cycles without 10% improvement before giving up")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1000000000}).description(""))
      ->capture_default_str();
  run->add_option("--schedule", cfg.schedule, "document-order | ancestors-first")
      ->transform(CLI::CheckedTransformer(schedules, CLI::ignore_case).description(""));
  run->add_option("--subnet-budget", cfg.subnet_budget, "d-ipfp: largest subnet, in variables")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--out", cfg.out_path, "output network JSON")->required();
  run->add_option("--report", cfg.report_path, "output run report JSON")->required();

  auto* check = app.add_subcommand("check", "report constraint residuals of a network");
  check->add_option("--network", cfg.network_path, "network JSON")->required();
  check->add_option("--constraints", cfg.constraints_path, "constraint set JSON")->required();
  check->add_option("--epsilon", cfg.epsilon, "pass threshold")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* div = app.add_subcommand("divergence", "print I(first || second) in nats");
  div->add_option("networks", cfg.divergence_paths, "FIRST SECOND network files")
      ->required()
      ->expected(2);

  auto* gen = app.add_subcommand("gen", "generate a random network and consistent constraints");
  gen->add_option("--seed", cfg.seed, "random seed")->required();
  gen->add_option("--nodes", cfg.nodes, "binary variables")
      ->check(CLI::Range(1, 62))
      ->capture_default_str();
  gen->add_option("--num-constraints", cfg.num_constraints, "constraints to draw")
      ->capture_default_str();
  gen->add_option("--out", cfg.out_path, "output network JSON")->required();
  gen->add_option("--constraints", cfg.constraints_path, "output constraint set JSON")->required();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (*run) cfg.command = Command::Run;
  else if (*check) cfg.command = Command::Check;
  else if (*div) cfg.command = Command::Divergence;
  else cfg.command = Command::Gen;

  try {
    switch (cfg.command) {
      case Command::Run: return cmd_run(cfg, out);
      case Command::Check: return cmd_check(cfg, out);
      case Command::Divergence: return cmd_divergence(cfg, out);
      case Command::Gen: return cmd_gen(cfg, out);
    }
  } catch (const Error& e) {
    err << "bnfit: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "bnfit: internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace bnfit::cli
