#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/error.hpp"
#include "bnfit/log.hpp"
#include "bnfit/run.hpp"

namespace bnfit {

namespace detail {

inline std::string describe_cell(const NetworkSpec* net, const std::vector<VarId>& scope,
                                 const std::vector<std::size_t>& states) {
  std::string s = "(";
  for (std::size_t d = 0; d < scope.size(); ++d) {
    if (d) s += ", ";
    s += net ? net->name(scope[d]) : "#" + std::to_string(scope[d]);
    s += "=" + std::to_string(states[d]);
  }
  return s + ")";
}

/// Per-cell factor r(y) / q(y); cells with q(y) = 0 get 0 when r(y) = 0
/// and raise a dominance error otherwise.
inline std::vector<double> fitting_ratios(const JointTable& current, const Constraint& r,
                                          const NetworkSpec* net, const std::string& label) {
  std::vector<double> ratio(current.size());
  for (std::size_t j = 0; j < ratio.size(); ++j) {
    const double target = r.dist.probs[j];
    const double have = current.probs[j];
    if (have > 0.0) {
      ratio[j] = target / have;
    } else if (target > 0.0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", target);
      throw Error(ErrorKind::Dominance,
                  label + " cell " + describe_cell(net, r.scope, r.dist.states_of(j)) +
                      " has target " + buf + " but the current marginal is 0");
    } else {
      ratio[j] = 0.0;
    }
  }
  return ratio;
}

inline JointTable ipfp_step(const JointTable& q, const Constraint& r, const NetworkSpec* net,
                            const std::string& label) {
  const JointTable m = marginalize(q, r.scope);
  const auto ratio = fitting_ratios(m, r, net, label);
  JointTable out = q;
  for_each_projected(q.scope, q.cards, r.scope,
                     [&](std::size_t i, std::size_t j) { out.probs[i] *= ratio[j]; });
  return out;
}

}  // namespace detail

/// One proportional-fitting step: q(x) * r(y) / q(y).
inline JointTable ipfp_step(const JointTable& q, const Constraint& r) {
  return detail::ipfp_step(q, r, nullptr, "constraint");
}

namespace detail {

inline std::pair<JointTable, RunReport> run_dense(const NetworkSpec& net,
                                                  const std::vector<Constraint>& rs,
                                                  const StopPolicy& stop, const Schedule& sched,
                                                  bool structural) {
  stop.validate();
  sched.validate(rs.size());
  require_dense(net);
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.algorithm = structural ? Algorithm::EIpfp : Algorithm::Ipfp;

  const JointTable q0 = joint_from_network(net);
  report.max_table_entries = q0.size();
  JointTable q = q0;
  auto finish = [&](Termination t) {
    report.termination = t;
    report.per_constraint_residuals.clear();
    for (const auto& r : rs) report.per_constraint_residuals.push_back(constraint_residual(q, r));
    if (!structural) report.structural_residual = structural_residual(q, net);
    report.wall_time = std::chrono::steady_clock::now() - t0;
    report.final_divergence = i_divergence(q, q0);
    return std::make_pair(q, report);
  };

  if (rs.empty()) return finish(Termination::Converged);

  ConvergenceMonitor monitor(stop);
  for (std::size_t cycle = 1;; ++cycle) {
    JointTable prev = q;
    for (std::size_t i : sched.constraint_order) {
      q = ipfp_step(q, rs[i], &net, "constraint " + std::to_string(i));
    }
    if (structural) {
      JointTable projected = structural_projection(q, net);
      report.structural_residual = max_abs_diff(q.probs, projected.probs);
      q = std::move(projected);
    }
    const double adj = renormalize(q.probs);
    report.max_renormalization = std::max(report.max_renormalization, adj);
    if (adj > 1e-12) log::info("cycle %zu renormalized joint by %.3e", cycle, adj);

    report.cycles = cycle;
    double max_res = report.structural_residual;
    for (const auto& r : rs) max_res = std::max(max_res, constraint_residual(q, r));
    const double delta = max_abs_diff(q.probs, prev.probs);
    if (auto t = monitor.observe(cycle, delta, max_res)) return finish(*t);
  }
}

}  // namespace detail

/// Standard iterative proportional fitting on the dense joint. With
/// `sched.include_structural` the structural re-projection is appended to
/// each cycle, which makes this the dense E-IPFP iteration.
inline std::pair<JointTable, RunReport> run_ipfp(const NetworkSpec& net,
                                                 const std::vector<Constraint>& rs,
                                                 const StopPolicy& stop, const Schedule& sched) {
  return detail::run_dense(net, rs, stop, sched, sched.include_structural);
}

/// E-IPFP: IPFP with the structural constraint as the last step of every
/// cycle. Returns the network with the same DAG and the CPTs extracted from
/// the converged joint.
inline std::pair<NetworkSpec, RunReport> run_e_ipfp(const NetworkSpec& net,
                                                    const std::vector<Constraint>& rs,
                                                    const StopPolicy& stop, const Schedule& sched) {
  auto [q, report] = detail::run_dense(net, rs, stop, sched, true);
  if (rs.empty()) return {net, report};
  NetworkSpec out = net.with_cpts(extract_cpts(q, net));
  // Report against the returned network itself so the numbers match what a
  // reader of the output file would measure.
  const JointTable joint = joint_from_network(out);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    report.per_constraint_residuals[i] = constraint_residual(joint, rs[i]);
  }
  report.final_divergence = i_divergence(joint, joint_from_network(net));
  return {std::move(out), report};
}

}  // namespace bnfit
