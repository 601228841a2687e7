#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/dense_solver.hpp"
#include "bnfit/elimination.hpp"
#include "bnfit/error.hpp"
#include "bnfit/log.hpp"
#include "bnfit/run.hpp"

namespace bnfit {

/// Conditional table Q'(y | s) = prod_{X_j in Y} Q(x_j | pi_j), where S
/// holds the parents of Y members that lie outside Y. Rows are
/// s-configurations, y is the fast axis.
///
/// Together with the untouched CPTs outside Y this is only a change of
/// representation: Q(x) = Q'(y | s) * prod_{X_l not in Y} Q(x_l | pi_l).
struct LocalSubnet {
  std::vector<VarId> y;
  std::vector<VarId> s;
  std::vector<std::size_t> y_cards;
  std::vector<std::size_t> s_cards;
  std::vector<double> cond;

  std::size_t y_size() const { return table_size(y_cards); }
  std::size_t s_size() const { return table_size(s_cards); }

  std::vector<VarId> scope() const {
    auto sc = s;
    sc.insert(sc.end(), y.begin(), y.end());
    return sc;
  }
  std::vector<std::size_t> scope_cards() const {
    auto c = s_cards;
    c.insert(c.end(), y_cards.begin(), y_cards.end());
    return c;
  }
};

/// Parents of Y members outside Y, in declaration order.
inline std::vector<VarId> outside_parents(const NetworkSpec& net, const std::vector<VarId>& y) {
  std::vector<bool> in_y(net.size(), false), in_s(net.size(), false);
  for (VarId v : y) in_y.at(v) = true;
  for (VarId v : y) {
    for (VarId p : net.parents(v)) {
      if (!in_y[p]) in_s[p] = true;
    }
  }
  std::vector<VarId> s;
  for (VarId v = 0; v < net.size(); ++v) {
    if (in_s[v]) s.push_back(v);
  }
  return s;
}

/// Subnet over `y` using CPT values from `cpts` (indexed by variable).
inline LocalSubnet build_local_subnet(const NetworkSpec& net, const std::vector<Cpt>& cpts,
                                      const std::vector<VarId>& y) {
  if (y.empty()) throw Error(ErrorKind::ScopeMismatch, "subnet needs a nonempty Y");
  LocalSubnet sub;
  sub.y = y;
  sub.s = outside_parents(net, y);
  sub.y_cards = net.cards_of(sub.y);
  sub.s_cards = net.cards_of(sub.s);
  const auto scope = sub.scope();
  const auto cards = sub.scope_cards();
  sub.cond.assign(table_size(cards), 1.0);
  for (VarId v : y) {
    const auto& t = cpts[v].table();
    for_each_projected(scope, cards, cpts[v].scope(),
                       [&](std::size_t i, std::size_t j) { sub.cond[i] *= t[j]; });
  }
  return sub;
}

inline LocalSubnet build_local_subnet(const NetworkSpec& net, const std::vector<VarId>& y) {
  return build_local_subnet(net, net.cpts(), y);
}

/// Replaces every row of `sub` whose S-configuration has positive
/// probability with the conditional joint(s, y) / q_s(s) of the network's
/// marginal on (S..., Y...). When no S member descends from a Y member this
/// is the CPT product already in `sub`; otherwise the product ignores the
/// dependence of S on Y and the conditional is needed for the fitted
/// marginal to match the network's.
inline LocalSubnet condition_subnet(LocalSubnet sub, const JointTable& joint_sy, const JointTable& q_s) {
  if (joint_sy.scope != sub.scope() || q_s.scope != sub.s) {
    throw Error(ErrorKind::ScopeMismatch, "marginal scopes do not match the subnet");
  }
  const std::size_t ny = sub.y_size();
  for (std::size_t row = 0; row < sub.s_size(); ++row) {
    const double w = q_s.probs[row];
    if (w <= 0.0) continue;
    for (std::size_t j = 0; j < ny; ++j) sub.cond[row * ny + j] = joint_sy.probs[row * ny + j] / w;
  }
  return sub;
}

/// Local-constraint rule: scale P(x_j | pi_j) by r(y) / Q(y) and renormalize
/// each row (the alpha factor). `current` is the network's marginal on
/// r.scope before the update.
inline Cpt local_update(const Cpt& cpt, const Constraint& r, const JointTable& current,
                        const NetworkSpec* net = nullptr) {
  if (current.scope != r.scope) {
    throw Error(ErrorKind::ScopeMismatch, "marginal scope differs from the constraint scope");
  }
  const auto ratio = detail::fitting_ratios(current, r, net, "local constraint");
  Cpt out = cpt;
  auto& t = out.table();
  for_each_projected(cpt.scope(), cpt.scope_cards(), r.scope,
                     [&](std::size_t i, std::size_t j) { t[i] *= ratio[j]; });
  const std::size_t k = cpt.child_card();
  for (std::size_t row = 0; row < out.rows(); ++row) {
    auto cells = out.row(row);
    double alpha = 0.0;
    for (double v : cells) alpha += v;
    for (double& v : cells) v = alpha > 0.0 ? v / alpha : 1.0 / static_cast<double>(k);
  }
  return out;
}

/// Local update of `cpt` against the marginal of `net` (computed by
/// variable elimination). `cpt` must be the CPT of the constraint's target.
inline Cpt local_update(const Cpt& cpt, const Constraint& r, const NetworkSpec& net) {
  const auto cls = classify_constraint(net, r);
  const auto* local = std::get_if<LocalClass>(&cls);
  if (local == nullptr || local->target != cpt.child()) {
    throw Error(ErrorKind::InvalidArgument,
                "constraint is not local to the CPT of '" + net.name(cpt.child()) + "'");
  }
  return local_update(cpt, r, marginal_by_elimination(net, r.scope), &net);
}

/// Non-local rule on the subnet table: Q'(y|s) * r(y) / Q(y), renormalized
/// over y for every s. `current` is the network's marginal on Y.
inline LocalSubnet nonlocal_update(const LocalSubnet& sub, const Constraint& r,
                                   const JointTable& current, const NetworkSpec* net = nullptr) {
  if (r.scope != sub.y || current.scope != sub.y) {
    throw Error(ErrorKind::ScopeMismatch, "constraint, marginal and subnet must share the Y order");
  }
  const auto ratio = detail::fitting_ratios(current, r, net, "non-local constraint");
  LocalSubnet out = sub;
  const std::size_t ny = sub.y_size();
  for (std::size_t row = 0; row < sub.s_size(); ++row) {
    double* cells = out.cond.data() + row * ny;
    double alpha = 0.0;
    for (std::size_t j = 0; j < ny; ++j) {
      cells[j] *= ratio[j];
      alpha += cells[j];
    }
    for (std::size_t j = 0; j < ny; ++j) {
      cells[j] = alpha > 0.0 ? cells[j] / alpha : 1.0 / static_cast<double>(ny);
    }
  }
  return out;
}

/// CPTs of the Y members recovered from the subnet. Each X_j is conditioned
/// on its parents within Q'(y|s) * q_s(s); `q_s` is the current marginal on
/// S in the subnet's S order. Returned in Y order.
inline std::vector<Cpt> extract_subnet_cpts(const LocalSubnet& sub, const NetworkSpec& net,
                                            const JointTable& q_s) {
  if (q_s.scope != sub.s) throw Error(ErrorKind::ScopeMismatch, "S marginal does not match the subnet");
  const std::size_t ny = sub.y_size();
  std::vector<double> weighted(sub.cond.size());
  for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] = sub.cond[i] * q_s.probs[i / ny];
  const JointTable joint(sub.scope(), sub.scope_cards(), std::move(weighted));
  std::vector<Cpt> cpts;
  cpts.reserve(sub.y.size());
  for (VarId v : sub.y) cpts.push_back(extract_cpt(joint, v, net.parents(v)));
  return cpts;
}

struct DecomposedOptions {
  /// Largest |Y u S| (or 1 + |parents| for a local constraint) accepted.
  std::size_t subnet_budget = 20;
  /// Inner-loop tolerance on the subnet table; 0 means stop.epsilon.
  double inner_epsilon = 0.0;
  std::size_t inner_max_iterations = 1000;
  /// Dense reporting (divergence, structural residual) only up to this many
  /// binary-equivalent variables.
  std::size_t dense_ceiling = kDenseCeiling;
};

namespace detail {

struct PreparedConstraint {
  LocalityClass cls;
  MarginalPlan on_y;   // marginal on r.scope
  MarginalPlan on_sy;  // non-local only: marginal on (S..., Y...)
  std::size_t subnet_vars = 0;
};

inline double max_cpt_change(const std::vector<Cpt>& a, const std::vector<Cpt>& b) {
  double m = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) m = std::max(m, max_abs_diff(a[v].table(), b[v].table()));
  return m;
}

}  // namespace detail

/// D-IPFP: each local constraint edits one CPT; each non-local constraint
/// runs an inner fitting loop on its subnet and writes back the CPTs of Y.
/// Marginals come from variable elimination, so no table over the whole
/// network is built during the iteration.
inline std::pair<NetworkSpec, RunReport> run_d_ipfp(const NetworkSpec& net,
                                                    const std::vector<Constraint>& rs,
                                                    const StopPolicy& stop, const Schedule& sched,
                                                    const DecomposedOptions& opts = {}) {
  stop.validate();
  sched.validate(rs.size());
  const double inner_eps = opts.inner_epsilon > 0.0 ? opts.inner_epsilon : stop.epsilon;

  std::vector<detail::PreparedConstraint> prep;
  prep.reserve(rs.size());
  RunReport report;
  report.algorithm = Algorithm::DIpfp;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    detail::PreparedConstraint pc{classify_constraint(net, rs[i]), MarginalPlan(net, rs[i].scope), {}, 0};
    if (const auto* loc = std::get_if<LocalClass>(&pc.cls)) {
      pc.subnet_vars = 1 + net.parents(loc->target).size();
      report.max_table_entries = std::max(report.max_table_entries, net.cpt(loc->target).table().size());
    } else {
      const auto& nl = std::get<NonLocalClass>(pc.cls);
      pc.subnet_vars = nl.y.size() + nl.s.size();
      if (pc.subnet_vars <= opts.subnet_budget) {
        auto sy = nl.s;
        sy.insert(sy.end(), nl.y.begin(), nl.y.end());
        pc.on_sy = MarginalPlan(net, sy);
        report.max_table_entries = std::max(report.max_table_entries, table_size(net.cards_of(sy)));
        report.max_marginal_entries = std::max(report.max_marginal_entries, pc.on_sy.max_entries());
      }
    }
    if (pc.subnet_vars > opts.subnet_budget) {
      throw Error(ErrorKind::SubnetBudget, "constraint " + std::to_string(i) + " needs a subnet of " +
                                               std::to_string(pc.subnet_vars) +
                                               " variables (budget " +
                                               std::to_string(opts.subnet_budget) + ")");
    }
    report.max_marginal_entries = std::max(report.max_marginal_entries, pc.on_y.max_entries());
    prep.push_back(std::move(pc));
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Cpt> cpts = net.cpts();

  auto residuals = [&]() {
    std::vector<double> res;
    res.reserve(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
      res.push_back(max_abs_diff(prep[i].on_y.evaluate(cpts).probs, rs[i].dist.probs));
    }
    return res;
  };

  auto apply = [&](std::size_t i) {
    const Constraint& r = rs[i];
    const auto label = "constraint " + std::to_string(i);
    if (const auto* loc = std::get_if<LocalClass>(&prep[i].cls)) {
      cpts[loc->target] = local_update(cpts[loc->target], r, prep[i].on_y.evaluate(cpts), &net);
      return;
    }
    const auto& nl = std::get<NonLocalClass>(prep[i].cls);
    for (std::size_t it = 0; it < opts.inner_max_iterations; ++it) {
      ++report.inner_iterations;
      const JointTable joint_sy = prep[i].on_sy.evaluate(cpts);
      const JointTable q_y = marginalize(joint_sy, nl.y);
      const JointTable q_s = marginalize(joint_sy, nl.s);
      const LocalSubnet sub = condition_subnet(build_local_subnet(net, cpts, nl.y), joint_sy, q_s);
      const LocalSubnet fitted = nonlocal_update(sub, r, q_y, &net);
      auto fresh = extract_subnet_cpts(fitted, net, q_s);
      for (std::size_t k = 0; k < nl.y.size(); ++k) cpts[nl.y[k]] = std::move(fresh[k]);
      if (max_abs_diff(fitted.cond, sub.cond) <= inner_eps) return;
    }
    log::info("%s: inner loop hit %zu iterations", label.c_str(), opts.inner_max_iterations);
  };

  auto finish = [&](Termination t) {
    report.termination = t;
    report.per_constraint_residuals = residuals();
    report.wall_time = std::chrono::steady_clock::now() - t0;
    NetworkSpec out = net.with_cpts(cpts);
    if (fits_dense(net, opts.dense_ceiling)) {
      const JointTable joint = joint_from_network(out);
      report.final_divergence = i_divergence(joint, joint_from_network(net));
      report.structural_residual = structural_residual(joint, net);
    } else {
      log::info("%zu variables exceed the dense ceiling; divergence omitted", net.size());
    }
    return std::make_pair(std::move(out), report);
  };

  if (rs.empty()) return finish(Termination::Converged);

  ConvergenceMonitor monitor(stop);
  for (std::size_t cycle = 1;; ++cycle) {
    const std::vector<Cpt> prev = cpts;
    for (std::size_t i : sched.constraint_order) apply(i);
    report.cycles = cycle;
    const double delta = detail::max_cpt_change(cpts, prev);
    double max_res = 0.0;
    for (double r : residuals()) max_res = std::max(max_res, r);
    if (auto t = monitor.observe(cycle, delta, max_res)) return finish(*t);
  }
}

}  // namespace bnfit
