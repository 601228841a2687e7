#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bnfit/error.hpp"
#include "bnfit/network.hpp"
#include "bnfit/table.hpp"

namespace bnfit {

/// Target distribution R(y) over a subset Y of the network's variables.
struct Constraint {
  std::vector<VarId> scope;
  JointTable dist;
};

/// Validates scope and values against `net`. Values are in mixed-radix
/// order of `scope`, last variable fastest.
inline Constraint make_constraint(const NetworkSpec& net, std::vector<VarId> scope,
                                  std::vector<double> values) {
  if (scope.empty()) throw Error(ErrorKind::ScopeMismatch, "constraint scope is empty");
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (scope[i] >= net.size()) {
      throw Error(ErrorKind::UnknownVariable, "constraint names variable #" + std::to_string(scope[i]));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (scope[j] == scope[i]) {
        throw Error(ErrorKind::DuplicateVariable,
                    "constraint scope lists '" + net.name(scope[i]) + "' twice");
      }
    }
  }
  auto cards = net.cards_of(scope);
  if (values.size() != table_size(cards)) {
    throw Error(ErrorKind::Cardinality, "constraint over " + std::to_string(scope.size()) +
                                            " variables needs " + std::to_string(table_size(cards)) +
                                            " values, got " + std::to_string(values.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0)) {
      throw Error(ErrorKind::Normalization, "constraint value " + std::to_string(i) + " is negative");
    }
    s += values[i];
  }
  if (std::abs(s - 1.0) > kNormTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", s);
    throw Error(ErrorKind::Normalization, std::string("constraint values sum to ") + buf);
  }
  Constraint r;
  r.scope = scope;
  r.dist = JointTable(std::move(scope), std::move(cards), std::move(values));
  return r;
}

/// A constraint editable through a single CPT: the target plus some of its parents.
struct LocalClass {
  VarId target;
  std::vector<VarId> constrained_parents;
  bool operator==(const LocalClass&) const = default;
};

/// Any other constraint. `s` holds the parents of Y members that lie outside Y.
struct NonLocalClass {
  std::vector<VarId> y;
  std::vector<VarId> s;
  bool operator==(const NonLocalClass&) const = default;
};

using LocalityClass = std::variant<LocalClass, NonLocalClass>;

/// Default limit for dense joints, in binary-equivalent variables.
inline constexpr std::size_t kDenseCeiling = 25;

/// True when the full joint has at most 2^max_binary_vars entries.
inline bool fits_dense(const NetworkSpec& net, std::size_t max_binary_vars = kDenseCeiling) {
  const std::size_t limit = max_binary_vars >= 63 ? SIZE_MAX : std::size_t{1} << max_binary_vars;
  std::size_t total = 1;
  for (VarId v = 0; v < net.size(); ++v) {
    if (total > limit / net.card(v)) return false;
    total *= net.card(v);
  }
  return true;
}

inline void require_dense(const NetworkSpec& net, std::size_t max_binary_vars = kDenseCeiling) {
  if (!fits_dense(net, max_binary_vars)) {
    throw Error(ErrorKind::DenseCeiling, "the joint over " + std::to_string(net.size()) +
                                             " variables exceeds 2^" + std::to_string(max_binary_vars) +
                                             " entries");
  }
}

/// P(x) = prod_i P(x_i | pi_i) over all variables, in declaration order.
inline JointTable joint_from_cpts(const NetworkSpec& net, const std::vector<Cpt>& cpts) {
  const auto scope = net.all_variables();
  const auto cards = net.cards();
  std::vector<double> probs(table_size(cards), 1.0);
  for (const Cpt& cpt : cpts) {
    const auto& t = cpt.table();
    for_each_projected(scope, cards, cpt.scope(),
                       [&](std::size_t i, std::size_t j) { probs[i] *= t[j]; });
  }
  return JointTable(scope, cards, std::move(probs));
}

inline JointTable joint_from_network(const NetworkSpec& net) {
  return joint_from_cpts(net, net.cpts());
}

/// Sums q onto `target` (any order, subset of q.scope).
inline JointTable marginalize(const JointTable& q, const std::vector<VarId>& target) {
  std::vector<std::size_t> cards;
  cards.reserve(target.size());
  for (VarId v : target) cards.push_back(q.card_of(v));
  std::vector<double> out(table_size(cards), 0.0);
  for_each_projected(q.scope, q.cards, target,
                     [&](std::size_t i, std::size_t j) { out[j] += q.probs[i]; });
  return JointTable(target, std::move(cards), std::move(out));
}

/// Conditional table q(child | parents). Parent configurations with zero
/// probability get a uniform row.
inline Cpt extract_cpt(const JointTable& q, VarId child, const std::vector<VarId>& parents) {
  std::vector<VarId> scope = parents;
  scope.push_back(child);
  JointTable m = marginalize(q, scope);
  const std::size_t k = q.card_of(child);
  std::vector<std::size_t> parent_cards(m.cards.begin(), m.cards.end() - 1);
  const std::size_t rows = m.size() / k;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t x = 0; x < k; ++x) s += m.probs[r * k + x];
    for (std::size_t x = 0; x < k; ++x) {
      m.probs[r * k + x] = s > 0.0 ? m.probs[r * k + x] / s : 1.0 / static_cast<double>(k);
    }
  }
  return Cpt(child, k, parents, std::move(parent_cards), std::move(m.probs));
}

/// CPTs extracted from q according to the network's DAG.
inline std::vector<Cpt> extract_cpts(const JointTable& q, const NetworkSpec& net) {
  std::vector<Cpt> cpts;
  cpts.reserve(net.size());
  for (VarId v = 0; v < net.size(); ++v) cpts.push_back(extract_cpt(q, v, net.parents(v)));
  return cpts;
}

/// I(p || q) = sum_{p>0} p log(p/q), natural log; +inf unless p << q.
inline double i_divergence(const JointTable& p, const JointTable& q) {
  if (!p.same_scope(q)) throw Error(ErrorKind::ScopeMismatch, "divergence needs identical scopes");
  double d = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    const double a = p.probs[i];
    if (a <= 0.0) continue;
    const double b = q.probs[i];
    if (b <= 0.0) return std::numeric_limits<double>::infinity();
    d += a * std::log(a / b);
  }
  return std::max(d, 0.0);
}

inline void require_full_scope(const JointTable& q, const NetworkSpec& net) {
  if (q.scope != net.all_variables() || q.cards != net.cards()) {
    throw Error(ErrorKind::ScopeMismatch, "table scope is not the network's full variable list");
  }
}

/// Product of the CPTs extracted from q per the DAG.
inline JointTable structural_projection(const JointTable& q, const NetworkSpec& net) {
  require_full_scope(q, net);
  return joint_from_cpts(net, extract_cpts(q, net));
}

/// Largest entrywise gap between q and its structural projection.
inline double structural_residual(const JointTable& q, const NetworkSpec& net) {
  const JointTable proj = structural_projection(q, net);
  return max_abs_diff(q.probs, proj.probs);
}

inline bool is_structurally_consistent(const JointTable& q, const NetworkSpec& net, double tol) {
  return structural_residual(q, net) <= tol;
}

/// Largest entrywise gap between q's marginal on r.scope and r.
inline double constraint_residual(const JointTable& q, const Constraint& r) {
  const JointTable m = marginalize(q, r.scope);
  return max_abs_diff(m.probs, r.dist.probs);
}

/// Local when one scope member has every other member among its parents
/// (latest in topological order if several qualify); otherwise non-local.
inline LocalityClass classify_constraint(const NetworkSpec& net, const Constraint& r) {
  std::optional<VarId> target;
  for (VarId v : r.scope) {
    const auto& pa = net.parents(v);
    bool qualifies = std::all_of(r.scope.begin(), r.scope.end(), [&](VarId u) {
      return u == v || std::find(pa.begin(), pa.end(), u) != pa.end();
    });
    if (qualifies && (!target || net.topo_rank(v) > net.topo_rank(*target))) target = v;
  }
  if (target) {
    LocalClass local{*target, {}};
    for (VarId u : r.scope) {
      if (u != *target) local.constrained_parents.push_back(u);
    }
    return local;
  }
  NonLocalClass nl;
  nl.y = r.scope;
  std::vector<bool> in_s(net.size(), false);
  for (VarId v : r.scope) {
    for (VarId p : net.parents(v)) {
      if (std::find(r.scope.begin(), r.scope.end(), p) == r.scope.end()) in_s[p] = true;
    }
  }
  for (VarId v = 0; v < net.size(); ++v) {
    if (in_s[v]) nl.s.push_back(v);
  }
  return nl;
}

}  // namespace bnfit
