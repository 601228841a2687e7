#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/elimination.hpp"
#include "bnfit/network.hpp"

namespace bnfit {

struct GeneratorOptions {
  std::size_t nodes = 15;
  std::size_t constraints = 8;
  std::size_t max_in_degree = 3;
  std::size_t max_scope = 3;
  /// Cap on |Y u S| for non-local constraints.
  std::size_t max_subnet = 8;
  /// Spread of the log-scale CPT perturbation that produces the target.
  double perturbation = 1.0;
  /// Reject constraints whose edited CPTs feed into another constraint's
  /// scope (or the reverse). Each constraint is then satisfiable on its own
  /// edits whatever the others converge to.
  bool decoupled = true;
};

struct GeneratedInstance {
  NetworkSpec network;
  std::vector<Constraint> constraints;
};

namespace detail {

// Bit-level recipe on top of mt19937_64 (whose output is fixed by the
// standard) so instances are identical across standard libraries.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<double> random_rows(PortableRng& rng, std::size_t rows, std::size_t k) {
  std::vector<double> t(rows * k);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t x = 0; x < k; ++x) s += t[r * k + x] = 0.1 + 0.8 * rng.uniform();
    for (std::size_t x = 0; x < k; ++x) t[r * k + x] /= s;
  }
  return t;
}

}  // namespace detail

/// Random DAG over binary variables X0..X(n-1) (declaration order is
/// topological) plus a mix of local and non-local constraints. Constraint
/// values are marginals of a second network with the same DAG and
/// perturbed CPTs, so the set is always jointly satisfiable by a network of
/// this structure. Deterministic per seed.
inline GeneratedInstance generate_instance(std::uint64_t seed, const GeneratorOptions& opts = {}) {
  detail::PortableRng rng(seed);
  const std::size_t n = std::max<std::size_t>(opts.nodes, 2);

  std::vector<VariableDecl> vars;
  std::vector<std::vector<VarId>> parents(n);
  for (VarId v = 0; v < n; ++v) {
    vars.push_back({"X" + std::to_string(v), 2, {}});
    const std::size_t k = rng.below(std::min(opts.max_in_degree, v) + 1);
    std::vector<VarId> pool(v);
    for (VarId u = 0; u < v; ++u) pool[u] = u;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t pick = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[pick]);
      parents[v].push_back(pool[i]);
    }
    std::sort(parents[v].begin(), parents[v].end());
  }

  std::vector<Cpt> cpts;
  for (VarId v = 0; v < n; ++v) {
    std::vector<std::size_t> pc(parents[v].size(), 2);
    cpts.emplace_back(v, 2, parents[v], pc, detail::random_rows(rng, table_size(pc), 2));
  }
  const NetworkSpec net = NetworkSpec::create(vars, parents, std::move(cpts));

  auto subnet_size = [&](const std::vector<VarId>& scope) {
    std::vector<bool> mark(n, false);
    for (VarId v : scope) {
      mark[v] = true;
      for (VarId p : parents[v]) mark[p] = true;
    }
    return static_cast<std::size_t>(std::count(mark.begin(), mark.end(), true));
  };
  auto is_local = [&](const std::vector<VarId>& scope) {
    Constraint probe;
    probe.scope = scope;
    return std::holds_alternative<LocalClass>(classify_constraint(net, probe));
  };

  // CPTs the decomposed solver edits for a scope, and the CPTs its marginal
  // depends on (the scope's ancestral closure).
  auto edit_set = [&](const std::vector<VarId>& scope) {
    std::vector<bool> mark(n, false);
    Constraint probe;
    probe.scope = scope;
    const auto cls = classify_constraint(net, probe);
    if (const auto* loc = std::get_if<LocalClass>(&cls)) {
      mark[loc->target] = true;
    } else {
      for (VarId v : scope) mark[v] = true;
    }
    return mark;
  };
  auto ancestral = [&](const std::vector<VarId>& scope) {
    std::vector<bool> mark(n, false);
    std::vector<VarId> stack(scope.begin(), scope.end());
    while (!stack.empty()) {
      VarId v = stack.back();
      stack.pop_back();
      if (mark[v]) continue;
      mark[v] = true;
      for (VarId p : parents[v]) stack.push_back(p);
    }
    return mark;
  };
  auto disjoint = [](const std::vector<bool>& a, const std::vector<bool>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] && b[i]) return false;
    }
    return true;
  };

  std::vector<std::vector<VarId>> scopes;
  std::vector<std::vector<bool>> edits, closures;
  const std::size_t max_scope = std::clamp<std::size_t>(opts.max_scope, 1, n);
  for (std::size_t c = 0; c < opts.constraints; ++c) {
    const bool want_local = c % 2 == 0;
    for (int attempt = 0; attempt < 4000; ++attempt) {
      std::vector<VarId> scope;
      const VarId v = rng.below(n);
      scope.push_back(v);
      if (want_local || attempt >= 2000) {
        // A variable plus some of its parents.
        for (VarId p : parents[v]) {
          if (scope.size() < max_scope && rng.uniform() < 0.5) scope.push_back(p);
        }
      } else {
        // Parent chain: each added member is a parent of the previous one.
        const std::size_t size = std::max<std::size_t>(3, max_scope);
        while (scope.size() < size) {
          const auto& pa = parents[scope.back()];
          if (pa.empty()) break;
          scope.push_back(pa[rng.below(pa.size())]);
        }
        if (scope.size() < 2 || is_local(scope)) continue;
      }
      if (subnet_size(scope) > opts.max_subnet) continue;
      std::sort(scope.begin(), scope.end());
      auto e = edit_set(scope);
      auto a = ancestral(scope);
      bool ok = true;
      for (std::size_t k = 0; k < scopes.size() && ok; ++k) {
        // A single-variable constraint is reachable through its own CPT
        // whatever happens upstream, so only the other direction matters.
        const bool shields_new = scope.size() == 1 || disjoint(edits[k], a);
        const bool shields_old = scopes[k].size() == 1 || disjoint(e, closures[k]);
        ok = scopes[k] != scope && (!opts.decoupled || (shields_new && shields_old));
      }
      if (!ok) continue;
      scopes.push_back(std::move(scope));
      edits.push_back(std::move(e));
      closures.push_back(std::move(a));
      break;
    }
  }

  // The target differs from the network only in CPTs that the decomposed
  // solver edits for these constraints: the target of each local constraint
  // and every member of each non-local scope.
  std::vector<bool> editable(n, false);
  for (const auto& e : edits) {
    for (VarId v = 0; v < n; ++v) editable[v] = editable[v] || e[v];
  }
  std::vector<Cpt> target_cpts = net.cpts();
  for (VarId v = 0; v < n; ++v) {
    if (!editable[v]) continue;
    auto& t = target_cpts[v].table();
    for (std::size_t r = 0; r < t.size() / 2; ++r) {
      double s = 0.0;
      for (std::size_t x = 0; x < 2; ++x) {
        s += t[r * 2 + x] *= std::exp(opts.perturbation * (2.0 * rng.uniform() - 1.0));
      }
      for (std::size_t x = 0; x < 2; ++x) t[r * 2 + x] /= s;
    }
  }
  const NetworkSpec target = net.with_cpts(std::move(target_cpts));

  GeneratedInstance inst{net, {}};
  for (const auto& scope : scopes) {
    JointTable m = marginal_by_elimination(target, scope);
    double s = m.sum();
    for (double& p : m.probs) p /= s;
    inst.constraints.push_back(make_constraint(net, scope, std::move(m.probs)));
  }
  return inst;
}

}  // namespace bnfit
