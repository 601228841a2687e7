#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/network.hpp"

namespace fixtures {

using bnfit::Cpt;
using bnfit::NetworkSpec;
using bnfit::VarId;
using bnfit::VariableDecl;

/// Builds a network from names, parent lists and flat CPTs (all binary unless
/// `cards` says otherwise).
inline NetworkSpec make_net(const std::vector<std::string>& names,
                            const std::vector<std::vector<VarId>>& parents,
                            const std::vector<std::vector<double>>& tables,
                            std::vector<std::size_t> cards = {}) {
  if (cards.empty()) cards.assign(names.size(), 2);
  std::vector<VariableDecl> vars;
  std::vector<Cpt> cpts;
  for (VarId v = 0; v < names.size(); ++v) {
    vars.push_back({names[v], cards[v], {}});
    std::vector<std::size_t> pc;
    for (VarId p : parents[v]) pc.push_back(cards[p]);
    cpts.emplace_back(v, cards[v], parents[v], pc, tables[v]);
  }
  return NetworkSpec::create(vars, parents, cpts);
}

/// A -> B, P(A=1)=0.5, P(B=1|A=1)=0.8, P(B=1|A=0)=0.2.
inline NetworkSpec chain() {
  return make_net({"A", "B"}, {{}, {0}}, {{0.5, 0.5}, {0.8, 0.2, 0.2, 0.8}});
}

/// Diamond A -> B, A -> C, (B, C) -> D with P(A=1)=0.4 and
/// P(D=0|B=1,C=1)=0.9.
inline NetworkSpec diamond() {
  return make_net({"A", "B", "C", "D"}, {{}, {0}, {0}, {1, 2}},
                  {{0.6, 0.4},
                   {0.8, 0.2, 0.3, 0.7},
                   {0.7, 0.3, 0.4, 0.6},
                   {0.9, 0.1, 0.5, 0.5, 0.4, 0.6, 0.9, 0.1}});
}

/// Constraint on (A, D) used with diamond().
inline bnfit::Constraint diamond_ad(const NetworkSpec& net) {
  return bnfit::make_constraint(net, {0, 3}, {0.4686, 0.1314, 0.2132, 0.1868});
}

inline std::vector<double> random_rows(std::mt19937_64& rng, std::size_t rows, std::size_t k,
                                       double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> t(rows * k);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t x = 0; x < k; ++x) s += t[r * k + x] = u(rng);
    for (std::size_t x = 0; x < k; ++x) t[r * k + x] /= s;
  }
  return t;
}

/// Random DAG in declaration order (parents have smaller ids), cardinality
/// in [2, max_card], at most `max_parents` parents.
inline NetworkSpec random_net(std::uint64_t seed, std::size_t n, std::size_t max_card = 2,
                              std::size_t max_parents = 3) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> names;
  std::vector<std::size_t> cards;
  std::vector<std::vector<VarId>> parents(n);
  std::vector<std::vector<double>> tables;
  for (VarId v = 0; v < n; ++v) {
    names.push_back("V" + std::to_string(v));
    cards.push_back(2 + rng() % (max_card - 1));
    std::vector<VarId> pool(v);
    for (VarId u = 0; u < v; ++u) pool[u] = u;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = std::min<std::size_t>(pool.size(), rng() % (max_parents + 1));
    parents[v].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::size_t rows = 1;
    for (VarId p : parents[v]) rows *= cards[p];
    tables.push_back(random_rows(rng, rows, cards[v]));
  }
  return make_net(names, parents, tables, cards);
}

/// Marginal of `net` on `scope` as a constraint (always satisfiable).
inline bnfit::Constraint marginal_constraint(const NetworkSpec& net, const std::vector<VarId>& scope) {
  auto m = bnfit::marginalize(bnfit::joint_from_network(net), scope);
  return bnfit::make_constraint(net, scope, m.probs);
}

}  // namespace fixtures
