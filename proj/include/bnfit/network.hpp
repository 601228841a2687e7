#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bnfit/error.hpp"
#include "bnfit/table.hpp"

namespace bnfit {

struct VariableDecl {
  std::string name;
  std::size_t cardinality = 2;
  /// Optional state labels; empty, or exactly `cardinality` entries.
  std::vector<std::string> states;

  bool operator==(const VariableDecl&) const = default;
};

/// Conditional table P(child | parents). Rows are parent configurations in
/// mixed-radix order of `parents` (last parent fastest); the child state is
/// the fastest axis of the flat table.
class Cpt {
 public:
  Cpt() = default;
  Cpt(VarId child, std::size_t child_card, std::vector<VarId> parents,
      std::vector<std::size_t> parent_cards, std::vector<double> table)
      : child_(child),
        child_card_(child_card),
        parents_(std::move(parents)),
        parent_cards_(std::move(parent_cards)),
        table_(std::move(table)) {
    if (parents_.size() != parent_cards_.size()) {
      throw Error(ErrorKind::Cardinality, "parent and parent-cardinality lists differ in length");
    }
    if (table_.size() != rows() * child_card_) {
      throw Error(ErrorKind::Cardinality,
                  "CPT for variable #" + std::to_string(child_) + " has " +
                      std::to_string(table_.size()) + " entries, expected " +
                      std::to_string(rows() * child_card_));
    }
  }

  VarId child() const { return child_; }
  std::size_t child_card() const { return child_card_; }
  const std::vector<VarId>& parents() const { return parents_; }
  const std::vector<std::size_t>& parent_cards() const { return parent_cards_; }
  std::size_t rows() const { return table_size(parent_cards_); }

  std::span<const double> row(std::size_t r) const {
    return {table_.data() + r * child_card_, child_card_};
  }
  std::span<double> row(std::size_t r) { return {table_.data() + r * child_card_, child_card_}; }
  double at(std::size_t r, std::size_t state) const { return table_[r * child_card_ + state]; }

  const std::vector<double>& table() const { return table_; }
  std::vector<double>& table() { return table_; }

  /// (parents..., child): the scope whose mixed-radix order is the flat table order.
  std::vector<VarId> scope() const {
    auto s = parents_;
    s.push_back(child_);
    return s;
  }
  std::vector<std::size_t> scope_cards() const {
    auto c = parent_cards_;
    c.push_back(child_card_);
    return c;
  }

  bool operator==(const Cpt&) const = default;

 private:
  VarId child_ = 0;
  std::size_t child_card_ = 0;
  std::vector<VarId> parents_;
  std::vector<std::size_t> parent_cards_;
  std::vector<double> table_;
};

/// A discrete Bayesian network: variables, parent lists and one CPT per
/// variable. Instances are immutable and always valid.
class NetworkSpec {
 public:
  NetworkSpec() = default;

  /// Validates every structural and numeric invariant. CPT i must belong to
  /// variable i and use exactly `parents[i]` in that order.
  static NetworkSpec create(std::vector<VariableDecl> variables,
                            std::vector<std::vector<VarId>> parents, std::vector<Cpt> cpts) {
    NetworkSpec net;
    net.variables_ = std::move(variables);
    net.parents_ = std::move(parents);
    net.cpts_ = std::move(cpts);
    net.validate_structure();
    net.validate_cpts();
    return net;
  }

  /// Same variables and DAG with replacement CPTs (validated).
  NetworkSpec with_cpts(std::vector<Cpt> cpts) const {
    NetworkSpec net = *this;
    net.cpts_ = std::move(cpts);
    net.validate_cpts();
    return net;
  }

  std::size_t size() const { return variables_.size(); }
  const std::vector<VariableDecl>& variables() const { return variables_; }
  const VariableDecl& variable(VarId v) const { return variables_.at(v); }
  const std::string& name(VarId v) const { return variables_.at(v).name; }
  std::size_t card(VarId v) const { return variables_.at(v).cardinality; }
  const std::vector<VarId>& parents(VarId v) const { return parents_.at(v); }
  const Cpt& cpt(VarId v) const { return cpts_.at(v); }
  const std::vector<Cpt>& cpts() const { return cpts_; }
  const std::vector<VarId>& topological_order() const { return topo_; }
  /// Position of `v` in topological_order().
  std::size_t topo_rank(VarId v) const { return topo_rank_.at(v); }

  std::vector<VarId> all_variables() const {
    std::vector<VarId> ids(size());
    for (VarId v = 0; v < size(); ++v) ids[v] = v;
    return ids;
  }
  std::vector<std::size_t> cards() const {
    std::vector<std::size_t> c(size());
    for (VarId v = 0; v < size(); ++v) c[v] = variables_[v].cardinality;
    return c;
  }
  std::vector<std::size_t> cards_of(std::span<const VarId> vars) const {
    std::vector<std::size_t> c;
    c.reserve(vars.size());
    for (VarId v : vars) c.push_back(card(v));
    return c;
  }

  std::optional<VarId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  VarId id_of(const std::string& name) const {
    auto v = find(name);
    if (!v) throw Error(ErrorKind::UnknownVariable, "unknown variable '" + name + "'");
    return *v;
  }

  bool same_variables(const NetworkSpec& other) const { return variables_ == other.variables_; }

 private:
  void validate_structure() {
    const std::size_t n = variables_.size();
    index_.clear();
    for (VarId v = 0; v < n; ++v) {
      const auto& decl = variables_[v];
      if (decl.name.empty()) {
        throw Error(ErrorKind::Syntax, "variable #" + std::to_string(v) + " has an empty name");
      }
      if (decl.cardinality < 2) {
        throw Error(ErrorKind::Cardinality,
                    "variable '" + decl.name + "' has cardinality " +
                        std::to_string(decl.cardinality) + " (must be >= 2)");
      }
      if (!decl.states.empty() && decl.states.size() != decl.cardinality) {
        throw Error(ErrorKind::Cardinality, "variable '" + decl.name + "' lists " +
                                                std::to_string(decl.states.size()) +
                                                " state labels for cardinality " +
                                                std::to_string(decl.cardinality));
      }
      if (!index_.emplace(decl.name, v).second) {
        throw Error(ErrorKind::DuplicateVariable, "variable '" + decl.name + "' declared twice");
      }
    }
    if (parents_.size() != n) {
      throw Error(ErrorKind::InvalidArgument, "parent lists do not match the variable count");
    }
    for (VarId v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < parents_[v].size(); ++i) {
        VarId p = parents_[v][i];
        if (p >= n) {
          throw Error(ErrorKind::UnknownVariable,
                      "variable '" + variables_[v].name + "' names an undeclared parent");
        }
        if (p == v) throw Error(ErrorKind::Cycle, "variable '" + variables_[v].name + "' is its own parent");
        for (std::size_t j = 0; j < i; ++j) {
          if (parents_[v][j] == p) {
            throw Error(ErrorKind::DuplicateVariable, "variable '" + variables_[v].name +
                                                          "' lists parent '" + variables_[p].name +
                                                          "' twice");
          }
        }
      }
    }
    compute_topological_order();
  }

  // Kahn's algorithm, ties broken by declaration order.
  void compute_topological_order() {
    const std::size_t n = variables_.size();
    std::vector<std::size_t> indegree(n);
    std::vector<std::vector<VarId>> children(n);
    for (VarId v = 0; v < n; ++v) {
      indegree[v] = parents_[v].size();
      for (VarId p : parents_[v]) children[p].push_back(v);
    }
    topo_.clear();
    std::vector<bool> done(n, false);
    while (topo_.size() < n) {
      bool progressed = false;
      for (VarId v = 0; v < n; ++v) {
        if (!done[v] && indegree[v] == 0) {
          done[v] = true;
          topo_.push_back(v);
          for (VarId c : children[v]) --indegree[c];
          progressed = true;
          break;
        }
      }
      if (!progressed) throw Error(ErrorKind::Cycle, describe_cycle(done));
    }
    topo_rank_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) topo_rank_[topo_[i]] = i;
  }

  // Walks parent links among unresolved nodes until a node repeats.
  std::string describe_cycle(const std::vector<bool>& done) const {
    VarId start = 0;
    while (done[start]) ++start;
    std::vector<VarId> path;
    std::vector<int> seen(variables_.size(), -1);
    VarId cur = start;
    while (seen[cur] < 0) {
      seen[cur] = static_cast<int>(path.size());
      path.push_back(cur);
      for (VarId p : parents_[cur]) {
        if (!done[p]) {
          cur = p;
          break;
        }
      }
    }
    // path[seen[cur]..] walks child -> parent; report it parent -> child.
    std::string msg = "directed cycle ";
    std::vector<VarId> cycle(path.begin() + seen[cur], path.end());
    std::reverse(cycle.begin(), cycle.end());
    for (VarId v : cycle) msg += variables_[v].name + " -> ";
    msg += variables_[cycle.front()].name;
    return msg;
  }

  void validate_cpts() const {
    const std::size_t n = variables_.size();
    if (cpts_.size() != n) {
      throw Error(ErrorKind::InvalidArgument, "expected one CPT per variable");
    }
    for (VarId v = 0; v < n; ++v) {
      const Cpt& cpt = cpts_[v];
      const std::string& nm = variables_[v].name;
      if (cpt.child() != v || cpt.parents() != parents_[v] ||
          cpt.child_card() != variables_[v].cardinality ||
          cpt.parent_cards() != cards_of(parents_[v])) {
        throw Error(ErrorKind::Cardinality, "CPT axes for '" + nm + "' do not match its declaration");
      }
      for (std::size_t r = 0; r < cpt.rows(); ++r) {
        double s = 0.0;
        for (std::size_t x = 0; x < cpt.child_card(); ++x) {
          double p = cpt.at(r, x);
          if (!(p >= 0.0) || p > 1.0 + kNormTolerance) {
            throw Error(ErrorKind::Normalization, "CPT of '" + nm + "' row " + std::to_string(r) +
                                                      " has entry outside [0, 1]");
          }
          s += p;
        }
        if (std::abs(s - 1.0) > kNormTolerance) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.17g", s);
          throw Error(ErrorKind::Normalization,
                      "CPT of '" + nm + "' row " + std::to_string(r) + " sums to " + buf);
        }
      }
    }
  }

  std::vector<VariableDecl> variables_;
  std::vector<std::vector<VarId>> parents_;
  std::vector<Cpt> cpts_;
  std::vector<VarId> topo_;
  std::vector<std::size_t> topo_rank_;
  std::unordered_map<std::string, VarId> index_;
};

}  // namespace bnfit
