#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/network.hpp"
#include "bnfit/table.hpp"

namespace bnfit {

/// Variable-elimination schedule for the marginal of a fixed query set.
///
/// Only the query's ancestral closure is kept (every other CPT sums out to
/// one). The elimination order and all index maps are computed once at
/// construction, so evaluate() is a fixed sequence of multiply-accumulate
/// passes over small tables and never touches a table over the full network.
class MarginalPlan {
 public:
  MarginalPlan() = default;

  MarginalPlan(const NetworkSpec& net, std::vector<VarId> query) : query_(std::move(query)) {
    const std::size_t n = net.size();
    std::vector<bool> keep(n, false);
    std::vector<VarId> stack(query_.begin(), query_.end());
    while (!stack.empty()) {
      VarId v = stack.back();
      stack.pop_back();
      if (keep.at(v)) continue;
      keep[v] = true;
      for (VarId p : net.parents(v)) stack.push_back(p);
    }

    // Factor slots: CPTs first, then products created by elimination steps.
    std::vector<std::vector<VarId>> scopes;
    std::vector<bool> live;
    for (VarId v = 0; v < n; ++v) {
      if (!keep[v]) continue;
      cpt_of_slot_.push_back(v);
      scopes.push_back(net.cpt(v).scope());
      live.push_back(true);
    }

    std::vector<bool> in_query(n, false);
    for (VarId v : query_) in_query[v] = true;
    std::vector<VarId> to_eliminate;
    for (VarId v = 0; v < n; ++v) {
      if (keep[v] && !in_query[v]) to_eliminate.push_back(v);
    }

    auto contains = [](const std::vector<VarId>& s, VarId v) {
      return std::find(s.begin(), s.end(), v) != s.end();
    };
    auto union_scope = [&](VarId v) {
      std::vector<VarId> u;
      for (std::size_t k = 0; k < scopes.size(); ++k) {
        if (!live[k] || !contains(scopes[k], v)) continue;
        for (VarId w : scopes[k]) {
          if (!contains(u, w)) u.push_back(w);
        }
      }
      std::sort(u.begin(), u.end());
      return u;
    };

    // Greedy: eliminate the variable whose combined factor is smallest.
    while (!to_eliminate.empty()) {
      std::size_t best = 0;
      std::size_t best_size = std::numeric_limits<std::size_t>::max();
      for (std::size_t c = 0; c < to_eliminate.size(); ++c) {
        std::size_t sz = table_size(net.cards_of(union_scope(to_eliminate[c])));
        if (sz < best_size) {
          best_size = sz;
          best = c;
        }
      }
      VarId v = to_eliminate[best];
      to_eliminate.erase(to_eliminate.begin() + static_cast<std::ptrdiff_t>(best));

      Step step;
      step.scope = union_scope(v);
      const auto cards = net.cards_of(step.scope);
      for (std::size_t k = 0; k < scopes.size(); ++k) {
        if (live[k] && contains(scopes[k], v)) {
          step.inputs.push_back(k);
          step.input_maps.push_back(compact_map(step.scope, cards, scopes[k]));
          live[k] = false;
        }
      }
      std::vector<VarId> out_scope;
      for (VarId w : step.scope) {
        if (w != v) out_scope.push_back(w);
      }
      step.output_map = compact_map(step.scope, cards, out_scope);
      step.output_size = table_size(net.cards_of(out_scope));
      max_entries_ = std::max(max_entries_, table_size(cards));
      scopes.push_back(out_scope);
      live.push_back(true);
      steps_.push_back(std::move(step));
    }

    // Final product onto the query in the requested order.
    final_.scope = query_;
    const auto qcards = net.cards_of(query_);
    for (std::size_t k = 0; k < scopes.size(); ++k) {
      if (!live[k]) continue;
      final_.inputs.push_back(k);
      final_.input_maps.push_back(compact_map(query_, qcards, scopes[k]));
    }
    final_.output_size = table_size(qcards);
    max_entries_ = std::max(max_entries_, final_.output_size);
    query_cards_ = qcards;
    slot_count_ = scopes.size();
  }

  const std::vector<VarId>& query() const { return query_; }

  /// Largest intermediate table the plan creates.
  std::size_t max_entries() const { return max_entries_; }

  /// Marginal over the query, with CPT values taken from `cpts`.
  JointTable evaluate(const std::vector<Cpt>& cpts) const {
    std::vector<const double*> slot(slot_count_, nullptr);
    std::vector<std::vector<double>> owned(steps_.size());
    for (std::size_t k = 0; k < cpt_of_slot_.size(); ++k) slot[k] = cpts[cpt_of_slot_[k]].table().data();

    std::size_t next = cpt_of_slot_.size();
    for (std::size_t s = 0; s < steps_.size(); ++s) {
      const Step& step = steps_[s];
      owned[s].assign(step.output_size, 0.0);
      double* out = owned[s].data();
      const std::size_t total = step.output_map.size();
      for (std::size_t i = 0; i < total; ++i) {
        double p = 1.0;
        for (std::size_t k = 0; k < step.inputs.size(); ++k) p *= slot[step.inputs[k]][step.input_maps[k][i]];
        out[step.output_map[i]] += p;
      }
      slot[next++] = out;
    }

    std::vector<double> probs(final_.output_size, 1.0);
    for (std::size_t k = 0; k < final_.inputs.size(); ++k) {
      const double* in = slot[final_.inputs[k]];
      const auto& map = final_.input_maps[k];
      for (std::size_t i = 0; i < probs.size(); ++i) probs[i] *= in[map[i]];
    }
    return JointTable(query_, query_cards_, std::move(probs));
  }

 private:
  using Map = std::vector<std::uint32_t>;

  struct Step {
    std::vector<VarId> scope;
    std::vector<std::size_t> inputs;
    std::vector<Map> input_maps;
    Map output_map;
    std::size_t output_size = 0;
  };

  static Map compact_map(const std::vector<VarId>& scope, const std::vector<std::size_t>& cards,
                         const std::vector<VarId>& sub) {
    Map m(table_size(cards));
    for_each_projected(scope, cards, sub,
                       [&](std::size_t i, std::size_t j) { m[i] = static_cast<std::uint32_t>(j); });
    return m;
  }

  std::vector<VarId> query_;
  std::vector<std::size_t> query_cards_;
  std::vector<VarId> cpt_of_slot_;
  std::vector<Step> steps_;
  Step final_;
  std::size_t slot_count_ = 0;
  std::size_t max_entries_ = 0;
};

/// One-shot marginal of the network over `query` by variable elimination.
inline JointTable marginal_by_elimination(const NetworkSpec& net, const std::vector<VarId>& query) {
  return MarginalPlan(net, query).evaluate(net.cpts());
}

}  // namespace bnfit
