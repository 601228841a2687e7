#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bnfit/error.hpp"

namespace bnfit {

/// Index of a variable in its network's declaration order.
using VarId = std::size_t;

/// Tolerance for normalization checks on ingested tables.
inline constexpr double kNormTolerance = 1e-9;

inline std::size_t table_size(std::span<const std::size_t> cards) {
  return std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>());
}

/// Mixed-radix strides with the last position varying fastest.
inline std::vector<std::size_t> strides_of(std::span<const std::size_t> cards) {
  std::vector<std::size_t> strides(cards.size());
  std::size_t s = 1;
  for (std::size_t d = cards.size(); d-- > 0;) {
    strides[d] = s;
    s *= cards[d];
  }
  return strides;
}

/// Walks every entry of a table over `scope` in storage order and calls
/// f(i, j) with its linear index i and the index j of the entry of the
/// table over `sub` (a subset of `scope`, any order) it projects onto.
template <typename F>
void for_each_projected(std::span<const VarId> scope, std::span<const std::size_t> cards,
                        std::span<const VarId> sub, F&& f) {
  const std::size_t n = scope.size();
  std::vector<std::size_t> sub_cards(sub.size());
  std::vector<std::size_t> pos(sub.size());
  for (std::size_t j = 0; j < sub.size(); ++j) {
    auto it = std::find(scope.begin(), scope.end(), sub[j]);
    if (it == scope.end()) {
      throw Error(ErrorKind::ScopeMismatch,
                  "variable #" + std::to_string(sub[j]) + " is not in the table scope");
    }
    pos[j] = static_cast<std::size_t>(it - scope.begin());
    sub_cards[j] = cards[pos[j]];
  }
  const auto sub_strides = strides_of(sub_cards);
  std::vector<std::size_t> stride(n, 0);
  for (std::size_t j = 0; j < sub.size(); ++j) stride[pos[j]] = sub_strides[j];

  const std::size_t total = table_size(cards);
  std::vector<std::size_t> digit(n, 0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, idx);
    for (std::size_t d = n; d-- > 0;) {
      if (++digit[d] < cards[d]) {
        idx += stride[d];
        break;
      }
      idx -= stride[d] * (cards[d] - 1);
      digit[d] = 0;
    }
  }
}

/// Materialized form of for_each_projected.
inline std::vector<std::size_t> projection_map(std::span<const VarId> scope,
                                               std::span<const std::size_t> cards,
                                               std::span<const VarId> sub) {
  std::vector<std::size_t> out(table_size(cards));
  for_each_projected(scope, cards, sub, [&](std::size_t i, std::size_t j) { out[i] = j; });
  return out;
}

/// Dense probability table over an ordered scope. Entries are stored in
/// mixed-radix order, last scope variable fastest.
struct JointTable {
  std::vector<VarId> scope;
  std::vector<std::size_t> cards;
  std::vector<double> probs;

  JointTable() = default;
  JointTable(std::vector<VarId> scope_, std::vector<std::size_t> cards_, std::vector<double> probs_)
      : scope(std::move(scope_)), cards(std::move(cards_)), probs(std::move(probs_)) {
    if (scope.size() != cards.size()) {
      throw Error(ErrorKind::Cardinality, "scope and cardinality lists differ in length");
    }
    if (probs.size() != table_size(cards)) {
      throw Error(ErrorKind::Cardinality, "table has " + std::to_string(probs.size()) +
                                              " entries, scope requires " +
                                              std::to_string(table_size(cards)));
    }
  }

  std::size_t size() const { return probs.size(); }
  double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

  /// Cardinality of `v`, which must be in scope.
  std::size_t card_of(VarId v) const {
    auto it = std::find(scope.begin(), scope.end(), v);
    if (it == scope.end()) {
      throw Error(ErrorKind::ScopeMismatch, "variable #" + std::to_string(v) + " is not in scope");
    }
    return cards[static_cast<std::size_t>(it - scope.begin())];
  }

  bool same_scope(const JointTable& other) const {
    return scope == other.scope && cards == other.cards;
  }

  /// Linear index of a full assignment given in scope order.
  std::size_t index_of(std::span<const std::size_t> states) const {
    std::size_t idx = 0;
    for (std::size_t d = 0; d < cards.size(); ++d) idx = idx * cards[d] + states[d];
    return idx;
  }

  /// Assignment (scope order) of a linear index.
  std::vector<std::size_t> states_of(std::size_t idx) const {
    std::vector<std::size_t> states(cards.size());
    for (std::size_t d = cards.size(); d-- > 0;) {
      states[d] = idx % cards[d];
      idx /= cards[d];
    }
    return states;
  }
};

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace bnfit
