#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bnfit/core.hpp"
#include "bnfit/error.hpp"
#include "bnfit/log.hpp"

namespace bnfit {

/// When a solver stops. `epsilon` bounds the max-abs change between
/// successive cycle-end states and every residual at convergence.
struct StopPolicy {
  double epsilon = 1e-9;
  std::size_t max_cycles = 10000;
  // Long enough that slow geometric convergence (about 0.2% per cycle) is
  // not mistaken for a stall.
  std::size_t oscillation_window = 200;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be > 0");
    if (max_cycles < 1) throw Error(ErrorKind::InvalidArgument, "max cycles must be >= 1");
    if (oscillation_window < 2) throw Error(ErrorKind::InvalidArgument, "oscillation window must be >= 2");
  }
};

/// Order in which constraints are applied within one cycle.
struct Schedule {
  std::vector<std::size_t> constraint_order;
  /// Append the structural re-projection as the last step of every cycle.
  bool include_structural = false;

  static Schedule document_order(std::size_t m, bool structural = false) {
    Schedule s;
    s.constraint_order.resize(m);
    for (std::size_t i = 0; i < m; ++i) s.constraint_order[i] = i;
    s.include_structural = structural;
    return s;
  }

  /// Stable sort by the topologically deepest scope member, so constraints
  /// on ancestors are fitted before constraints on their descendants.
  static Schedule ancestors_first(const NetworkSpec& net, const std::vector<Constraint>& rs,
                                  bool structural = false) {
    Schedule s = document_order(rs.size(), structural);
    auto depth = [&](std::size_t i) {
      std::size_t d = 0;
      for (VarId v : rs[i].scope) d = std::max(d, net.topo_rank(v));
      return d;
    };
    std::stable_sort(s.constraint_order.begin(), s.constraint_order.end(),
                     [&](std::size_t a, std::size_t b) { return depth(a) < depth(b); });
    return s;
  }

  void validate(std::size_t m) const {
    if (constraint_order.size() != m) {
      throw Error(ErrorKind::InvalidArgument, "schedule must list each constraint exactly once");
    }
    std::vector<bool> seen(m, false);
    for (std::size_t i : constraint_order) {
      if (i >= m || seen[i]) {
        throw Error(ErrorKind::InvalidArgument, "schedule is not a permutation of the constraints");
      }
      seen[i] = true;
    }
  }
};

enum class Algorithm { Ipfp, EIpfp, DIpfp };
enum class Termination { Converged, MaxCycles, Oscillating };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ipfp: return "ipfp";
    case Algorithm::EIpfp: return "e-ipfp";
    case Algorithm::DIpfp: return "d-ipfp";
  }
  return "?";
}

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxCycles: return "max-cycles";
    case Termination::Oscillating: return "oscillating";
  }
  return "?";
}

struct RunReport {
  static constexpr const char* kLogBase = "e";

  Algorithm algorithm = Algorithm::Ipfp;
  std::size_t cycles = 0;
  std::chrono::duration<double> wall_time{0.0};
  /// I(result || original), natural log. Empty when the dense joint was
  /// over the reporting ceiling.
  std::optional<double> final_divergence;
  std::vector<double> per_constraint_residuals;  // document order
  double structural_residual = 0.0;
  Termination termination = Termination::Converged;
  /// Largest |sum - 1| removed by explicit renormalization of solver output.
  double max_renormalization = 0.0;
  /// Largest table an update step works on: the joint for the dense
  /// solvers, a CPT or subnet table for the decomposed one.
  std::size_t max_table_entries = 0;
  /// Largest intermediate factor of the eliminations computing marginals
  /// (decomposed solver only).
  std::size_t max_marginal_entries = 0;
  std::size_t inner_iterations = 0;

  double max_residual() const {
    double m = structural_residual;
    for (double r : per_constraint_residuals) m = std::max(m, r);
    return m;
  }
};

/// Cycle-end bookkeeping shared by the solvers.
///
/// Converged when both the cycle delta and every residual are within
/// epsilon. Oscillating when, over the last `oscillation_window` cycles,
/// neither the delta nor the largest residual improved by 10% while the
/// residual is still above epsilon.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(const StopPolicy& stop) : stop_(stop) {}

  std::optional<Termination> observe(std::size_t cycle, double delta, double max_residual) {
    log::debug("cycle %zu delta %.3e residual %.3e", cycle, delta, max_residual);
    if (delta <= stop_.epsilon && max_residual <= stop_.epsilon) return Termination::Converged;
    history_.emplace_back(delta, max_residual);
    if (history_.size() > stop_.oscillation_window) {
      const auto [old_delta, old_res] = history_.front();
      history_.pop_front();
      const bool delta_stalled = delta >= 0.9 * old_delta;
      const bool residual_stalled = max_residual >= 0.9 * old_res;
      if (delta_stalled && residual_stalled && max_residual > stop_.epsilon) {
        log::warn("no 10%% improvement over %zu cycles (residual %.3e); reporting oscillation",
                  stop_.oscillation_window, max_residual);
        return Termination::Oscillating;
      }
    }
    if (cycle >= stop_.max_cycles) return Termination::MaxCycles;
    return std::nullopt;
  }

 private:
  StopPolicy stop_;
  std::deque<std::pair<double, double>> history_;
};

/// Rescales to sum one and returns the size of the adjustment.
inline double renormalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  if (s > 0.0 && s != 1.0) {
    for (double& x : v) x /= s;
  }
  return std::abs(s - 1.0);
}

}  // namespace bnfit
