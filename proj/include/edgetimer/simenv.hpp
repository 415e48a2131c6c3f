#pragma once

#include <span>
#include <stdexcept>

#include "edgetimer/types.hpp"

namespace edgetimer {

/// Raised when executed decisions break a feasibility invariant.
class InfeasibleDecision : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepOptions {
  // When false a task whose route is infeasible is a hard error. When true the
  // task waits at its edge until a feasible route exists (unsafe-hold mode).
  bool allow_blocked_routes = false;
};

// Revenue and the three operation costs, each for one edge and one slot.

/// g_i = sum_s mu(i,s) p_s(t); `completed_in_budget` holds mu(i,s) per service.
double revenue(const ClusterConfig& cfg, int slot, std::span<const double> completed_in_budget);

/// c1_i: every newly placed service is fetched from the nearest server that
/// held it in the previous slot (the cloud always does). Removals are free.
double placement_cost(const ClusterConfig& cfg, int edge, const Grid<std::uint8_t>& placement,
                      const Grid<std::uint8_t>& previous_placement);

/// c2_i: a route moved from server k to server m costs offload_cost_per_km * d(k,m).
double offloading_cost(const ClusterConfig& cfg, int edge, const Grid<int>& route, const Grid<int>& previous_route);

/// c3_i: only increases of allocated CPU are charged.
double allocation_cost(const ClusterConfig& cfg, int edge, const Grid<double>& allocation,
                       const Grid<double>& previous_allocation);

/// Population variance of the values (0 for an empty span).
double population_variance(std::span<const double> values);

/// The discrete-time environment. Owns the scheduling state of one run.
class Environment {
 public:
  explicit Environment(ClusterConfig cfg);

  const ClusterConfig& config() const { return cfg_; }
  const SchedulingState& state() const { return state_; }
  int slot() const { return state_.slot; }

  void reset();

  /// Executes slot `slot()`: arrivals are enqueued at their origin edges,
  /// tasks are routed per `executed.route`, every edge serves its queue with
  /// `executed.allocation`, delays are aged and the ledger is filled.
  /// `actions` are the effective update bits used to gate the costs.
  SlotLedger step(const Decisions& executed, const JointAction& actions, std::span<const Task> arrivals,
                  const StepOptions& options = {});

 private:
  ClusterConfig cfg_;
  SchedulingState state_;
};

/// d, u, v, l for a post-step state and its ledger.
LayerSignals layer_signals(const SchedulingState& state, const SlotLedger& ledger);

/// Per-edge, per-service work that the edge can process this slot once the
/// given placement and routes are in force (queued, landing and new arrivals).
Grid<double> projected_local_demand(const ClusterConfig& cfg, const SchedulingState& state,
                                    const Grid<std::uint8_t>& placement, const Grid<int>& route,
                                    std::span<const Task> arrivals);

}  // namespace edgetimer
