#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "edgetimer/config.hpp"
#include "edgetimer/grid.hpp"

namespace edgetimer {

enum class Layer : int { Placement = 0, Offloading = 1, Allocation = 2 };
inline constexpr int kNumLayers = 3;
inline constexpr std::array<Layer, kNumLayers> kLayers{Layer::Placement, Layer::Offloading,
                                                       Layer::Allocation};

constexpr int index_of(Layer l) { return static_cast<int>(l); }
std::string_view layer_name(Layer l);

// Route sentinel for "no previous offloading decision".
inline constexpr int kNoRoute = -1;

struct Task {
  std::int64_t id = 0;
  int service = 0;
  int arrival_slot = 0;
  double cpu_demand = 1.0;   // CPU-units requested
  double workload = 1.0;     // CPU-unit * slots of processing
  int delay_budget = 1;      // slots
  int origin_edge = 0;

  bool operator==(const Task&) const = default;
};

/// One full set of x / y / z decisions.
struct Decisions {
  Grid<std::uint8_t> placement;   // x(i,s) in {0,1}
  Grid<int> route;                // y: destination server for (origin i, service s)
  Grid<double> allocation;        // z(i,s) CPU-units

  static Decisions empty(const ClusterConfig& cfg);
  bool operator==(const Decisions&) const = default;
};

/// Checks the three decision invariants: memory limit per edge, CPU limit per
/// edge, and that every route targets the cloud or an edge holding the service.
/// Returns one message per violation.
std::vector<std::string> validate_decisions(const ClusterConfig& cfg, const Decisions& d);

/// True when route (origin, service) can be followed under `placement`.
bool route_feasible(const ClusterConfig& cfg, const Grid<std::uint8_t>& placement, int origin, int service,
                    int destination);

/// A task somewhere in the system.
struct ActiveTask {
  Task task;
  double remaining = 0.0;
  int elapsed = 0;            // slots spent in the system so far
  int queue_entry = -1;       // elapsed value when it first reached a processing queue
  int ready_slot = 0;         // transit: slot at which it joins `location`
  int location = 0;           // server index (edge or cloud)
  bool awaiting_dispatch = true;
};

struct SchedulingState {
  int slot = 0;               // next slot to execute
  Decisions current;          // executed decisions of slot-1
  Decisions previous;         // executed decisions of slot-2
  std::vector<std::deque<ActiveTask>> queues;   // per edge, FIFO
  std::deque<ActiveTask> cloud_queue;
  std::vector<ActiveTask> in_transit;
  std::vector<double> cpu_used;                 // per edge, during the last slot

  static SchedulingState initial(const ClusterConfig& cfg);

  bool has_previous_decisions() const { return slot > 0; }
  double queued_workload(int edge) const;       // remaining work in an edge queue
  double in_system_workload() const;            // full workload of every unfinished task
};

/// Per-edge update bits (a1, a2, a3); 1 = update, 0 = hold.
struct UpdateAction {
  std::array<std::uint8_t, kNumLayers> bits{};

  bool operator[](Layer l) const { return bits[index_of(l)] != 0; }
  void set(Layer l, bool v) { bits[index_of(l)] = v ? 1 : 0; }
  static UpdateAction all(bool v) { return {{std::uint8_t(v), std::uint8_t(v), std::uint8_t(v)}}; }
  bool operator==(const UpdateAction&) const = default;
};
using JointAction = std::vector<UpdateAction>;

struct EdgeLedger {
  double revenue = 0.0;        // g_i
  double place_cost = 0.0;     // c1_i
  double offload_cost = 0.0;   // c2_i
  double alloc_cost = 0.0;     // c3_i
  double profit = 0.0;         // g - a1 c1 - a2 c2 - a3 c3
  double arrived = 0.0;        // workload arriving at this origin edge
  double served = 0.0;         // workload completed within budget (attributed here)
  double violated = 0.0;       // workload completed past its budget
  double covered = 0.0;        // d_i: demand whose service is placed on some edge
  double unserved = 0.0;       // demand whose service is placed on no edge
  double offload_in_budget = 0.0;   // u_i
  double compute_in_budget = 0.0;   // l_i
  double queued = 0.0;         // remaining work in the edge queue after the slot
  int late_tasks = 0;          // tasks at this edge currently past their budget
  int blocked_tasks = 0;       // tasks stuck behind an infeasible route
  UpdateAction action;
};

struct LayerSignals {
  double covered_demand = 0.0;     // d(t)
  double offload_in_budget = 0.0;  // u(t)
  double workload_variance = 0.0;  // v(t)
  double compute_in_budget = 0.0;  // l(t)
};

struct CompletedTask {
  Task task;
  int delay = 0;
  bool within_budget = true;
  int server = 0;
};

struct SlotLedger {
  int slot = 0;
  std::vector<EdgeLedger> edges;
  LayerSignals signals;
  std::vector<CompletedTask> completions;

  double total_profit() const;
  double total_revenue() const;
};

}  // namespace edgetimer
