#include "edgetimer/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace edgetimer {

double revenue(const ClusterConfig& cfg, int slot, std::span<const double> completed_in_budget) {
  double g = 0.0;
  for (std::size_t s = 0; s < completed_in_budget.size(); ++s) {
    g += completed_in_budget[s] * cfg.price(static_cast<int>(s), slot);
  }
  return g;
}

double placement_cost(const ClusterConfig& cfg, int edge, const Grid<std::uint8_t>& placement,
                      const Grid<std::uint8_t>& previous_placement) {
  double cost = 0.0;
  for (int s = 0; s < cfg.num_services; ++s) {
    if (!(placement(edge, s) == 1 && previous_placement(edge, s) == 0)) continue;
    double best = cfg.place_cost_per_km * cfg.distance[edge][cfg.cloud()];
    for (int j = 0; j < cfg.num_edges; ++j) {
      if (previous_placement(j, s)) best = std::min(best, cfg.place_cost_per_km * cfg.distance[edge][j]);
    }
    cost += best;
  }
  return cost;
}

double offloading_cost(const ClusterConfig& cfg, int edge, const Grid<int>& route, const Grid<int>& previous_route) {
  double cost = 0.0;
  for (int s = 0; s < cfg.num_services; ++s) {
    const int from = previous_route(edge, s);
    const int to = route(edge, s);
    if (from == kNoRoute || to == kNoRoute || from == to) continue;
    cost += cfg.offload_cost_per_km * cfg.distance[from][to];
  }
  return cost;
}

double allocation_cost(const ClusterConfig& cfg, int edge, const Grid<double>& allocation,
                       const Grid<double>& previous_allocation) {
  double cost = 0.0;
  for (int s = 0; s < cfg.num_services; ++s) {
    cost += cfg.realloc_cost_per_unit * std::max(0.0, allocation(edge, s) - previous_allocation(edge, s));
  }
  return cost;
}

double population_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / static_cast<double>(values.size());
}

Environment::Environment(ClusterConfig cfg) : cfg_(std::move(cfg)) {
  require_valid(cfg_);
  reset();
}

void Environment::reset() { state_ = SchedulingState::initial(cfg_); }

namespace {

void check_shapes(const ClusterConfig& cfg, const Decisions& d, const JointAction& actions) {
  const int n = cfg.num_edges;
  const int s = cfg.num_services;
  if (d.placement.rows() != n || d.placement.cols() != s || d.route.rows() != n || d.route.cols() != s ||
      d.allocation.rows() != n || d.allocation.cols() != s) {
    throw InfeasibleDecision("decision tensors do not match the cluster shape");
  }
  if (static_cast<int>(actions.size()) != n) throw InfeasibleDecision("one update action per edge is required");
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < s; ++k) {
      const int r = d.route(i, k);
      if (r != kNoRoute && (r < 0 || r > cfg.cloud())) {
        throw InfeasibleDecision("route(" + std::to_string(i) + "," + std::to_string(k) +
                                 ") references unknown server " + std::to_string(r));
      }
      const double z = d.allocation(i, k);
      if (!std::isfinite(z) || z < 0.0) throw InfeasibleDecision("allocation must be finite and non-negative");
    }
  }
  for (const auto& msg : validate_decisions(cfg, d)) {
    // Stale routes are checked when a task actually follows them.
    if (msg.find("route(") == std::string::npos) throw InfeasibleDecision(msg);
  }
}

void check_arrival(const ClusterConfig& cfg, const Task& t, int slot) {
  if (t.arrival_slot != slot) throw std::invalid_argument("task " + std::to_string(t.id) + " does not arrive in slot " + std::to_string(slot));
  if (t.service < 0 || t.service >= cfg.num_services) throw InfeasibleDecision("task references unknown service");
  if (t.origin_edge < 0 || t.origin_edge >= cfg.num_edges) throw InfeasibleDecision("task references unknown edge");
  if (!(t.workload > 0.0) || t.delay_budget < 1) throw std::invalid_argument("task needs positive workload and budget");
}

}  // namespace

SlotLedger Environment::step(const Decisions& executed, const JointAction& actions, std::span<const Task> arrivals,
                             const StepOptions& options) {
  const int t = state_.slot;
  const int n = cfg_.num_edges;
  const int ns = cfg_.num_services;
  check_shapes(cfg_, executed, actions);
  for (const Task& task : arrivals) check_arrival(cfg_, task, t);

  SlotLedger ledger;
  ledger.slot = t;
  ledger.edges.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& e = ledger.edges[i];
    e.action = actions[i];
    e.place_cost = placement_cost(cfg_, i, executed.placement, state_.current.placement);
    e.offload_cost = offloading_cost(cfg_, i, executed.route, state_.current.route);
    e.alloc_cost = allocation_cost(cfg_, i, executed.allocation, state_.current.allocation);
  }

  state_.previous = std::move(state_.current);
  state_.current = executed;
  const auto& x = state_.current.placement;
  const auto& y = state_.current.route;
  const auto& z = state_.current.allocation;

  std::vector<std::uint8_t> placed_anywhere(static_cast<std::size_t>(ns), 0);
  for (int s = 0; s < ns; ++s)
    for (int i = 0; i < n; ++i) placed_anywhere[s] |= x(i, s);

  auto note_queue_entry = [&](ActiveTask& a) {
    if (a.queue_entry >= 0) return;
    a.queue_entry = a.elapsed;
    if (a.elapsed <= cfg_.tx_budget_fraction * a.task.delay_budget) {
      ledger.edges[a.task.origin_edge].offload_in_budget += a.task.workload;
    }
  };

  // 1. Arrivals join their origin edge.
  for (const Task& task : arrivals) {
    ActiveTask a;
    a.task = task;
    a.remaining = task.workload;
    a.location = task.origin_edge;
    a.ready_slot = t;
    state_.queues[task.origin_edge].push_back(a);
    ledger.edges[task.origin_edge].arrived += task.workload;
  }

  // 2. Transfers that finish this slot join the destination queue.
  {
    std::vector<ActiveTask> travelling;
    for (auto& a : state_.in_transit) {
      if (a.ready_slot > t) {
        travelling.push_back(a);
        continue;
      }
      a.awaiting_dispatch = false;
      note_queue_entry(a);
      if (a.location == cfg_.cloud()) {
        state_.cloud_queue.push_back(a);
      } else {
        state_.queues[a.location].push_back(a);
      }
    }
    state_.in_transit = std::move(travelling);
  }

  // 3. Dispatch: new arrivals and tasks whose service left this edge follow y.
  for (int i = 0; i < n; ++i) {
    std::deque<ActiveTask> kept;
    for (auto& a : state_.queues[i]) {
      const int s = a.task.service;
      auto& e = ledger.edges[i];
      if (placed_anywhere[s]) {
        e.covered += a.remaining;
      } else {
        e.unserved += a.remaining;
      }
      const bool local = x(i, s) != 0;
      if (!a.awaiting_dispatch && local) {
        kept.push_back(a);
        continue;
      }
      const int dest = y(i, s);
      if (dest == i && local) {
        a.awaiting_dispatch = false;
        note_queue_entry(a);
        kept.push_back(a);
        continue;
      }
      if (dest != kNoRoute && dest != i && route_feasible(cfg_, x, i, s, dest)) {
        a.location = dest;
        a.ready_slot = t + cfg_.transmission_slots(i, dest);
        state_.in_transit.push_back(a);
        continue;
      }
      if (!options.allow_blocked_routes) {
        throw InfeasibleDecision("task " + std::to_string(a.task.id) + " of service " + std::to_string(s) +
                                 " at edge " + std::to_string(i) + " has no feasible route (route -> " +
                                 std::to_string(dest) + ")");
      }
      a.awaiting_dispatch = true;
      ++e.blocked_tasks;
      kept.push_back(a);
    }
    state_.queues[i] = std::move(kept);
  }

  // 4. Service: per-service CPU budgets consumed in FIFO order.
  std::vector<double> cap(static_cast<std::size_t>(ns));
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < ns; ++s) cap[s] = x(i, s) ? z(i, s) : 0.0;
    double used = 0.0;
    for (auto& a : state_.queues[i]) {
      if (a.awaiting_dispatch) continue;
      double& c = cap[a.task.service];
      const double use = std::min(c, a.remaining);
      a.remaining -= use;
      c -= use;
      used += use;
    }
    state_.cpu_used[i] = used;
  }
  {
    double c = cfg_.cloud_cpu;
    for (auto& a : state_.cloud_queue) {
      const double use = std::min(c, a.remaining);
      a.remaining -= use;
      c -= use;
    }
  }

  // 5. Ageing, completions and budget accounting.
  Grid<double> mu(n, ns, 0.0);
  auto complete = [&](const ActiveTask& a, int server, int attributed) {
    CompletedTask done{a.task, a.elapsed, a.elapsed <= a.task.delay_budget, server};
    auto& e = ledger.edges[attributed];
    if (done.within_budget) {
      e.served += a.task.workload;
      mu(attributed, a.task.service) += a.task.workload;
      if (a.elapsed - a.queue_entry <= cfg_.compute_budget_fraction * a.task.delay_budget) {
        e.compute_in_budget += a.task.workload;
      }
    } else {
      e.violated += a.task.workload;
      if (server != cfg_.cloud()) ++e.late_tasks;
    }
    ledger.completions.push_back(done);
  };

  for (int i = 0; i < n; ++i) {
    std::deque<ActiveTask> kept;
    for (auto& a : state_.queues[i]) {
      ++a.elapsed;
      if (a.remaining <= 0.0) {
        complete(a, i, i);
        continue;
      }
      if (a.elapsed > a.task.delay_budget) ++ledger.edges[i].late_tasks;
      kept.push_back(a);
    }
    state_.queues[i] = std::move(kept);
  }
  {
    std::deque<ActiveTask> kept;
    for (auto& a : state_.cloud_queue) {
      ++a.elapsed;
      if (a.remaining <= 0.0) {
        complete(a, cfg_.cloud(), a.task.origin_edge);
        continue;
      }
      kept.push_back(a);
    }
    state_.cloud_queue = std::move(kept);
  }
  for (auto& a : state_.in_transit) ++a.elapsed;

  // 6. Revenue, gated profit and the layer signals.
  for (int i = 0; i < n; ++i) {
    auto& e = ledger.edges[i];
    e.queued = state_.queued_workload(i);
    e.revenue = revenue(cfg_, t, mu.row(i));
    e.profit = e.revenue - e.action.bits[0] * e.place_cost - e.action.bits[1] * e.offload_cost -
               e.action.bits[2] * e.alloc_cost;
  }
  ledger.signals = layer_signals(state_, ledger);
  ++state_.slot;
  return ledger;
}

LayerSignals layer_signals(const SchedulingState& state, const SlotLedger& ledger) {
  LayerSignals sig;
  std::vector<double> queued;
  queued.reserve(state.queues.size());
  for (std::size_t i = 0; i < state.queues.size(); ++i) {
    queued.push_back(state.queued_workload(static_cast<int>(i)));
  }
  for (const auto& e : ledger.edges) {
    sig.covered_demand += e.covered;
    sig.offload_in_budget += e.offload_in_budget;
    sig.compute_in_budget += e.compute_in_budget;
  }
  sig.workload_variance = population_variance(queued);
  return sig;
}

Grid<double> projected_local_demand(const ClusterConfig& cfg, const SchedulingState& state,
                                    const Grid<std::uint8_t>& placement, const Grid<int>& route,
                                    std::span<const Task> arrivals) {
  Grid<double> demand(cfg.num_edges, cfg.num_services, 0.0);
  auto stays_local = [&](int i, int s) { return placement(i, s) && route(i, s) == i; };
  for (int i = 0; i < cfg.num_edges; ++i) {
    for (const auto& a : state.queues[i]) {
      const int s = a.task.service;
      if (!placement(i, s)) continue;
      if (!a.awaiting_dispatch || route(i, s) == i) demand(i, s) += a.remaining;
    }
  }
  for (const auto& a : state.in_transit) {
    if (a.location == cfg.cloud() || a.ready_slot > state.slot) continue;
    if (placement(a.location, a.task.service)) demand(a.location, a.task.service) += a.remaining;
  }
  for (const auto& task : arrivals) {
    if (stays_local(task.origin_edge, task.service)) demand(task.origin_edge, task.service) += task.workload;
  }
  return demand;
}

}  // namespace edgetimer
