#include "scenarios.hpp"

#include <sstream>

namespace reftest {

using namespace edgetimer;

ClusterConfig oracle_cluster(int edges, int services) {
  ClusterConfig cfg = ClusterConfig::layout(edges, services, 4.0, 16.0);
  cfg.place_cost_per_km = 0.25;
  cfg.offload_cost_per_km = 0.125;
  cfg.realloc_cost_per_unit = 0.5;
  cfg.link_km_per_slot = 4.0;
  cfg.cloud_rtt_slots = 1;
  return cfg;
}

RandomSlot random_slot(const ClusterConfig& cfg, int slot, std::mt19937_64& rng, std::int64_t& next_id,
                       double arrival_prob) {
  const int n = cfg.num_edges, ns = cfg.num_services;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomSlot rs;
  rs.decisions = Decisions::empty(cfg);
  auto& d = rs.decisions;
  for (int i = 0; i < n; ++i) {
    double mem = 0.0;
    for (int s = 0; s < ns; ++s) {
      if (u(rng) < 0.6 && mem + cfg.service_mem_footprint[s] <= cfg.edge_mem) {
        d.placement(i, s) = 1;
        mem += cfg.service_mem_footprint[s];
      }
      d.route(i, s) = std::uniform_int_distribution<int>(-1, cfg.cloud())(rng);
    }
    // Allocation in half units, never above edge_cpu.
    double left = cfg.edge_cpu;
    for (int s = 0; s < ns; ++s) {
      const double z = 0.5 * std::uniform_int_distribution<int>(0, static_cast<int>(2 * left))(rng);
      d.allocation(i, s) = z;
      left -= z;
    }
  }
  rs.actions.resize(static_cast<std::size_t>(n));
  for (auto& a : rs.actions)
    for (auto& b : a.bits) b = u(rng) < 0.5;
  for (int i = 0; i < n; ++i) {
    while (u(rng) < arrival_prob) {
      Task t;
      t.id = next_id++;
      t.service = std::uniform_int_distribution<int>(0, ns - 1)(rng);
      t.arrival_slot = slot;
      t.workload = std::uniform_int_distribution<int>(1, 4)(rng);
      t.cpu_demand = 1.0;
      t.delay_budget = std::uniform_int_distribution<int>(1, 8)(rng);
      t.origin_edge = i;
      rs.arrivals.push_back(t);
      if (rs.arrivals.size() > 6) break;
    }
  }
  return rs;
}

RefSlot reference_step(ReferenceSim& ref, const RandomSlot& rs) {
  std::vector<int> x(rs.decisions.placement.data().begin(), rs.decisions.placement.data().end());
  std::vector<int> y = rs.decisions.route.data();
  std::vector<double> z = rs.decisions.allocation.data();
  std::vector<std::array<int, 3>> bits;
  for (const auto& a : rs.actions) bits.push_back({a.bits[0], a.bits[1], a.bits[2]});
  return ref.step(x, y, z, bits, rs.arrivals);
}

std::string diff(const SlotLedger& got, const RefSlot& want) {
  std::ostringstream os;
  auto cmp = [&](const std::string& what, double a, double b) {
    if (a != b) os << what << ": env " << a << " ref " << b << "\n";
  };
  if (got.edges.size() != want.edges.size()) return "edge count differs\n";
  for (std::size_t i = 0; i < got.edges.size(); ++i) {
    const auto& g = got.edges[i];
    const auto& w = want.edges[i];
    const std::string p = "edge " + std::to_string(i) + " ";
    cmp(p + "revenue", g.revenue, w.revenue);
    cmp(p + "place_cost", g.place_cost, w.place_cost);
    cmp(p + "offload_cost", g.offload_cost, w.offload_cost);
    cmp(p + "alloc_cost", g.alloc_cost, w.alloc_cost);
    cmp(p + "profit", g.profit, w.profit);
    cmp(p + "arrived", g.arrived, w.arrived);
    cmp(p + "served", g.served, w.served);
    cmp(p + "violated", g.violated, w.violated);
    cmp(p + "covered", g.covered, w.covered);
    cmp(p + "unserved", g.unserved, w.unserved);
    cmp(p + "offload_in_budget", g.offload_in_budget, w.offload_in_budget);
    cmp(p + "compute_in_budget", g.compute_in_budget, w.compute_in_budget);
    cmp(p + "queued", g.queued, w.queued);
    cmp(p + "late_tasks", g.late_tasks, w.late_tasks);
    cmp(p + "blocked_tasks", g.blocked_tasks, w.blocked_tasks);
  }
  cmp("d", got.signals.covered_demand, want.d);
  cmp("u", got.signals.offload_in_budget, want.u);
  cmp("v", got.signals.workload_variance, want.v);
  cmp("l", got.signals.compute_in_budget, want.l);
  if (got.completions.size() != want.completions.size()) {
    os << "completions: env " << got.completions.size() << " ref " << want.completions.size() << "\n";
  } else {
    for (std::size_t k = 0; k < got.completions.size(); ++k) {
      const auto& g = got.completions[k];
      const auto& w = want.completions[k];
      if (g.task.id != w.id || g.delay != w.delay || g.within_budget != w.within_budget || g.server != w.server) {
        os << "completion " << k << " differs (task " << g.task.id << " vs " << w.id << ")\n";
      }
    }
  }
  return os.str();
}

}  // namespace reftest
