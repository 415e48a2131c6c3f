#include "edgetimer/types.hpp"

namespace edgetimer {

std::string_view layer_name(Layer l) {
  switch (l) {
    case Layer::Placement: return "placement";
    case Layer::Offloading: return "offloading";
    case Layer::Allocation: return "allocation";
  }
  return "?";
}

Decisions Decisions::empty(const ClusterConfig& cfg) {
  return {Grid<std::uint8_t>(cfg.num_edges, cfg.num_services, 0),
          Grid<int>(cfg.num_edges, cfg.num_services, kNoRoute),
          Grid<double>(cfg.num_edges, cfg.num_services, 0.0)};
}

bool route_feasible(const ClusterConfig& cfg, const Grid<std::uint8_t>& placement, int origin, int service,
                    int destination) {
  if (destination == cfg.cloud()) return true;
  if (destination < 0 || destination >= cfg.num_edges) return false;
  (void)origin;
  return placement(destination, service) != 0;
}

std::vector<std::string> validate_decisions(const ClusterConfig& cfg, const Decisions& d) {
  std::vector<std::string> out;
  constexpr double kSlack = 1e-9;
  for (int i = 0; i < cfg.num_edges; ++i) {
    double mem = 0.0;
    double cpu = 0.0;
    for (int s = 0; s < cfg.num_services; ++s) {
      if (d.placement(i, s)) mem += cfg.service_mem_footprint[static_cast<std::size_t>(s)];
      const double z = d.allocation(i, s);
      if (!(z >= 0.0)) out.push_back("allocation(" + std::to_string(i) + "," + std::to_string(s) + ") is negative");
      cpu += z;
      const int r = d.route(i, s);
      if (r != kNoRoute && !route_feasible(cfg, d.placement, i, s, r)) {
        out.push_back("route(" + std::to_string(i) + "," + std::to_string(s) + ") -> " + std::to_string(r) +
                      " targets a server without the service");
      }
    }
    if (mem > cfg.edge_mem + kSlack) out.push_back("edge " + std::to_string(i) + " exceeds its memory");
    if (cpu > cfg.edge_cpu + kSlack) out.push_back("edge " + std::to_string(i) + " exceeds its CPU");
  }
  return out;
}

SchedulingState SchedulingState::initial(const ClusterConfig& cfg) {
  SchedulingState st;
  st.current = Decisions::empty(cfg);
  st.previous = Decisions::empty(cfg);
  st.queues.resize(static_cast<std::size_t>(cfg.num_edges));
  st.cpu_used.assign(static_cast<std::size_t>(cfg.num_edges), 0.0);
  return st;
}

double SchedulingState::queued_workload(int edge) const {
  double w = 0.0;
  for (const auto& t : queues[static_cast<std::size_t>(edge)]) w += t.remaining;
  return w;
}

double SchedulingState::in_system_workload() const {
  double w = 0.0;
  for (const auto& q : queues)
    for (const auto& t : q) w += t.task.workload;
  for (const auto& t : cloud_queue) w += t.task.workload;
  for (const auto& t : in_transit) w += t.task.workload;
  return w;
}

double SlotLedger::total_profit() const {
  double p = 0.0;
  for (const auto& e : edges) p += e.profit;
  return p;
}

double SlotLedger::total_revenue() const {
  double g = 0.0;
  for (const auto& e : edges) g += e.revenue;
  return g;
}

}  // namespace edgetimer
