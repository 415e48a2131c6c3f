#include "edgetimer/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace edgetimer {

namespace {

constexpr std::array<std::pair<PlacementRule, const char*>, 3> kPlacementNames{
    {{PlacementRule::HPA, "HPA"}, {PlacementRule::TopK, "TopK"}, {PlacementRule::AM, "AM"}}};
constexpr std::array<std::pair<OffloadRule, const char*>, 5> kOffloadNames{{{OffloadRule::MRP, "MRP"},
                                                                             {OffloadRule::LRP, "LRP"},
                                                                             {OffloadRule::RLP, "RLP"},
                                                                             {OffloadRule::SSP, "SSP"},
                                                                             {OffloadRule::RCRP, "RCRP"}}};
constexpr std::array<std::pair<AllocationRule, const char*>, 3> kAllocationNames{
    {{AllocationRule::PF, "PF"}, {AllocationRule::RR, "RR"}, {AllocationRule::EA, "EA"}}};

template <class Table, class E>
const char* lookup_name(const Table& table, E value) {
  for (const auto& [v, n] : table)
    if (v == value) return n;
  return "?";
}

template <class Table>
auto lookup_value(const Table& table, const std::string& name, const char* what) {
  for (const auto& [v, n] : table)
    if (name == n) return v;
  throw std::invalid_argument(std::string("unknown ") + what + " rule '" + name + "'");
}

double mean_footprint(const ClusterConfig& cfg) {
  const auto& f = cfg.service_mem_footprint;
  return std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
}

double used_memory(const ClusterConfig& cfg, const Grid<std::uint8_t>& x, int edge) {
  double m = 0.0;
  for (int s = 0; s < cfg.num_services; ++s)
    if (x(edge, s)) m += cfg.service_mem_footprint[s];
  return m;
}

constexpr double kMemSlack = 1e-9;

Grid<std::uint8_t> place_am(const ClusterConfig& cfg, const Grid<std::uint8_t>& current, const DemandWindow& w) {
  const int n = cfg.num_edges;
  const int ns = cfg.num_services;
  Grid<std::uint8_t> x(n, ns, 0);
  std::vector<double> mem(static_cast<std::size_t>(n), 0.0);

  std::vector<int> order(static_cast<std::size_t>(ns));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return w.service_total(a) > w.service_total(b); });

  for (int s : order) {
    if (w.service_total(s) <= 0.0) continue;
    std::vector<int> edges(static_cast<std::size_t>(n));
    std::iota(edges.begin(), edges.end(), 0);
    std::stable_sort(edges.begin(), edges.end(), [&](int a, int b) { return w.demand(a, s) > w.demand(b, s); });
    for (int i : edges) {
      if (w.demand(i, s) <= 0.0) break;
      if (mem[i] + cfg.service_mem_footprint[s] <= cfg.edge_mem + kMemSlack) {
        x(i, s) = 1;
        mem[i] += cfg.service_mem_footprint[s];
        break;
      }
    }
  }
  // Services without recent demand keep their replicas while memory allows.
  for (int s = 0; s < ns; ++s) {
    if (w.service_total(s) > 0.0) continue;
    for (int i = 0; i < n; ++i) {
      if (current(i, s) && mem[i] + cfg.service_mem_footprint[s] <= cfg.edge_mem + kMemSlack) {
        x(i, s) = 1;
        mem[i] += cfg.service_mem_footprint[s];
      }
    }
  }
  return x;
}

Grid<std::uint8_t> place_topk(const ClusterConfig& cfg, const Grid<std::uint8_t>& current, const DemandWindow& w,
                              const RuleParams& p) {
  const int ns = cfg.num_services;
  const int k = p.topk > 0 ? p.topk : std::max(1, static_cast<int>(std::floor(cfg.edge_mem / mean_footprint(cfg))));
  Grid<std::uint8_t> x = current;
  for (int i = 0; i < cfg.num_edges; ++i) {
    if (w.edge_total(i) <= 0.0) continue;
    std::vector<int> order;
    for (int s = 0; s < ns; ++s)
      if (w.demand(i, s) > 0.0) order.push_back(s);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w.demand(i, a) > w.demand(i, b); });
    for (int s = 0; s < ns; ++s) x(i, s) = 0;
    double mem = 0.0;
    int taken = 0;
    for (int s : order) {
      if (taken == k) break;
      if (mem + cfg.service_mem_footprint[s] > cfg.edge_mem + kMemSlack) continue;
      x(i, s) = 1;
      mem += cfg.service_mem_footprint[s];
      ++taken;
    }
  }
  return x;
}

Grid<std::uint8_t> place_hpa(const ClusterConfig& cfg, const Grid<std::uint8_t>& current, const DemandWindow& w,
                             const RuleParams& p) {
  const int n = cfg.num_edges;
  const double replica_cpu = p.hpa_replica_cpu > 0.0 ? p.hpa_replica_cpu : cfg.edge_cpu / 2.0;
  const double slots = std::max(1, w.slots());
  Grid<std::uint8_t> x = current;
  std::vector<double> mem(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) mem[i] = used_memory(cfg, x, i);

  for (int s = 0; s < cfg.num_services; ++s) {
    int replicas = 0;
    for (int i = 0; i < n; ++i) replicas += x(i, s);
    const double rate = w.service_total(s) / slots;
    const double util = replicas == 0 ? (rate > 0.0 ? std::numeric_limits<double>::infinity() : 0.0)
                                      : rate / (replicas * replica_cpu);
    if (rate > 0.0 && util > p.hpa_scale_up) {
      int best = -1;
      for (int i = 0; i < n; ++i) {
        if (x(i, s) || mem[i] + cfg.service_mem_footprint[s] > cfg.edge_mem + kMemSlack) continue;
        if (best < 0 || w.demand(i, s) > w.demand(best, s)) best = i;
      }
      if (best >= 0) {
        x(best, s) = 1;
        mem[best] += cfg.service_mem_footprint[s];
      }
    } else if (util < p.hpa_scale_down && replicas > 1) {
      int worst = -1;
      for (int i = 0; i < n; ++i) {
        if (!x(i, s)) continue;
        if (worst < 0 || w.demand(i, s) < w.demand(worst, s)) worst = i;
      }
      x(worst, s) = 0;
      mem[worst] -= cfg.service_mem_footprint[s];
    }
  }
  return x;
}

double offload_score(OffloadRule rule, const ServerLoad& load, const Grid<double>& allocation, int j, int s,
                     const RuleParams& p) {
  const double util = load.utilization(j, p.util_horizon);
  switch (rule) {
    case OffloadRule::MRP:
      return util;
    case OffloadRule::LRP:
      return 1.0 - util;
    case OffloadRule::RLP: {
      const double limit = allocation(j, s);
      const double requested = load.service_queued(j, s) / p.util_horizon;
      if (limit + requested <= 0.0) return 1.0;
      return limit / (limit + requested);
    }
    case OffloadRule::SSP:
      return -static_cast<double>(load.service_tasks(j, s));
    case OffloadRule::RCRP:
      return rcrp_score(p.rcrp_shape, util);
  }
  return 0.0;
}

}  // namespace

std::string RuleSet::name() const {
  return std::string(lookup_name(kPlacementNames, placement)) + "-" + lookup_name(kOffloadNames, offload) + "-" +
         lookup_name(kAllocationNames, allocation);
}

RuleSet RuleSet::parse(const std::string& text) {
  const auto a = text.find('-');
  const auto b = a == std::string::npos ? a : text.find('-', a + 1);
  if (a == std::string::npos || b == std::string::npos || text.find('-', b + 1) != std::string::npos) {
    throw std::invalid_argument("rule set '" + text + "' must look like PLACE-OFFLOAD-ALLOC, e.g. AM-MRP-EA");
  }
  RuleSet r;
  r.placement = lookup_value(kPlacementNames, text.substr(0, a), "placement");
  r.offload = lookup_value(kOffloadNames, text.substr(a + 1, b - a - 1), "offloading");
  r.allocation = lookup_value(kAllocationNames, text.substr(b + 1), "allocation");
  return r;
}

std::vector<RuleSet> RuleSet::all() {
  std::vector<RuleSet> out;
  for (const auto& [p, pn] : kPlacementNames)
    for (const auto& [o, on] : kOffloadNames)
      for (const auto& [a, an] : kAllocationNames) out.push_back({p, o, a});
  return out;
}

DemandWindow::DemandWindow(int num_edges, int num_services, int window)
    : window_(window), total_(num_edges, num_services, 0.0) {
  if (window < 1) throw std::invalid_argument("demand window must span at least one slot");
}

void DemandWindow::push(std::span<const Task> arrivals) {
  Grid<double> slot(total_.rows(), total_.cols(), 0.0);
  for (const auto& t : arrivals) slot(t.origin_edge, t.service) += t.workload;
  history_.push_back(std::move(slot));
  if (static_cast<int>(history_.size()) > window_) history_.pop_front();
  // Re-summed each slot so the totals never drift.
  total_.fill(0.0);
  for (const auto& g : history_)
    for (int i = 0; i < total_.rows(); ++i)
      for (int s = 0; s < total_.cols(); ++s) total_(i, s) += g(i, s);
}

void DemandWindow::clear() {
  history_.clear();
  total_.fill(0.0);
}

double DemandWindow::service_total(int service) const {
  double sum = 0.0;
  for (int i = 0; i < total_.rows(); ++i) sum += total_(i, service);
  return sum;
}

double DemandWindow::edge_total(int edge) const {
  double sum = 0.0;
  for (double v : total_.row(edge)) sum += v;
  return sum;
}

bool DemandWindow::empty() const {
  for (double v : total_.data())
    if (v > 0.0) return false;
  return true;
}

double ServerLoad::utilization(int server, double horizon) const {
  return std::clamp(queued[server] / (capacity[server] * horizon), 0.0, 1.0);
}

ServerLoad load_snapshot(const ClusterConfig& cfg, const SchedulingState& state) {
  const int servers = cfg.num_servers();
  ServerLoad load;
  load.queued.assign(static_cast<std::size_t>(servers), 0.0);
  load.service_queued = Grid<double>(servers, cfg.num_services, 0.0);
  load.service_tasks = Grid<int>(servers, cfg.num_services, 0);
  load.capacity.assign(static_cast<std::size_t>(servers), cfg.edge_cpu);
  load.capacity[cfg.cloud()] = cfg.cloud_cpu;
  auto add = [&](int server, const ActiveTask& a) {
    load.queued[server] += a.remaining;
    load.service_queued(server, a.task.service) += a.remaining;
    load.service_tasks(server, a.task.service) += 1;
  };
  for (int i = 0; i < cfg.num_edges; ++i)
    for (const auto& a : state.queues[i])
      if (!a.awaiting_dispatch) add(i, a);
  for (const auto& a : state.cloud_queue) add(cfg.cloud(), a);
  for (const auto& a : state.in_transit) add(a.location, a);
  return load;
}

Grid<std::uint8_t> place(PlacementRule rule, const ClusterConfig& cfg, const Grid<std::uint8_t>& current,
                         const DemandWindow& demand, const RuleParams& params) {
  if (demand.empty()) return current;
  switch (rule) {
    case PlacementRule::AM:
      return place_am(cfg, current, demand);
    case PlacementRule::TopK:
      return place_topk(cfg, current, demand, params);
    case PlacementRule::HPA:
      return place_hpa(cfg, current, demand, params);
  }
  return current;
}

Grid<int> offload(OffloadRule rule, const ClusterConfig& cfg, const Grid<std::uint8_t>& placement,
                  const Grid<double>& allocation, const ServerLoad& load, const RuleParams& params) {
  Grid<int> y(cfg.num_edges, cfg.num_services, cfg.cloud());
  for (int s = 0; s < cfg.num_services; ++s) {
    int best = -1;
    double best_score = 0.0;
    for (int j = 0; j < cfg.num_edges; ++j) {
      if (!placement(j, s)) continue;
      const double score = offload_score(rule, load, allocation, j, s, params);
      if (best < 0 || score > best_score) {
        best = j;
        best_score = score;
      }
    }
    if (best < 0) continue;
    // Scores do not depend on the origin, so every origin picks the same edge.
    for (int i = 0; i < cfg.num_edges; ++i) y(i, s) = best;
  }
  return y;
}

std::vector<double> waterfill(std::span<const double> demand, double capacity) {
  const std::size_t k = demand.size();
  std::vector<double> z(k, 0.0);
  const double total = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (total <= capacity) {
    std::copy(demand.begin(), demand.end(), z.begin());
    return z;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return demand[a] < demand[b]; });
  double remaining = capacity;
  for (std::size_t pos = 0; pos < k; ++pos) {
    const double level = remaining / static_cast<double>(k - pos);
    const std::size_t s = order[pos];
    if (demand[s] <= level) {
      z[s] = demand[s];
      remaining -= demand[s];
    } else {
      for (std::size_t rest = pos; rest < k; ++rest) z[order[rest]] = level;
      break;
    }
  }
  return z;
}

Grid<double> allocate(AllocationRule rule, const ClusterConfig& cfg, const Grid<double>& demand) {
  Grid<double> z(cfg.num_edges, cfg.num_services, 0.0);
  for (int i = 0; i < cfg.num_edges; ++i) {
    std::vector<int> active;
    for (int s = 0; s < cfg.num_services; ++s)
      if (demand(i, s) > 0.0) active.push_back(s);
    if (active.empty()) continue;
    const double cap = cfg.edge_cpu;
    switch (rule) {
      case AllocationRule::EA:
        for (int s : active) z(i, s) = cap / static_cast<double>(active.size());
        break;
      case AllocationRule::RR: {
        const int units = static_cast<int>(std::floor(cap + 1e-9));
        for (int u = 0; u < units; ++u) z(i, active[u % active.size()]) += 1.0;
        const double rest = cap - units;
        if (rest > 1e-9) z(i, active[units % active.size()]) += rest;
        break;
      }
      case AllocationRule::PF: {
        std::vector<double> d;
        for (int s : active) d.push_back(demand(i, s));
        const auto share = waterfill(d, cap);
        for (std::size_t k = 0; k < active.size(); ++k) z(i, active[k]) = share[k];
        break;
      }
    }
  }
  return z;
}

double rcrp_score(const std::vector<std::pair<double, double>>& shape, double utilization) {
  if (shape.empty()) return 0.0;
  if (utilization <= shape.front().first) return shape.front().second;
  for (std::size_t k = 1; k < shape.size(); ++k) {
    const auto [x0, y0] = shape[k - 1];
    const auto [x1, y1] = shape[k];
    if (utilization <= x1) {
      if (x1 <= x0) return y1;
      return y0 + (y1 - y0) * (utilization - x0) / (x1 - x0);
    }
  }
  return shape.back().second;
}

}  // namespace edgetimer
