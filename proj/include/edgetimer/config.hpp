#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace edgetimer {

/// Environment constants: topology, capacities, service catalog and the
/// price/cost coefficients. Server index `num_edges` denotes the cloud.
struct ClusterConfig {
  int num_edges = 12;
  int num_services = 12;

  double edge_cpu = 4.0;   // CPU-units per edge
  double edge_mem = 8.0;   // memory-units per edge
  double cloud_cpu = 8.0;
  double cloud_mem = 16.0;

  std::vector<double> service_mem_footprint;    // one entry per service
  std::vector<std::vector<double>> distance;    // (N+1)x(N+1) km, last row/col is the cloud

  double unit_price_base = 25.0;      // money per CPU-unit completed within budget
  double place_cost_per_km = 0.3;
  double offload_cost_per_km = 0.1;
  double realloc_cost_per_unit = 0.5;
  double slot_length = 1.0;           // seconds

  // Transmission model: delay = ceil(distance / link_km_per_slot) slots between
  // distinct servers, plus cloud_rtt_slots whenever the cloud is an endpoint.
  double link_km_per_slot = 5.0;
  int cloud_rtt_slots = 2;

  // Fractions of a task's delay budget granted to transmission (u signal) and
  // to computation (l signal).
  double tx_budget_fraction = 0.25;
  double compute_budget_fraction = 0.75;

  int cloud() const { return num_edges; }
  int num_servers() const { return num_edges + 1; }

  /// Unit price p_s(t). Constant in this model; the arguments keep the hook.
  double price(int /*service*/, int /*slot*/) const { return unit_price_base; }

  /// Slots a task spends between leaving `from` and joining `to`'s queue.
  int transmission_slots(int from, int to) const;

  /// Twelve edges on a grid spanning a 5 km x 5 km region, one cloud, the
  /// 4 CPU / 8 GB edge and 8 CPU / 16 GB cloud servers and the 25 / 0.3 / 0.1 /
  /// 0.5 price and cost weights. Footprints and the cloud distance are
  /// synthetic (the reference setup does not state them).
  static ClusterConfig reference();

  /// Places `num_edges` edges on a square grid spanning `region_km` and puts
  /// the cloud `cloud_km` away from every edge.
  static ClusterConfig layout(int num_edges, int num_services, double region_km, double cloud_km);
};

struct ConfigIssue {
  std::string field;    // dotted path, e.g. "distance[0][2]"
  std::string message;
};

/// Collects every violated invariant; empty result means the config is valid.
std::vector<ConfigIssue> validate_config(const ClusterConfig& cfg);

/// Throws std::invalid_argument listing all issues when the config is invalid.
void require_valid(const ClusterConfig& cfg);

/// Stable 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace edgetimer
