#pragma once

#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "edgetimer/types.hpp"

namespace edgetimer {

enum class PlacementRule { HPA, TopK, AM };
enum class OffloadRule { MRP, LRP, RLP, SSP, RCRP };
enum class AllocationRule { PF, RR, EA };

/// A placement-offloading-allocation rule triple such as "AM-MRP-EA".
struct RuleSet {
  PlacementRule placement = PlacementRule::AM;
  OffloadRule offload = OffloadRule::MRP;
  AllocationRule allocation = AllocationRule::EA;

  std::string name() const;
  static RuleSet parse(const std::string& text);   // throws std::invalid_argument
  static std::vector<RuleSet> all();                // the 45 combinations
  bool operator==(const RuleSet&) const = default;
};

struct RuleParams {
  int window = 10;                 // trailing slots of demand statistics
  double hpa_scale_up = 0.8;
  double hpa_scale_down = 0.3;
  double hpa_replica_cpu = 0.0;    // 0: edge_cpu / 2
  int topk = 0;                    // 0: floor(edge_mem / mean footprint)
  double util_horizon = 10.0;      // slots of queued work that count as a full server
  // Requested-to-capacity shape: (utilization, score) breakpoints.
  std::vector<std::pair<double, double>> rcrp_shape{{0.0, 0.0}, {0.5, 10.0}, {1.0, 0.0}};
};

/// Arrived workload per (edge, service) over a trailing window of slots.
class DemandWindow {
 public:
  DemandWindow(int num_edges, int num_services, int window);

  void push(std::span<const Task> arrivals);
  void clear();

  double demand(int edge, int service) const { return total_(edge, service); }
  double service_total(int service) const;
  double edge_total(int edge) const;
  bool empty() const;
  int slots() const { return static_cast<int>(history_.size()); }
  int window() const { return window_; }

 private:
  int window_;
  std::deque<Grid<double>> history_;
  Grid<double> total_;
};

/// Work queued at, or travelling to, each server. Index num_edges is the cloud.
struct ServerLoad {
  std::vector<double> queued;
  Grid<double> service_queued;   // (N+1) x S
  Grid<int> service_tasks;       // (N+1) x S
  std::vector<double> capacity;

  double utilization(int server, double horizon) const;
};

ServerLoad load_snapshot(const ClusterConfig& cfg, const SchedulingState& state);

/// Candidate placement x~. Always satisfies the per-edge memory limit.
Grid<std::uint8_t> place(PlacementRule rule, const ClusterConfig& cfg, const Grid<std::uint8_t>& current,
                         const DemandWindow& demand, const RuleParams& params = {});

/// Candidate routing y~ under `placement`: the best-scoring edge holding the
/// service (ties to the lowest index), or the cloud when no edge holds it.
Grid<int> offload(OffloadRule rule, const ClusterConfig& cfg, const Grid<std::uint8_t>& placement,
                  const Grid<double>& allocation, const ServerLoad& load, const RuleParams& params = {});

/// Candidate allocation z~ over services with positive `demand` on each edge.
Grid<double> allocate(AllocationRule rule, const ClusterConfig& cfg, const Grid<double>& demand);

/// Capped waterfilling: maximizes sum log z subject to sum z <= capacity and
/// z_k <= demand_k.
std::vector<double> waterfill(std::span<const double> demand, double capacity);

/// Piecewise-linear interpolation through the RCRP breakpoints.
double rcrp_score(const std::vector<std::pair<double, double>>& shape, double utilization);

}  // namespace edgetimer
