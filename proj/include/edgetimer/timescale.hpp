#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgetimer/types.hpp"

namespace edgetimer {

/// Gating for one edge row: adopts the candidate row when `update` is set or
/// no previous decision exists, otherwise keeps `executed` (which holds the
/// previous decision). Returns the effective bit.
template <class T>
bool gate_row(bool update, bool has_previous, std::span<const T> candidate, std::span<T> executed) {
  const bool adopt = update || !has_previous;
  if (adopt) {
    for (std::size_t k = 0; k < candidate.size(); ++k) executed[k] = candidate[k];
  }
  return adopt;
}

/// Gates one layer of one edge: `executed` must hold the previous decision
/// for that layer on entry.
bool gate(Layer layer, int edge, bool update, bool has_previous, const Decisions& candidate, Decisions& executed);

enum class BaselineKind { SST, SMT, DT, WT };
std::string baseline_name(BaselineKind k);
BaselineKind parse_baseline(const std::string& name);

struct BaselineParams {
  std::array<int, kNumLayers> periods{1, 1, 1};   // SMT
  double delay_threshold = 1.0;                   // DT, slots
  double workload_threshold = 1.0;                // WT, CPU-unit * slots
};

/// Throws std::invalid_argument for non-positive periods or thresholds.
void validate_baseline(BaselineKind kind, const BaselineParams& params);

/// What a trigger baseline sees of one edge at decision time.
struct EdgeProbe {
  double mean_delay = 0.0;        // mean slots already spent by tasks waiting at the edge
  double queued_workload = 0.0;   // remaining work waiting at the edge, including new arrivals
};

UpdateAction baseline_policy(BaselineKind kind, const BaselineParams& params, int slot, const EdgeProbe& probe);

/// Exhaustive search over periods^3 maximizing `evaluate`. Ties keep the
/// lexicographically smallest triple.
struct SmtSearchResult {
  std::array<int, kNumLayers> best{1, 1, 1};
  double best_profit = 0.0;
  std::vector<std::pair<std::array<int, kNumLayers>, double>> evaluated;
};
SmtSearchResult smt_grid_search(const std::vector<int>& periods,
                                const std::function<double(const std::array<int, kNumLayers>&)>& evaluate);

/// One-dimensional threshold tuning for DT/WT with the same tie rule
/// (smallest threshold wins).
struct ThresholdSearchResult {
  double best = 0.0;
  double best_profit = 0.0;
  std::vector<std::pair<double, double>> evaluated;
};
ThresholdSearchResult threshold_search(std::vector<double> thresholds, const std::function<double(double)>& evaluate);

}  // namespace edgetimer
