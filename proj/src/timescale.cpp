#include "edgetimer/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edgetimer {

bool gate(Layer layer, int edge, bool update, bool has_previous, const Decisions& candidate, Decisions& executed) {
  switch (layer) {
    case Layer::Placement:
      return gate_row<std::uint8_t>(update, has_previous, candidate.placement.row(edge), executed.placement.row(edge));
    case Layer::Offloading:
      return gate_row<int>(update, has_previous, candidate.route.row(edge), executed.route.row(edge));
    case Layer::Allocation:
      return gate_row<double>(update, has_previous, candidate.allocation.row(edge), executed.allocation.row(edge));
  }
  return false;
}

std::string baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::SST:
      return "sst";
    case BaselineKind::SMT:
      return "smt";
    case BaselineKind::DT:
      return "dt";
    case BaselineKind::WT:
      return "wt";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& name) {
  for (auto k : {BaselineKind::SST, BaselineKind::SMT, BaselineKind::DT, BaselineKind::WT}) {
    std::string upper = baseline_name(k);
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    if (name == baseline_name(k) || name == upper) return k;
  }
  throw std::invalid_argument("unknown baseline '" + name + "'");
}

void validate_baseline(BaselineKind kind, const BaselineParams& params) {
  if (kind == BaselineKind::SMT) {
    for (int p : params.periods)
      if (p <= 0) throw std::invalid_argument("SMT periods must be positive");
  }
  if (kind == BaselineKind::DT && !(params.delay_threshold > 0.0)) {
    throw std::invalid_argument("DT delay threshold must be positive");
  }
  if (kind == BaselineKind::WT && !(params.workload_threshold > 0.0)) {
    throw std::invalid_argument("WT workload threshold must be positive");
  }
}

UpdateAction baseline_policy(BaselineKind kind, const BaselineParams& params, int slot, const EdgeProbe& probe) {
  validate_baseline(kind, params);
  switch (kind) {
    case BaselineKind::SST:
      return UpdateAction::all(true);
    case BaselineKind::SMT: {
      UpdateAction a;
      for (Layer l : kLayers) a.set(l, slot % params.periods[index_of(l)] == 0);
      return a;
    }
    case BaselineKind::DT:
      return UpdateAction::all(probe.mean_delay > params.delay_threshold);
    case BaselineKind::WT:
      return UpdateAction::all(probe.queued_workload > params.workload_threshold);
  }
  return {};
}

SmtSearchResult smt_grid_search(const std::vector<int>& periods,
                                const std::function<double(const std::array<int, kNumLayers>&)>& evaluate) {
  if (periods.empty()) throw std::invalid_argument("SMT period set is empty");
  std::vector<int> sorted = periods;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  SmtSearchResult out;
  bool first = true;
  for (int p1 : sorted)
    for (int p2 : sorted)
      for (int p3 : sorted) {
        const std::array<int, kNumLayers> triple{p1, p2, p3};
        const double profit = evaluate(triple);
        out.evaluated.emplace_back(triple, profit);
        if (first || profit > out.best_profit) {
          out.best = triple;
          out.best_profit = profit;
          first = false;
        }
      }
  return out;
}

ThresholdSearchResult threshold_search(std::vector<double> thresholds, const std::function<double(double)>& evaluate) {
  if (thresholds.empty()) throw std::invalid_argument("threshold set is empty");
  std::sort(thresholds.begin(), thresholds.end());
  ThresholdSearchResult out;
  bool first = true;
  for (double th : thresholds) {
    const double profit = evaluate(th);
    out.evaluated.emplace_back(th, profit);
    if (first || profit > out.best_profit) {
      out.best = th;
      out.best_profit = profit;
      first = false;
    }
  }
  return out;
}

}  // namespace edgetimer
