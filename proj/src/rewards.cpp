#include "edgetimer/rewards.hpp"

#include <algorithm>

namespace edgetimer {

namespace {

double charged(const EdgeLedger& e, Layer l) {
  switch (l) {
    case Layer::Placement:
      return e.action.bits[0] * e.place_cost;
    case Layer::Offloading:
      return e.action.bits[1] * e.offload_cost;
    case Layer::Allocation:
      return e.action.bits[2] * e.alloc_cost;
  }
  return 0.0;
}

double excess_delay(const EdgeLedger& e, const RewardCoefficients& k) {
  return std::max(0.0, e.late_tasks - k.budget_delay);
}

}  // namespace

double layer1_edge_term(const EdgeLedger& e, const RewardCoefficients& k) {
  const double denom = k.a * charged(e, Layer::Placement) + k.b * std::max(0.0, e.unserved - k.budget_unserved);
  return 1.0 / std::max(k.epsilon, denom);
}

double layer2_edge_term(const EdgeLedger& e, const RewardCoefficients& k) {
  const double denom = k.c * charged(e, Layer::Offloading) + k.d * excess_delay(e, k);
  return 1.0 / std::max(k.epsilon, denom);
}

double layer3_edge_term(const EdgeLedger& e, const RewardCoefficients& k) {
  const double denom = k.f * charged(e, Layer::Allocation) + k.g * excess_delay(e, k);
  return e.served / std::max(k.epsilon, denom);
}

double layer1_reward(const SlotLedger& ledger, const RewardCoefficients& k) {
  double r = 0.0;
  for (const auto& e : ledger.edges) r += layer1_edge_term(e, k);
  return r;
}

double layer2_reward(const SlotLedger& ledger, const RewardCoefficients& k) {
  double r = 0.0;
  for (const auto& e : ledger.edges) r += layer2_edge_term(e, k);
  return r + k.e * ledger.signals.workload_variance;
}

double layer3_reward(const SlotLedger& ledger, const RewardCoefficients& k) {
  double r = 0.0;
  for (const auto& e : ledger.edges) r += layer3_edge_term(e, k);
  return r;
}

double layer_reward(Layer layer, const SlotLedger& ledger, const RewardCoefficients& k) {
  switch (layer) {
    case Layer::Placement:
      return layer1_reward(ledger, k);
    case Layer::Offloading:
      return layer2_reward(ledger, k);
    case Layer::Allocation:
      return layer3_reward(ledger, k);
  }
  return 0.0;
}

SubObjectives subobjective_report(std::span<const SlotLedger> ledgers, const RewardCoefficients& k) {
  SubObjectives out;
  for (const auto& l : ledgers) {
    out.p1 += k.alpha * l.signals.covered_demand;
    out.p2 += k.beta * l.signals.offload_in_budget - k.sigma * l.signals.workload_variance;
    out.p3 += k.phi * l.signals.compute_in_budget;
    for (const auto& e : l.edges) {
      out.p1 -= charged(e, Layer::Placement);
      out.p2 -= charged(e, Layer::Offloading);
      out.p3 -= charged(e, Layer::Allocation);
    }
  }
  return out;
}

}  // namespace edgetimer
