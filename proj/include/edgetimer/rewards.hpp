#pragma once

#include <span>

#include "edgetimer/types.hpp"

namespace edgetimer {

struct RewardCoefficients {
  double a = 1.0;   // placement cost
  double b = 1.0;   // unserved demand
  double c = 1.0;   // offloading cost
  double d = 1.0;   // offloading delay
  double e = -1.0;  // workload variance (negative: variance is penalized)
  double f = 1.0;   // allocation cost
  double g = 1.0;   // allocation delay
  double alpha = 1.0;
  double beta = 1.0;
  double sigma = 0.5;
  double phi = 1.0;
  double budget_unserved = 0.0;
  double budget_delay = 0.0;
  double epsilon = 1e-3;   // denominator floor
};

/// Per-slot layer rewards, summed over edges. Costs are the charged (gated)
/// costs of the ledger, so a held layer contributes no cost.
double layer1_reward(const SlotLedger& ledger, const RewardCoefficients& k);
double layer2_reward(const SlotLedger& ledger, const RewardCoefficients& k);
double layer3_reward(const SlotLedger& ledger, const RewardCoefficients& k);
double layer_reward(Layer layer, const SlotLedger& ledger, const RewardCoefficients& k);

/// Per-edge terms, exposed for tests.
double layer1_edge_term(const EdgeLedger& e, const RewardCoefficients& k);
double layer2_edge_term(const EdgeLedger& e, const RewardCoefficients& k);
double layer3_edge_term(const EdgeLedger& e, const RewardCoefficients& k);

struct SubObjectives {
  double p1 = 0.0;   // alpha d - gated placement cost
  double p2 = 0.0;   // beta u - sigma v - gated offloading cost
  double p3 = 0.0;   // phi l - gated allocation cost
};

SubObjectives subobjective_report(std::span<const SlotLedger> ledgers, const RewardCoefficients& k);

}  // namespace edgetimer
