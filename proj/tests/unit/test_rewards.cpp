#include <doctest.h>

#include <cmath>
#include <random>

#include "edgetimer/rewards.hpp"

using namespace edgetimer;

namespace {
SlotLedger ledger(int edges) {
  SlotLedger l;
  l.edges.resize(static_cast<std::size_t>(edges));
  for (auto& e : l.edges) e.action = UpdateAction::all(true);
  return l;
}
}  // namespace

TEST_CASE("layer-1 reward") {
  RewardCoefficients k;
  auto l = ledger(1);
  l.edges[0].place_cost = 2.0;
  l.edges[0].unserved = 3.0;
  CHECK(layer1_reward(l, k) == doctest::Approx(0.2));

  auto zero = ledger(3);
  k.budget_unserved = 1.5;
  for (auto& e : zero.edges) e.unserved = 1.5;
  CHECK(layer1_reward(zero, k) == doctest::Approx(3 / k.epsilon));

  k = {};
  auto one = ledger(1);
  one.edges[0].place_cost = 4.0;
  const double r4 = layer1_reward(one, k);
  one.edges[0].place_cost = 8.0;
  CHECK(layer1_reward(one, k) == doctest::Approx(r4 / 2));
}

TEST_CASE("held layers contribute no cost") {
  RewardCoefficients k;
  auto l = ledger(1);
  l.edges[0].place_cost = 100.0;
  l.edges[0].offload_cost = 100.0;
  l.edges[0].alloc_cost = 100.0;
  l.edges[0].served = 1.0;
  l.edges[0].action = UpdateAction::all(false);
  CHECK(layer1_reward(l, k) == doctest::Approx(1 / k.epsilon));
  CHECK(layer2_reward(l, k) == doctest::Approx(1 / k.epsilon));
  CHECK(layer3_reward(l, k) == doctest::Approx(1 / k.epsilon));
}

TEST_CASE("layer-2 reward") {
  RewardCoefficients k;
  auto l = ledger(2);
  CHECK(layer2_reward(l, k) == doctest::Approx(2 / k.epsilon));   // v = 0
  l.signals.workload_variance = 4.0;
  CHECK(layer2_reward(l, k) - 2 / k.epsilon == doctest::Approx(-4.0));

  auto m = ledger(1);
  m.edges[0].offload_cost = 1.5;
  m.edges[0].late_tasks = 2;
  k.budget_delay = 1.0;
  CHECK(layer2_reward(m, k) == doctest::Approx(1 / 2.5));
  // Under-budget delay is floored at zero.
  k.budget_delay = 5.0;
  CHECK(layer2_reward(m, k) == doctest::Approx(1 / 1.5));
}

TEST_CASE("layer-3 reward") {
  RewardCoefficients k;
  auto l = ledger(1);
  CHECK(layer3_reward(l, k) == 0.0);
  l.edges[0].served = 6.0;
  l.edges[0].alloc_cost = 2.0;
  l.edges[0].late_tasks = 1;
  CHECK(layer3_reward(l, k) == doctest::Approx(2.0));
  l.edges[0].served = 12.0;
  CHECK(layer3_reward(l, k) == doctest::Approx(4.0));
}

TEST_CASE("rewards are finite and monotone in the charged cost") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  RewardCoefficients k;
  for (int trial = 0; trial < 1000; ++trial) {
    auto l = ledger(3);
    for (auto& e : l.edges) {
      e.place_cost = u(rng);
      e.offload_cost = u(rng);
      e.alloc_cost = u(rng);
      e.unserved = u(rng) * (trial % 2);
      e.late_tasks = static_cast<int>(u(rng)) * (trial % 3 == 0);
      e.served = u(rng);
      for (auto& b : e.action.bits) b = static_cast<std::uint8_t>(rng() & 1);
    }
    l.signals.workload_variance = u(rng);
    for (Layer layer : kLayers) {
      const double before = layer_reward(layer, l, k);
      CHECK(std::isfinite(before));
      auto more = l;
      for (auto& e : more.edges) {
        e.place_cost += 1.0;
        e.offload_cost += 1.0;
        e.alloc_cost += 1.0;
      }
      CHECK(layer_reward(layer, more, k) <= before);
      CHECK(layer_reward(layer, l, k) == before);
    }
  }
}

TEST_CASE("sub-objective report") {
  RewardCoefficients k;
  CHECK(subobjective_report({}, k).p1 == 0.0);
  std::vector<SlotLedger> idle(5, ledger(2));
  const auto z = subobjective_report(idle, k);
  CHECK(z.p1 == 0.0);
  CHECK(z.p2 == 0.0);
  CHECK(z.p3 == 0.0);

  std::vector<SlotLedger> run(10, ledger(2));
  for (auto& l : run) {
    l.signals.covered_demand = 5.0;
    l.signals.offload_in_budget = 3.0;
    l.signals.workload_variance = 2.0;
    l.signals.compute_in_budget = 1.0;
    for (auto& e : l.edges) {
      e.action = UpdateAction::all(false);
      e.place_cost = 7.0;
      e.offload_cost = 1.0;
    }
  }
  auto r = subobjective_report(run, k);
  CHECK(r.p1 == doctest::Approx(50.0));
  CHECK(r.p2 == doctest::Approx(10 * (3.0 - 0.5 * 2.0)));
  CHECK(r.p3 == doctest::Approx(10.0));

  k.sigma = 0.0;
  for (auto& l : run)
    for (auto& e : l.edges) e.action.set(Layer::Offloading, true);
  r = subobjective_report(run, k);
  CHECK(r.p2 == doctest::Approx(10 * 3.0 - 10 * 2 * 1.0));
}
