#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "edgetimer/timescale.hpp"

using namespace edgetimer;

namespace {
Decisions filled(const ClusterConfig& cfg, std::uint8_t x, int y, double z) {
  auto d = Decisions::empty(cfg);
  d.placement.fill(x);
  d.route.fill(y);
  d.allocation.fill(z);
  return d;
}
}  // namespace

TEST_CASE("gate adopts or carries forward one row") {
  auto cfg = ClusterConfig::layout(2, 2, 5.0, 50.0);
  const auto cand = filled(cfg, 1, 1, 2.0);
  const auto prev = filled(cfg, 0, 0, 1.0);

  auto exec = prev;
  CHECK(gate(Layer::Placement, 0, true, true, cand, exec));
  CHECK(exec.placement(0, 0) == 1);
  CHECK(exec.placement(0, 1) == 1);
  CHECK(exec.placement(1, 0) == 0);   // other edge untouched
  CHECK(exec.route == prev.route);

  exec = prev;
  CHECK_FALSE(gate(Layer::Offloading, 1, false, true, cand, exec));
  CHECK(exec == prev);

  exec = prev;
  CHECK(gate(Layer::Allocation, 1, false, false, cand, exec));   // nothing to carry forward
  CHECK(exec.allocation(1, 0) == 2.0);
  CHECK(exec.allocation(0, 0) == 1.0);
}

TEST_CASE("gating one layer never touches another") {
  auto cfg = ClusterConfig::layout(3, 3, 5.0, 50.0);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto cand = filled(cfg, 1, trial % 4, 0.5 * trial);
    auto exec = filled(cfg, 0, 0, 0.0);
    const auto before = exec;
    const int edge = trial % 3;
    gate(Layer::Offloading, edge, (rng() & 1) != 0, true, cand, exec);
    CHECK(exec.placement == before.placement);
    CHECK(exec.allocation == before.allocation);
  }
}

TEST_CASE("baseline policies") {
  const EdgeProbe idle{};
  BaselineParams p;
  for (int t : {0, 1, 17, 999}) CHECK(baseline_policy(BaselineKind::SST, p, t, idle) == UpdateAction::all(true));

  p.periods = {50, 10, 1};
  const auto a = baseline_policy(BaselineKind::SMT, p, 20, idle);
  CHECK(a.bits == std::array<std::uint8_t, 3>{0, 1, 1});
  CHECK(baseline_policy(BaselineKind::SMT, p, 0, idle) == UpdateAction::all(true));
  CHECK(baseline_policy(BaselineKind::SMT, p, 100, idle) == UpdateAction::all(true));

  p.delay_threshold = 2.0;
  CHECK(baseline_policy(BaselineKind::DT, p, 5, {2.5, 0.0}) == UpdateAction::all(true));
  CHECK(baseline_policy(BaselineKind::DT, p, 5, {2.0, 0.0}) == UpdateAction::all(false));

  p.workload_threshold = std::numeric_limits<double>::infinity();
  for (int t = 1; t < 50; ++t)
    CHECK(baseline_policy(BaselineKind::WT, p, t, {100.0, 1e12}) == UpdateAction::all(false));
}

TEST_CASE("baseline parameters are validated") {
  BaselineParams p;
  p.periods = {1, 0, 1};
  CHECK_THROWS_AS(validate_baseline(BaselineKind::SMT, p), std::invalid_argument);
  CHECK_NOTHROW(validate_baseline(BaselineKind::SST, p));
  p = {};
  p.delay_threshold = 0.0;
  CHECK_THROWS_AS(baseline_policy(BaselineKind::DT, p, 0, {}), std::invalid_argument);
  p = {};
  p.workload_threshold = -1.0;
  CHECK_THROWS_AS(validate_baseline(BaselineKind::WT, p), std::invalid_argument);
  CHECK(parse_baseline("SMT") == BaselineKind::SMT);
  CHECK(parse_baseline("wt") == BaselineKind::WT);
  CHECK_THROWS_AS(parse_baseline("xyz"), std::invalid_argument);
}

TEST_CASE("SMT grid search") {
  SUBCASE("single period") {
    const auto r = smt_grid_search({10}, [](const auto&) { return 1.0; });
    CHECK(r.best == std::array<int, 3>{10, 10, 10});
    CHECK(r.evaluated.size() == 1);
  }
  SUBCASE("exhaustive over 64 triples") {
    auto f = [](const std::array<int, 3>& p) {
      return -std::abs(std::log10(p[0]) - 1) - std::abs(std::log10(p[1]) - 2) - std::abs(std::log10(p[2]));
    };
    const auto r = smt_grid_search({100, 1, 50, 10}, f);
    CHECK(r.evaluated.size() == 64);
    double best = -1e300;
    std::array<int, 3> arg{};
    for (const auto& [t, v] : r.evaluated) {
      CHECK(v == f(t));
      if (v > best) best = v, arg = t;
    }
    CHECK(r.best == arg);
    CHECK(r.best == std::array<int, 3>{10, 100, 1});
  }
  SUBCASE("ties go to the smallest triple") {
    const auto r = smt_grid_search({100, 10, 1, 50}, [](const auto& p) { return p[2] == 1 ? 0.0 : -1.0; });
    CHECK(r.best == std::array<int, 3>{1, 1, 1});
    const auto s = smt_grid_search({100, 10, 50}, [](const auto& p) { return p[0] >= 50 ? 5.0 : 1.0; });
    CHECK(s.best == std::array<int, 3>{50, 10, 10});
  }
  CHECK_THROWS_AS(smt_grid_search({}, [](const auto&) { return 0.0; }), std::invalid_argument);
}

TEST_CASE("threshold search") {
  const auto r = threshold_search({5.0, 1.0, 3.0}, [](double th) { return th >= 3.0 ? 2.0 : 1.0; });
  CHECK(r.best == 3.0);
  CHECK(r.best_profit == 2.0);
  CHECK(r.evaluated.size() == 3);
  CHECK(r.evaluated.front().first == 1.0);
}
