#include <doctest.h>

#include <cmath>

#include "edgetimer/simenv.hpp"
#include "scenarios.hpp"

using namespace edgetimer;

namespace {

ClusterConfig two_edges() {
  auto cfg = ClusterConfig::layout(2, 2, 2.0, 10.0);   // edges 2 km apart
  return cfg;
}

Task task(std::int64_t id, int service, int slot, double workload, int budget, int edge) {
  Task t;
  t.id = id;
  t.service = service;
  t.arrival_slot = slot;
  t.workload = workload;
  t.delay_budget = budget;
  t.origin_edge = edge;
  return t;
}

JointAction all(const ClusterConfig& cfg, bool v) { return JointAction(cfg.num_edges, UpdateAction::all(v)); }

}  // namespace

TEST_CASE("idle slot leaves an all-zero ledger") {
  const auto cfg = two_edges();
  Environment env(cfg);
  const auto led = env.step(Decisions::empty(cfg), all(cfg, true), {});
  for (const auto& e : led.edges) {
    CHECK(e.revenue == 0.0);
    CHECK(e.place_cost + e.offload_cost + e.alloc_cost == 0.0);
    CHECK(e.profit == 0.0);
    CHECK(e.arrived + e.served + e.violated + e.queued == 0.0);
  }
  CHECK(led.signals.covered_demand == 0.0);
  CHECK(led.signals.offload_in_budget == 0.0);
  CHECK(led.signals.workload_variance == 0.0);
  CHECK(led.signals.compute_in_budget == 0.0);
  CHECK(env.slot() == 1);
}

TEST_CASE("a two-unit task on one CPU-unit finishes after two slots") {
  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.placement(0, 0) = 1;
  d.route(0, 0) = 0;
  d.allocation(0, 0) = 1.0;
  const Task t = task(0, 0, 0, 2.0, 3, 0);
  const auto first = env.step(d, all(cfg, true), std::span<const Task>(&t, 1));
  CHECK(first.completions.empty());
  CHECK(first.edges[0].queued == 1.0);
  const auto second = env.step(d, all(cfg, false), {});
  REQUIRE(second.completions.size() == 1);
  CHECK(second.completions[0].delay == 2);
  CHECK(second.completions[0].within_budget);
  CHECK(second.edges[0].served == 2.0);
  CHECK(second.edges[0].revenue == 50.0);
}

TEST_CASE("routing to a server without the service is a hard error") {
  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.route(0, 0) = 1;   // edge 1 does not hold service 0
  const Task t = task(0, 0, 0, 1.0, 3, 0);
  CHECK_THROWS_AS(env.step(d, all(cfg, true), std::span<const Task>(&t, 1)), InfeasibleDecision);
}

TEST_CASE("stale routes wait when blocking is allowed") {
  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.route(0, 0) = 1;
  const Task t = task(0, 0, 0, 1.0, 3, 0);
  const auto led = env.step(d, all(cfg, true), std::span<const Task>(&t, 1), {.allow_blocked_routes = true});
  CHECK(led.edges[0].blocked_tasks == 1);
  CHECK(env.state().queues[0].size() == 1);
}

TEST_CASE("capacity violations are rejected") {
  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.allocation(0, 0) = cfg.edge_cpu + 1.0;
  CHECK_THROWS_AS(env.step(d, all(cfg, true), {}), InfeasibleDecision);
}

TEST_CASE("revenue") {
  const auto cfg = two_edges();
  const double two[] = {2.0, 0.0};
  const double none[] = {0.0, 0.0};
  CHECK(revenue(cfg, 0, two) == 50.0);
  CHECK(revenue(cfg, 0, none) == 0.0);

  // One within budget (1 unit), one late: only the first earns.
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.placement(0, 0) = 1;
  d.route(0, 0) = 0;
  d.allocation(0, 0) = 1.0;
  const Task ts[] = {task(0, 0, 0, 1.0, 1, 0), task(1, 0, 0, 1.0, 1, 0)};
  env.step(d, all(cfg, true), ts);
  const auto led = env.step(d, all(cfg, false), {});
  double total = 0;
  for (const auto& e : led.edges) total += e.revenue;
  CHECK(total == 0.0);   // second task finished at delay 2 > budget 1
  CHECK(led.edges[0].violated == 1.0);
}

TEST_CASE("one on-time and one late completion earn 25") {
  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.placement(0, 0) = 1;
  d.route(0, 0) = 0;
  d.allocation(0, 0) = 1.0;
  const Task first = task(0, 0, 0, 1.0, 2, 0);
  const Task late = task(1, 0, 0, 1.0, 1, 0);
  const Task ts[] = {first, late};
  const auto a = env.step(d, all(cfg, true), ts);
  const auto b = env.step(d, all(cfg, false), {});
  CHECK(a.edges[0].revenue + b.edges[0].revenue == 25.0);
  CHECK(b.edges[0].violated == 1.0);
}

TEST_CASE("placement cost") {
  const auto cfg = two_edges();
  Grid<std::uint8_t> prev(2, 2, 0), now(2, 2, 0);
  prev(1, 0) = 1;
  now(0, 0) = 1;
  now(1, 0) = 1;
  CHECK(placement_cost(cfg, 0, now, prev) == doctest::Approx(0.6));   // fetched from edge 1, 2 km
  CHECK(placement_cost(cfg, 1, now, prev) == 0.0);
  CHECK(placement_cost(cfg, 1, Grid<std::uint8_t>(2, 2, 0), prev) == 0.0);   // removal
  // Nobody held it: fetched from the cloud, 10 km.
  Grid<std::uint8_t> fresh(2, 2, 0);
  fresh(0, 1) = 1;
  CHECK(placement_cost(cfg, 0, fresh, Grid<std::uint8_t>(2, 2, 0)) == doctest::Approx(3.0));
}

TEST_CASE("offloading cost") {
  auto cfg = ClusterConfig::layout(2, 1, 3.0, 10.0);
  Grid<int> k(2, 1, kNoRoute), m(2, 1, kNoRoute);
  k(0, 0) = 0;
  m(0, 0) = 1;
  CHECK(offloading_cost(cfg, 0, m, k) == doctest::Approx(0.3));
  CHECK(offloading_cost(cfg, 0, k, k) == 0.0);
  CHECK(offloading_cost(cfg, 0, k, Grid<int>(2, 1, kNoRoute)) == 0.0);

  // k -> m -> k over two slots is charged on both changes.
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.placement(0, 0) = d.placement(1, 0) = 1;
  d.route(0, 0) = 0;
  env.step(d, all(cfg, true), {});
  d.route(0, 0) = 1;
  const double c1 = env.step(d, all(cfg, true), {}).edges[0].offload_cost;
  d.route(0, 0) = 0;
  const double c2 = env.step(d, all(cfg, true), {}).edges[0].offload_cost;
  CHECK(c1 == doctest::Approx(0.3));
  CHECK(c2 == doctest::Approx(0.3));
}

TEST_CASE("allocation cost") {
  const auto cfg = two_edges();
  Grid<double> a(2, 2, 0.0), b(2, 2, 0.0);
  a(0, 0) = 1.0;
  b(0, 0) = 3.0;
  CHECK(allocation_cost(cfg, 0, b, a) == 1.0);
  CHECK(allocation_cost(cfg, 0, a, b) == 0.0);
  CHECK(allocation_cost(cfg, 0, a, a) == 0.0);
}

TEST_CASE("layer signals") {
  CHECK(population_variance(std::vector<double>{4.0, 0.0}) == 4.0);
  CHECK(population_variance(std::vector<double>{}) == 0.0);

  const auto cfg = two_edges();
  Environment env(cfg);
  auto d = Decisions::empty(cfg);
  d.placement(0, 0) = 1;
  d.route(0, 0) = 0;
  const Task t = task(0, 0, 0, 4.0, 9, 0);   // no CPU: stays queued
  const auto led = env.step(d, all(cfg, true), std::span<const Task>(&t, 1));
  CHECK(led.signals.workload_variance == 4.0);
  CHECK(led.signals.covered_demand == 4.0);
  CHECK(led.edges[0].unserved == 0.0);
}

TEST_CASE("gated profit matches the ledger identity") {
  const auto cfg = reftest::oracle_cluster();
  std::mt19937_64 rng(3);
  std::int64_t id = 0;
  Environment env(cfg);
  for (int t = 0; t < 200; ++t) {
    const auto rs = reftest::random_slot(cfg, t, rng, id);
    const auto led = env.step(rs.decisions, rs.actions, rs.arrivals, {.allow_blocked_routes = true});
    for (const auto& e : led.edges) {
      CHECK(e.profit == e.revenue - e.action.bits[0] * e.place_cost - e.action.bits[1] * e.offload_cost -
                            e.action.bits[2] * e.alloc_cost);
      CHECK(e.place_cost >= 0.0);
      CHECK(e.offload_cost >= 0.0);
      CHECK(e.alloc_cost >= 0.0);
      CHECK(e.revenue >= 0.0);
    }
  }
}

TEST_CASE("environment matches the reference simulator") {
  const auto cfg = reftest::oracle_cluster();
  std::mt19937_64 rng(99);
  for (int episode = 0; episode < 100; ++episode) {
    Environment env(cfg);
    reftest::ReferenceSim ref(cfg);
    std::int64_t id = 0;
    for (int t = 0; t < 10; ++t) {
      const auto rs = reftest::random_slot(cfg, t, rng, id);
      const auto got = env.step(rs.decisions, rs.actions, rs.arrivals, {.allow_blocked_routes = true});
      const auto want = reftest::reference_step(ref, rs);
      const auto d = reftest::diff(got, want);
      CHECK_MESSAGE(d.empty(), d);
      CHECK(env.state().in_system_workload() == ref.in_system());
    }
  }
}

TEST_CASE("replay is deterministic") {
  const auto cfg = reftest::oracle_cluster(3, 3);
  auto run = [&] {
    std::mt19937_64 rng(5);
    std::int64_t id = 0;
    Environment env(cfg);
    std::vector<double> trace;
    for (int t = 0; t < 100; ++t) {
      const auto rs = reftest::random_slot(cfg, t, rng, id);
      const auto led = env.step(rs.decisions, rs.actions, rs.arrivals, {.allow_blocked_routes = true});
      for (const auto& e : led.edges) trace.insert(trace.end(), {e.profit, e.queued, e.served, e.violated});
    }
    return trace;
  };
  CHECK(run() == run());
}
