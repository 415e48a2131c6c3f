#include <doctest.h>

#include "edgetimer/runner.hpp"

using namespace edgetimer;

namespace {

ClusterConfig small() { return ClusterConfig::layout(3, 3, 5.0, 50.0); }

WorkloadScript script(const ClusterConfig& cfg, int horizon, double rate, std::uint64_t seed) {
  return synth_workload(cfg, horizon, constant_rate(rate), seed);
}

// Checks conservation at the start of every slot: everything that arrived
// is either finished or still somewhere in the system.
class ConservationProbe : public UpdatePolicy {
 public:
  std::string name() const override { return "probe"; }
  void begin_slot(const SlotContext& ctx) override {
    const double in_system = ctx.state.in_system_workload();
    if (arrived_ != done_ + in_system) ++broken_;
  }
  void decide(Layer, const SlotContext&, std::span<std::uint8_t> bits) override {
    for (auto& b : bits) b = 1;
  }
  void end_slot(const SlotContext&, const SlotLedger& l) override {
    for (const auto& e : l.edges) {
      arrived_ += e.arrived;
      done_ += e.served + e.violated;
    }
  }
  int broken_ = 0;

 private:
  double arrived_ = 0, done_ = 0;
};

}  // namespace

TEST_CASE("SST and the always-update constant policy produce identical ledgers") {
  const auto cfg = small();
  const auto s = script(cfg, 300, 0.5, 3);
  for (const auto& rules : {RuleSet::parse("AM-MRP-EA"), RuleSet::parse("HPA-RCRP-PF")}) {
    BaselineUpdatePolicy sst(BaselineKind::SST, {});
    ConstantPolicy always(UpdateAction::all(true));
    const auto a = run_episode(cfg, s, rules, {}, sst);
    const auto b = run_episode(cfg, s, rules, {}, always);
    REQUIRE(a.ledgers.size() == b.ledgers.size());
    for (std::size_t t = 0; t < a.ledgers.size(); ++t) {
      for (std::size_t i = 0; i < a.ledgers[t].edges.size(); ++i) {
        CHECK(a.ledgers[t].edges[i].profit == b.ledgers[t].edges[i].profit);
        CHECK(a.ledgers[t].edges[i].queued == b.ledgers[t].edges[i].queued);
      }
    }
    CHECK(a.total_profit == b.total_profit);
    CHECK(a.forced_updates == 0);
  }
}

TEST_CASE("all-hold after the first slot charges no update cost") {
  const auto cfg = small();
  const auto s = script(cfg, 400, 0.6, 4);
  ConstantPolicy hold(UpdateAction::all(false));
  const auto r = run_episode(cfg, s, RuleSet::parse("AM-LRP-RR"), {}, hold, {.safety_net = false});
  REQUIRE(r.ledgers.size() == 400);
  for (std::size_t t = 1; t < r.ledgers.size(); ++t) {
    for (const auto& e : r.ledgers[t].edges) {
      CHECK(e.action == UpdateAction::all(false));
      CHECK(e.profit == e.revenue);
      CHECK(e.place_cost + e.offload_cost + e.alloc_cost == 0.0);
    }
  }
  CHECK(r.forced_updates == 0);
}

TEST_CASE("the safety net overrides unsafe holds") {
  auto cfg = small();
  cfg.edge_mem = 4.0;   // one or two replicas per edge, so placements move
  const auto s = script(cfg, 300, 0.8, 5);
  // Once routes point at edges, moving replicas while routes and shares stay
  // put strands work.
  struct PlacementOnly : UpdatePolicy {
    std::string name() const override { return "placement-only"; }
    void decide(Layer l, const SlotContext& c, std::span<std::uint8_t> b) override {
      for (auto& x : b) x = l == Layer::Placement || c.slot < 5;
    }
  } hold;
  const auto safe = run_episode(cfg, s, RuleSet::parse("TopK-MRP-EA"), {}, hold);
  CHECK(safe.forced_updates > 0);
  CHECK(safe.unsafe_holds == 0);
  CHECK(safe.blocked_task_slots == 0);
  const auto raw = run_episode(cfg, s, RuleSet::parse("TopK-MRP-EA"), {}, hold, {.safety_net = false});
  CHECK(raw.unsafe_holds > 0);
  CHECK(raw.forced_updates == 0);
}

TEST_CASE("conservation holds at every slot") {
  const auto cfg = small();
  for (const auto& rules : RuleSet::all()) {
    ConservationProbe probe;
    run_episode(cfg, script(cfg, 60, 0.7, 6), rules, {}, probe, {.keep_ledgers = false});
    CHECK_MESSAGE(probe.broken_ == 0, rules.name());
  }
}

TEST_CASE("hold safety") {
  const auto cfg = small();
  auto st = SchedulingState::initial(cfg);
  DemandWindow w(3, 3, 10);
  auto exec = Decisions::empty(cfg);
  const auto cand = exec;
  SlotContext ctx{cfg, st, {}, w, exec, cand, nullptr, 0};
  for (Layer l : kLayers) CHECK_FALSE(hold_safe(l, 0, ctx));   // slot 0

  st.slot = 5;
  CHECK(hold_safe(Layer::Placement, 0, ctx));
  CHECK_FALSE(hold_safe(Layer::Offloading, 0, ctx));   // no routes yet
  exec.route.fill(cfg.cloud());
  CHECK(hold_safe(Layer::Offloading, 0, ctx));
  exec.route(0, 1) = 2;   // edge 2 does not hold service 1
  CHECK_FALSE(hold_safe(Layer::Offloading, 0, ctx));
  exec.placement(2, 1) = 1;
  CHECK(hold_safe(Layer::Offloading, 0, ctx));

  Grid<double> local(3, 3, 0.0);
  ctx.local_demand = &local;
  CHECK(hold_safe(Layer::Allocation, 0, ctx));
  local(0, 2) = 1.0;
  CHECK_FALSE(hold_safe(Layer::Allocation, 0, ctx));
  exec.allocation(0, 2) = 0.5;
  CHECK(hold_safe(Layer::Allocation, 0, ctx));
}

TEST_CASE("edge probe") {
  const auto cfg = small();
  auto st = SchedulingState::initial(cfg);
  ActiveTask a;
  a.remaining = 2.0;
  a.elapsed = 3;
  st.queues[1].push_back(a);
  a.elapsed = 1;
  st.queues[1].push_back(a);
  Task t;
  t.origin_edge = 1;
  t.workload = 5.0;
  DemandWindow w(3, 3, 10);
  auto d = Decisions::empty(cfg);
  SlotContext ctx{cfg, st, std::span<const Task>(&t, 1), w, d, d, nullptr, 0};
  CHECK(ctx.probe(1).mean_delay == 2.0);
  CHECK(ctx.probe(1).queued_workload == 9.0);
  CHECK(ctx.edge_idle(0));
  CHECK_FALSE(ctx.edge_idle(1));
}
