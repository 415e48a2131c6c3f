#include "edgetimer/runner.hpp"

#include <chrono>

namespace edgetimer {

bool SlotContext::edge_idle(int edge) const {
  if (!state.queues[edge].empty()) return false;
  for (const auto& t : arrivals)
    if (t.origin_edge == edge) return false;
  return true;
}

EdgeProbe SlotContext::probe(int edge) const {
  EdgeProbe p;
  const auto& q = state.queues[edge];
  for (const auto& a : q) {
    p.mean_delay += a.elapsed;
    p.queued_workload += a.remaining;
  }
  if (!q.empty()) p.mean_delay /= static_cast<double>(q.size());
  for (const auto& t : arrivals)
    if (t.origin_edge == edge) p.queued_workload += t.workload;
  return p;
}

bool hold_safe(Layer layer, int edge, const SlotContext& ctx) {
  if (!ctx.has_previous()) return false;
  switch (layer) {
    case Layer::Placement:
      return true;
    case Layer::Offloading:
      for (int s = 0; s < ctx.cfg.num_services; ++s) {
        const int dest = ctx.executed.route(edge, s);
        if (dest == kNoRoute || !route_feasible(ctx.cfg, ctx.executed.placement, edge, s, dest)) return false;
      }
      return true;
    case Layer::Allocation:
      if (ctx.local_demand == nullptr) return true;
      for (int s = 0; s < ctx.cfg.num_services; ++s) {
        if ((*ctx.local_demand)(edge, s) > 0.0 && ctx.executed.allocation(edge, s) <= 0.0) return false;
      }
      return true;
  }
  return true;
}

BaselineUpdatePolicy::BaselineUpdatePolicy(BaselineKind kind, BaselineParams params) : kind_(kind), params_(params) {
  validate_baseline(kind_, params_);
}

void BaselineUpdatePolicy::decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) {
  for (int i = 0; i < ctx.cfg.num_edges; ++i) {
    bits[i] = baseline_policy(kind_, params_, ctx.slot, ctx.probe(i))[layer] ? 1 : 0;
  }
}

void ConstantPolicy::decide(Layer layer, const SlotContext&, std::span<std::uint8_t> bits) {
  for (auto& b : bits) b = action_[layer] ? 1 : 0;
}

EpisodeResult run_episode(const ClusterConfig& cfg, const WorkloadScript& script, const RuleSet& rules,
                          const RuleParams& rule_params, UpdatePolicy& policy, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  const int n = cfg.num_edges;
  Environment env(cfg);
  DemandWindow window(n, cfg.num_services, rule_params.window);
  const auto index = script.index();
  policy.reset();

  EpisodeResult out;
  if (options.keep_ledgers) out.ledgers.reserve(static_cast<std::size_t>(script.horizon));
  out.latency_seconds.reserve(static_cast<std::size_t>(script.horizon));

  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  JointAction actions(static_cast<std::size_t>(n));
  const StepOptions step_options{.allow_blocked_routes = !options.safety_net};

  for (int t = 0; t < script.horizon; ++t) {
    const std::span<const Task> arrivals(script.events.data() + index.begin[t], index.begin[t + 1] - index.begin[t]);
    const SchedulingState& state = env.state();
    window.push(arrivals);

    Decisions executed = state.current;
    Decisions candidate = state.current;
    Grid<double> local_demand;
    SlotContext ctx{cfg, state, arrivals, window, executed, candidate, nullptr, t};
    const bool has_prev = state.has_previous_decisions();

    const auto started = Clock::now();
    policy.begin_slot(ctx);
    for (Layer layer : kLayers) {
      switch (layer) {
        case Layer::Placement:
          candidate.placement = place(rules.placement, cfg, state.current.placement, window, rule_params);
          break;
        case Layer::Offloading:
          candidate.route = offload(rules.offload, cfg, executed.placement, state.current.allocation,
                                    load_snapshot(cfg, state), rule_params);
          break;
        case Layer::Allocation:
          local_demand = projected_local_demand(cfg, state, executed.placement, executed.route, arrivals);
          ctx.local_demand = &local_demand;
          candidate.allocation = allocate(rules.allocation, cfg, local_demand);
          break;
      }
      policy.decide(layer, ctx, bits);
      for (int i = 0; i < n; ++i) {
        bool update = bits[i] != 0;
        if (!update && has_prev && !hold_safe(layer, i, ctx)) {
          if (options.safety_net) {
            update = true;
            ++out.forced_updates;
          } else {
            ++out.unsafe_holds;
          }
        }
        actions[i].set(layer, gate(layer, i, update, has_prev, candidate, executed));
      }
    }
    out.latency_seconds.push_back(std::chrono::duration<double>(Clock::now() - started).count());

    SlotLedger ledger = env.step(executed, actions, arrivals, step_options);
    policy.end_slot(ctx, ledger);

    for (const auto& e : ledger.edges) {
      out.total_profit += e.profit;
      out.arrived += e.arrived;
      out.served += e.served;
      out.violated += e.violated;
      out.blocked_task_slots += e.blocked_tasks;
    }
    if (options.keep_ledgers) out.ledgers.push_back(std::move(ledger));
  }
  return out;
}

}  // namespace edgetimer
