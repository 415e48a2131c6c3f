#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "edgetimer/rules.hpp"
#include "edgetimer/simenv.hpp"
#include "edgetimer/timescale.hpp"
#include "edgetimer/workload.hpp"

namespace edgetimer {

/// Everything a timescale policy may look at while the runner walks the three
/// layers of one slot. `executed` holds the gated decisions of the layers
/// already decided and the previous decisions of the rest.
struct SlotContext {
  const ClusterConfig& cfg;
  const SchedulingState& state;
  std::span<const Task> arrivals;
  const DemandWindow& demand;
  const Decisions& executed;
  const Decisions& candidate;
  const Grid<double>* local_demand = nullptr;   // set once Layer-2 is gated
  int slot = 0;

  bool has_previous() const { return state.has_previous_decisions(); }
  bool edge_idle(int edge) const;
  EdgeProbe probe(int edge) const;
};

/// Safety discriminator: can `edge` keep its previous decision for `layer`
/// given what the upper layers executed this slot?
bool hold_safe(Layer layer, int edge, const SlotContext& ctx);

class UpdatePolicy {
 public:
  virtual ~UpdatePolicy() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  virtual void begin_slot(const SlotContext&) {}
  /// Writes one update bit per edge for `layer`.
  virtual void decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) = 0;
  virtual void end_slot(const SlotContext&, const SlotLedger&) {}
};

/// SST/SMT/DT/WT.
class BaselineUpdatePolicy : public UpdatePolicy {
 public:
  BaselineUpdatePolicy(BaselineKind kind, BaselineParams params);
  std::string name() const override { return baseline_name(kind_); }
  void decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) override;

 private:
  BaselineKind kind_;
  BaselineParams params_;
};

/// Same bits for every edge, slot and layer (all-hold or all-update).
class ConstantPolicy : public UpdatePolicy {
 public:
  explicit ConstantPolicy(UpdateAction action) : action_(action) {}
  std::string name() const override { return "constant"; }
  void decide(Layer layer, const SlotContext&, std::span<std::uint8_t> bits) override;

 private:
  UpdateAction action_;
};

struct RunOptions {
  // Unsafe holds become updates. When off they are executed as-is and tasks
  // behind a stale route wait at their edge.
  bool safety_net = true;
  bool keep_ledgers = true;
};

struct EpisodeResult {
  std::vector<SlotLedger> ledgers;
  std::vector<double> latency_seconds;   // decision time per slot
  std::int64_t unsafe_holds = 0;         // unsafe holds that were executed
  std::int64_t forced_updates = 0;       // unsafe holds overridden by the safety net
  std::int64_t blocked_task_slots = 0;
  double total_profit = 0.0;
  double arrived = 0.0;
  double served = 0.0;
  double violated = 0.0;
};

/// Plays `script` slot by slot: rules produce candidates, the policy gates
/// each layer in order (placement, offloading, allocation), then the
/// environment executes the slot.
EpisodeResult run_episode(const ClusterConfig& cfg, const WorkloadScript& script, const RuleSet& rules,
                          const RuleParams& rule_params, UpdatePolicy& policy, const RunOptions& options = {});

}  // namespace edgetimer
