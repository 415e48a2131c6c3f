#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgetimer/config.hpp"
#include "edgetimer/types.hpp"

namespace edgetimer {

class WorkloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of a cluster trace CSV
/// (header: start_time,end_time,task_type,plan_cpu,plan_mem).
struct TraceRow {
  double start_time = 0.0;
  double end_time = 0.0;
  std::string task_type;
  double plan_cpu = 0.0;
  double plan_mem = 0.0;
};

enum class Pattern { A, B, C, D, Custom };
std::string pattern_name(Pattern p);
Pattern parse_pattern(const std::string& tag);

/// Arrival events sorted by slot. Each event's edge is `task.origin_edge`.
struct WorkloadScript {
  std::vector<Task> events;
  int horizon = 0;
  Pattern pattern = Pattern::A;

  /// Events arriving in `slot`, as a contiguous range.
  struct SlotIndex {
    std::vector<std::size_t> begin;   // begin[t]..begin[t+1]
  };
  SlotIndex index() const;

  double total_workload() const;
  bool operator==(const WorkloadScript&) const = default;
};

/// Parses the trace CSV. Errors carry the 1-based line number.
std::vector<TraceRow> read_trace_csv(std::istream& in);

/// Maps trace rows to tasks: task types onto services (sorted order when they
/// fit, FNV bucketing otherwise), workload = plan_cpu * duration, delay budget =
/// ceil(budget_scale * duration / slot_length), edges drawn uniformly with `seed`.
WorkloadScript ingest_trace(const std::vector<TraceRow>& rows, const ClusterConfig& cfg, double budget_scale,
                            std::uint64_t seed);
WorkloadScript ingest_trace_file(const std::string& path, const ClusterConfig& cfg, double budget_scale,
                                 std::uint64_t seed);

/// Derives pattern B (per-edge shuffle), C (doubled frequency) or D (A|B|C)
/// from a raw pattern-A script.
WorkloadScript make_pattern(const WorkloadScript& raw, Pattern pattern, std::uint64_t seed);

/// Mean arrivals per edge for a slot.
using RateProfile = std::function<double(int slot)>;

RateProfile constant_rate(double lambda);
/// Sinusoidal day/night cycle between `low` and `high` with the given period.
RateProfile diurnal_rate(double low, double high, int period);
/// Alternating quiet and burst phases with seeded random phase lengths.
RateProfile bursty_rate(double quiet, double burst, int mean_quiet_len, int mean_burst_len, int horizon,
                        std::uint64_t seed);

struct TaskShape {
  std::vector<double> service_weights;   // empty: uniform over services
  std::vector<double> cpu_choices{1.0, 2.0};
  int min_duration = 1;                  // slots
  int max_duration = 3;
  double budget_scale = 2.0;
};

/// Poisson arrivals per slot per edge; deterministic under `seed`.
WorkloadScript synth_workload(const ClusterConfig& cfg, int horizon, const RateProfile& rate, std::uint64_t seed,
                              const TaskShape& shape = {});

/// Line-delimited record form: one header line, then one task per line.
void write_script(std::ostream& out, const WorkloadScript& script);
WorkloadScript read_script(std::istream& in);

}  // namespace edgetimer
