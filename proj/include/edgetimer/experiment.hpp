#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgetimer/hdrl.hpp"

namespace edgetimer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorkloadSpec {
  std::string source = "synthetic";   // synthetic | trace | script
  std::string path;                   // trace CSV or script file
  int horizon = 1000;                 // slots of the raw (pattern-A) script
  std::string profile = "bursty";     // constant | diurnal | bursty
  double rate = 0.5;                  // constant
  double low = 0.2, high = 1.0;       // diurnal
  int period = 200;
  double quiet = 0.2, burst = 1.5;    // bursty
  int quiet_len = 60, burst_len = 20;
  double budget_scale = 2.0;          // trace ingestion
  TaskShape shape;
};

struct BaselineGrid {
  std::vector<int> smt_periods{1, 10, 50, 100};
  std::vector<double> dt_thresholds{0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
  std::vector<double> wt_thresholds;   // empty: edge_cpu x {0.25, 0.5, 1, 2, 4, 8}
};

struct ExperimentConfig {
  ClusterConfig cluster;
  bool synthetic_layout = true;        // distances generated from region/cloud km
  double region_km = 5.0;
  double cloud_km = 50.0;
  WorkloadSpec workload;
  Pattern pattern = Pattern::D;
  bool train_on_eval_script = false;
  RuleSet rules;
  RuleParams rule_params;
  RewardCoefficients rewards;
  HdrlConfig hdrl;
  BaselineGrid grid;
  std::uint64_t seed = 1;
  std::string method = "edgetimer";

  /// Stable hash of everything that shapes the trained networks.
  std::uint64_t hash() const;
};

/// Parses and validates a JSON config; unknown keys are errors.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& cfg);

/// Applies a `key=value` override (seed, pattern, rules, method, epochs,
/// horizon, train_on_eval_script).
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Raw script for `stream` ("train" or "eval"), expanded to `pattern`.
WorkloadScript build_script(const ExperimentConfig& cfg, const std::string& stream, Pattern pattern);
WorkloadScript eval_script(const ExperimentConfig& cfg);
WorkloadScript train_script(const ExperimentConfig& cfg);

struct MethodResult {
  std::string method;
  EpisodeResult episode;
};

struct BaselineTuning {
  SmtSearchResult smt;
  ThresholdSearchResult dt;
  ThresholdSearchResult wt;
};

BaselineTuning tune_baselines(const ExperimentConfig& cfg, const WorkloadScript& script);
std::vector<double> wt_thresholds(const ExperimentConfig& cfg);

/// Plays one baseline on `script` with tuned parameters.
EpisodeResult run_baseline(const ExperimentConfig& cfg, const WorkloadScript& script, BaselineKind kind,
                           const BaselineTuning& tuning);

/// Named ablation variants: no-decomposition, no-layer1, no-layer2,
/// no-layer3, no-centralized, no-safe.
std::vector<std::string> ablation_names();
HdrlConfig ablation_config(const HdrlConfig& base, const std::string& variant);

struct Summary {
  std::map<std::string, double> values;
  std::string text() const;
};

/// Subcommands. Each writes its artifacts under `out` and returns a summary.
Summary run_train(const ExperimentConfig& cfg, const std::filesystem::path& out);
Summary run_eval(const ExperimentConfig& cfg, const std::filesystem::path& out,
                 const std::optional<std::filesystem::path>& checkpoint);
Summary run_grid(const ExperimentConfig& cfg, const std::filesystem::path& out);
Summary run_ablate(const ExperimentConfig& cfg, const std::string& variant, const std::filesystem::path& out);
Summary run_smoke(const ExperimentConfig& cfg, const std::filesystem::path& out, int slots = 100);

// Metric helpers (also used by tests).
struct MethodMetrics {
  std::string method;
  double total_profit = 0.0;
  double normalized_profit = 0.0;
  double revenue = 0.0;
  double place_cost = 0.0;
  double offload_cost = 0.0;
  double alloc_cost = 0.0;
  double arrived = 0.0;
  double served = 0.0;
  double violated = 0.0;
  std::int64_t completed = 0;
  std::int64_t within_budget = 0;
  std::array<std::int64_t, kNumLayers> updates{};
  std::int64_t forced_updates = 0;
  std::int64_t unsafe_holds = 0;
  std::int64_t blocked_task_slots = 0;
};

MethodMetrics compute_metrics(const std::string& method, const EpisodeResult& r, double reference_profit);

/// Empirical CDF points (value, fraction <= value) of task delays for one
/// service (-1: all services).
std::vector<std::pair<double, double>> delay_cdf(const EpisodeResult& r, int service);
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);

void write_ledger_csv(const std::filesystem::path& path, const std::vector<MethodResult>& results);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MethodMetrics>& rows);
void write_curves_csv(const std::filesystem::path& path, const std::vector<EpochCurve>& curves);
void write_latency_csv(const std::filesystem::path& path, const std::vector<MethodResult>& results);
void write_plotdata(const std::filesystem::path& path, const ClusterConfig& cluster,
                    const std::vector<MethodResult>& results, const std::vector<MethodMetrics>& metrics);

}  // namespace edgetimer
