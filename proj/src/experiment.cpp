#include "edgetimer/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <set>
#include <sstream>

#include "edgetimer/rng.hpp"

namespace edgetimer {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

template <class T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void parse_cluster(const json& j, ExperimentConfig& cfg) {
  check_keys(j,
             {"num_edges", "num_services", "edge_cpu", "edge_mem", "cloud_cpu", "cloud_mem", "service_mem_footprint",
              "distance", "region_km", "cloud_km", "unit_price", "place_cost_per_km", "offload_cost_per_km",
              "realloc_cost_per_unit", "slot_length", "link_km_per_slot", "cloud_rtt_slots", "tx_budget_fraction",
              "compute_budget_fraction"},
             "cluster");
  int n = 12, s = 12;
  opt(j, "num_edges", n);
  opt(j, "num_services", s);
  opt(j, "region_km", cfg.region_km);
  opt(j, "cloud_km", cfg.cloud_km);
  if (n < 1 || s < 1) throw ConfigError("cluster.num_edges and cluster.num_services must be positive");
  ClusterConfig c = ClusterConfig::layout(n, s, cfg.region_km, cfg.cloud_km);
  opt(j, "edge_cpu", c.edge_cpu);
  opt(j, "edge_mem", c.edge_mem);
  opt(j, "cloud_cpu", c.cloud_cpu);
  opt(j, "cloud_mem", c.cloud_mem);
  opt(j, "service_mem_footprint", c.service_mem_footprint);
  if (j.contains("distance")) {
    c.distance = j.at("distance").get<std::vector<std::vector<double>>>();
    cfg.synthetic_layout = false;
  }
  opt(j, "unit_price", c.unit_price_base);
  opt(j, "place_cost_per_km", c.place_cost_per_km);
  opt(j, "offload_cost_per_km", c.offload_cost_per_km);
  opt(j, "realloc_cost_per_unit", c.realloc_cost_per_unit);
  opt(j, "slot_length", c.slot_length);
  opt(j, "link_km_per_slot", c.link_km_per_slot);
  opt(j, "cloud_rtt_slots", c.cloud_rtt_slots);
  opt(j, "tx_budget_fraction", c.tx_budget_fraction);
  opt(j, "compute_budget_fraction", c.compute_budget_fraction);
  cfg.cluster = std::move(c);
}

void parse_workload(const json& j, WorkloadSpec& w) {
  check_keys(j,
             {"source", "path", "horizon", "profile", "rate", "low", "high", "period", "quiet", "burst", "quiet_len",
              "burst_len", "budget_scale", "service_weights", "cpu_choices", "min_duration", "max_duration",
              "task_budget_scale"},
             "workload");
  opt(j, "source", w.source);
  opt(j, "path", w.path);
  opt(j, "horizon", w.horizon);
  opt(j, "profile", w.profile);
  opt(j, "rate", w.rate);
  opt(j, "low", w.low);
  opt(j, "high", w.high);
  opt(j, "period", w.period);
  opt(j, "quiet", w.quiet);
  opt(j, "burst", w.burst);
  opt(j, "quiet_len", w.quiet_len);
  opt(j, "burst_len", w.burst_len);
  opt(j, "budget_scale", w.budget_scale);
  opt(j, "service_weights", w.shape.service_weights);
  opt(j, "cpu_choices", w.shape.cpu_choices);
  opt(j, "min_duration", w.shape.min_duration);
  opt(j, "max_duration", w.shape.max_duration);
  opt(j, "task_budget_scale", w.shape.budget_scale);
}

void parse_rule_params(const json& j, RuleParams& p) {
  check_keys(j, {"window", "hpa_scale_up", "hpa_scale_down", "hpa_replica_cpu", "topk", "util_horizon", "rcrp_shape"},
             "rule_params");
  opt(j, "window", p.window);
  opt(j, "hpa_scale_up", p.hpa_scale_up);
  opt(j, "hpa_scale_down", p.hpa_scale_down);
  opt(j, "hpa_replica_cpu", p.hpa_replica_cpu);
  opt(j, "topk", p.topk);
  opt(j, "util_horizon", p.util_horizon);
  opt(j, "rcrp_shape", p.rcrp_shape);
}

void parse_rewards(const json& j, RewardCoefficients& k) {
  check_keys(j,
             {"a", "b", "c", "d", "e", "f", "g", "alpha", "beta", "sigma", "phi", "budget_unserved", "budget_delay",
              "epsilon"},
             "rewards");
  opt(j, "a", k.a);
  opt(j, "b", k.b);
  opt(j, "c", k.c);
  opt(j, "d", k.d);
  opt(j, "e", k.e);
  opt(j, "f", k.f);
  opt(j, "g", k.g);
  opt(j, "alpha", k.alpha);
  opt(j, "beta", k.beta);
  opt(j, "sigma", k.sigma);
  opt(j, "phi", k.phi);
  opt(j, "budget_unserved", k.budget_unserved);
  opt(j, "budget_delay", k.budget_delay);
  opt(j, "epsilon", k.epsilon);
}

void parse_hdrl(const json& j, HdrlConfig& h) {
  check_keys(j,
             {"hidden", "lr", "gamma", "lambda", "clip", "entropy_coef", "max_grad_norm", "ppo_epochs",
              "num_minibatches", "chunk_length", "episode_length", "epochs", "mask_value", "shared_parameters",
              "decomposed", "centralized_critic", "safe_masking", "layer_learned", "skip_idle", "greedy_eval"},
             "hdrl");
  opt(j, "hidden", h.hidden);
  opt(j, "lr", h.lr);
  opt(j, "gamma", h.gamma);
  opt(j, "lambda", h.lambda);
  opt(j, "clip", h.clip);
  opt(j, "entropy_coef", h.entropy_coef);
  opt(j, "max_grad_norm", h.max_grad_norm);
  opt(j, "ppo_epochs", h.ppo_epochs);
  opt(j, "num_minibatches", h.num_minibatches);
  opt(j, "chunk_length", h.chunk_length);
  opt(j, "episode_length", h.episode_length);
  opt(j, "epochs", h.epochs);
  opt(j, "mask_value", h.mask_value);
  opt(j, "shared_parameters", h.shared_parameters);
  opt(j, "decomposed", h.decomposed);
  opt(j, "centralized_critic", h.centralized_critic);
  opt(j, "safe_masking", h.safe_masking);
  opt(j, "layer_learned", h.layer_learned);
  opt(j, "skip_idle", h.skip_idle);
  opt(j, "greedy_eval", h.greedy_eval);
}

void validate(const ExperimentConfig& cfg) {
  const auto issues = validate_config(cfg.cluster);
  if (!issues.empty()) {
    std::string msg = "invalid cluster config:";
    for (const auto& i : issues) msg += "\n  cluster." + i.field + ": " + i.message;
    throw ConfigError(msg);
  }
  const auto& w = cfg.workload;
  if (w.source != "synthetic" && w.source != "trace" && w.source != "script") {
    throw ConfigError("workload.source must be synthetic, trace or script");
  }
  if (w.source != "synthetic" && w.path.empty()) throw ConfigError("workload.path is required for " + w.source);
  if (w.source == "synthetic") {
    if (w.horizon < 1) throw ConfigError("workload.horizon must be positive");
    if (w.profile != "constant" && w.profile != "diurnal" && w.profile != "bursty") {
      throw ConfigError("workload.profile must be constant, diurnal or bursty");
    }
    if (w.rate < 0 || w.low < 0 || w.high < w.low || w.quiet < 0 || w.burst < 0) {
      throw ConfigError("workload rates must be non-negative (and high >= low)");
    }
    if (w.period < 1 || w.quiet_len < 1 || w.burst_len < 1) throw ConfigError("workload periods must be positive");
    if (w.shape.min_duration < 1 || w.shape.max_duration < w.shape.min_duration) {
      throw ConfigError("workload durations must satisfy 1 <= min_duration <= max_duration");
    }
    if (w.shape.cpu_choices.empty()) throw ConfigError("workload.cpu_choices must not be empty");
    for (double c : w.shape.cpu_choices)
      if (!(c > 0.0)) throw ConfigError("workload.cpu_choices must be positive");
    if (!w.shape.service_weights.empty() &&
        static_cast<int>(w.shape.service_weights.size()) != cfg.cluster.num_services) {
      throw ConfigError("workload.service_weights needs one weight per service");
    }
    if (!(w.shape.budget_scale > 0.0)) throw ConfigError("workload.task_budget_scale must be positive");
  }
  if (!(w.budget_scale > 0.0)) throw ConfigError("workload.budget_scale must be positive");
  if (cfg.rule_params.window < 1) throw ConfigError("rule_params.window must be positive");
  if (!(cfg.rule_params.util_horizon > 0.0)) throw ConfigError("rule_params.util_horizon must be positive");
  if (!(cfg.rewards.epsilon > 0.0)) throw ConfigError("rewards.epsilon must be positive");
  try {
    validate_hdrl(cfg.hdrl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int p : cfg.grid.smt_periods)
    if (p <= 0) throw ConfigError("baselines.smt_periods must be positive");
  for (double t : cfg.grid.dt_thresholds)
    if (!(t > 0.0)) throw ConfigError("baselines.dt_thresholds must be positive");
  for (double t : cfg.grid.wt_thresholds)
    if (!(t > 0.0)) throw ConfigError("baselines.wt_thresholds must be positive");
  if (cfg.grid.smt_periods.empty() || cfg.grid.dt_thresholds.empty()) throw ConfigError("baseline grids must not be empty");
  static const std::set<std::string> methods{"edgetimer", "sst", "smt", "dt", "wt"};
  if (!methods.count(cfg.method)) throw ConfigError("method must be one of edgetimer, sst, smt, dt, wt");
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& c = cfg.cluster;
  const auto& w = cfg.workload;
  const auto& h = cfg.hdrl;
  const auto& k = cfg.rewards;
  const auto& p = cfg.rule_params;
  json j;
  j["seed"] = cfg.seed;
  j["method"] = cfg.method;
  j["pattern"] = pattern_name(cfg.pattern);
  j["rules"] = cfg.rules.name();
  j["train_on_eval_script"] = cfg.train_on_eval_script;
  j["cluster"] = {{"num_edges", c.num_edges},
                  {"num_services", c.num_services},
                  {"edge_cpu", c.edge_cpu},
                  {"edge_mem", c.edge_mem},
                  {"cloud_cpu", c.cloud_cpu},
                  {"cloud_mem", c.cloud_mem},
                  {"service_mem_footprint", c.service_mem_footprint},
                  {"distance", c.distance},
                  {"unit_price", c.unit_price_base},
                  {"place_cost_per_km", c.place_cost_per_km},
                  {"offload_cost_per_km", c.offload_cost_per_km},
                  {"realloc_cost_per_unit", c.realloc_cost_per_unit},
                  {"slot_length", c.slot_length},
                  {"link_km_per_slot", c.link_km_per_slot},
                  {"cloud_rtt_slots", c.cloud_rtt_slots},
                  {"tx_budget_fraction", c.tx_budget_fraction},
                  {"compute_budget_fraction", c.compute_budget_fraction}};
  j["workload"] = {{"source", w.source},       {"path", w.path},
                   {"horizon", w.horizon},     {"profile", w.profile},
                   {"rate", w.rate},           {"low", w.low},
                   {"high", w.high},           {"period", w.period},
                   {"quiet", w.quiet},         {"burst", w.burst},
                   {"quiet_len", w.quiet_len}, {"burst_len", w.burst_len},
                   {"budget_scale", w.budget_scale}, {"service_weights", w.shape.service_weights},
                   {"cpu_choices", w.shape.cpu_choices}, {"min_duration", w.shape.min_duration},
                   {"max_duration", w.shape.max_duration}, {"task_budget_scale", w.shape.budget_scale}};
  j["rule_params"] = {{"window", p.window},
                      {"hpa_scale_up", p.hpa_scale_up},
                      {"hpa_scale_down", p.hpa_scale_down},
                      {"hpa_replica_cpu", p.hpa_replica_cpu},
                      {"topk", p.topk},
                      {"util_horizon", p.util_horizon},
                      {"rcrp_shape", p.rcrp_shape}};
  j["rewards"] = {{"a", k.a},         {"b", k.b},         {"c", k.c},
                  {"d", k.d},         {"e", k.e},         {"f", k.f},
                  {"g", k.g},         {"alpha", k.alpha}, {"beta", k.beta},
                  {"sigma", k.sigma}, {"phi", k.phi},     {"budget_unserved", k.budget_unserved},
                  {"budget_delay", k.budget_delay},       {"epsilon", k.epsilon}};
  j["hdrl"] = {{"hidden", h.hidden},
               {"lr", h.lr},
               {"gamma", h.gamma},
               {"lambda", h.lambda},
               {"clip", h.clip},
               {"entropy_coef", h.entropy_coef},
               {"max_grad_norm", h.max_grad_norm},
               {"ppo_epochs", h.ppo_epochs},
               {"num_minibatches", h.num_minibatches},
               {"chunk_length", h.chunk_length},
               {"episode_length", h.episode_length},
               {"epochs", h.epochs},
               {"mask_value", h.mask_value},
               {"shared_parameters", h.shared_parameters},
               {"decomposed", h.decomposed},
               {"centralized_critic", h.centralized_critic},
               {"safe_masking", h.safe_masking},
               {"layer_learned", h.layer_learned},
               {"skip_idle", h.skip_idle},
               {"greedy_eval", h.greedy_eval}};
  j["baselines"] = {{"smt_periods", cfg.grid.smt_periods},
                    {"dt_thresholds", cfg.grid.dt_thresholds},
                    {"wt_thresholds", cfg.grid.wt_thresholds}};
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig cfg;
  cfg.cluster = ClusterConfig::layout(12, 12, cfg.region_km, cfg.cloud_km);
  try {
    const json j = json::parse(json_text);
    check_keys(j,
               {"seed", "method", "pattern", "rules", "train_on_eval_script", "cluster", "workload", "rule_params",
                "rewards", "hdrl", "baselines"},
               "");
    opt(j, "seed", cfg.seed);
    opt(j, "method", cfg.method);
    opt(j, "train_on_eval_script", cfg.train_on_eval_script);
    if (j.contains("pattern")) cfg.pattern = parse_pattern(j.at("pattern").get<std::string>());
    if (j.contains("rules")) cfg.rules = RuleSet::parse(j.at("rules").get<std::string>());
    if (j.contains("cluster")) parse_cluster(j.at("cluster"), cfg);
    if (j.contains("workload")) parse_workload(j.at("workload"), cfg.workload);
    if (j.contains("rule_params")) parse_rule_params(j.at("rule_params"), cfg.rule_params);
    if (j.contains("rewards")) parse_rewards(j.at("rewards"), cfg.rewards);
    if (j.contains("hdrl")) parse_hdrl(j.at("hdrl"), cfg.hdrl);
    if (j.contains("baselines")) {
      const auto& b = j.at("baselines");
      check_keys(b, {"smt_periods", "dt_thresholds", "wt_thresholds"}, "baselines");
      opt(b, "smt_periods", cfg.grid.smt_periods);
      opt(b, "dt_thresholds", cfg.grid.dt_thresholds);
      opt(b, "wt_thresholds", cfg.grid.wt_thresholds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2); }

std::uint64_t ExperimentConfig::hash() const {
  json j = config_to_json(*this);
  // Settings that do not change what a checkpoint means. The pattern only
  // picks the script, so a policy can be evaluated on another one.
  j.erase("method");
  j.erase("seed");
  j.erase("pattern");
  j["hdrl"].erase("epochs");
  j["hdrl"].erase("greedy_eval");
  return fnv1a(j.dump());
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "pattern") {
      cfg.pattern = parse_pattern(value);
    } else if (key == "rules") {
      cfg.rules = RuleSet::parse(value);
    } else if (key == "method") {
      cfg.method = value;
    } else if (key == "epochs") {
      cfg.hdrl.epochs = std::stoi(value);
    } else if (key == "horizon") {
      cfg.workload.horizon = std::stoi(value);
    } else if (key == "train_on_eval_script") {
      cfg.train_on_eval_script = value == "1" || value == "true";
    } else {
      throw ConfigError("unknown override '" + key + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bad value for " + key + ": " + e.what());
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key);
  }
  validate(cfg);
}

WorkloadScript build_script(const ExperimentConfig& cfg, const std::string& stream, Pattern pattern) {
  const auto& w = cfg.workload;
  if (w.source == "script") {
    std::ifstream in(w.path);
    if (!in) throw WorkloadError("cannot open script " + w.path);
    return read_script(in);
  }
  WorkloadScript raw;
  if (w.source == "trace") {
    raw = ingest_trace_file(w.path, cfg.cluster, w.budget_scale, derive_seed(cfg.seed, "trace-edges"));
  } else {
    RateProfile rate;
    if (w.profile == "constant") {
      rate = constant_rate(w.rate);
    } else if (w.profile == "diurnal") {
      rate = diurnal_rate(w.low, w.high, w.period);
    } else {
      rate = bursty_rate(w.quiet, w.burst, w.quiet_len, w.burst_len, w.horizon,
                         derive_seed(cfg.seed, stream + "-bursts"));
    }
    raw = synth_workload(cfg.cluster, w.horizon, rate, derive_seed(cfg.seed, stream + "-workload"), w.shape);
  }
  if (pattern == Pattern::A || pattern == Pattern::Custom) return raw;
  return make_pattern(raw, pattern, derive_seed(cfg.seed, stream + "-pattern"));
}

WorkloadScript eval_script(const ExperimentConfig& cfg) { return build_script(cfg, "eval", cfg.pattern); }

WorkloadScript train_script(const ExperimentConfig& cfg) {
  return cfg.train_on_eval_script ? eval_script(cfg) : build_script(cfg, "train", cfg.pattern);
}

std::vector<double> wt_thresholds(const ExperimentConfig& cfg) {
  if (!cfg.grid.wt_thresholds.empty()) return cfg.grid.wt_thresholds;
  std::vector<double> out;
  for (double f : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) out.push_back(f * cfg.cluster.edge_cpu);
  return out;
}

BaselineTuning tune_baselines(const ExperimentConfig& cfg, const WorkloadScript& script) {
  const RunOptions run{.safety_net = true, .keep_ledgers = false};
  auto play = [&](BaselineKind kind, const BaselineParams& p) {
    BaselineUpdatePolicy policy(kind, p);
    return run_episode(cfg.cluster, script, cfg.rules, cfg.rule_params, policy, run).total_profit;
  };
  BaselineTuning t;
  t.smt = smt_grid_search(cfg.grid.smt_periods, [&](const std::array<int, kNumLayers>& periods) {
    BaselineParams p;
    p.periods = periods;
    return play(BaselineKind::SMT, p);
  });
  t.dt = threshold_search(cfg.grid.dt_thresholds, [&](double th) {
    BaselineParams p;
    p.delay_threshold = th;
    return play(BaselineKind::DT, p);
  });
  t.wt = threshold_search(wt_thresholds(cfg), [&](double th) {
    BaselineParams p;
    p.workload_threshold = th;
    return play(BaselineKind::WT, p);
  });
  return t;
}

EpisodeResult run_baseline(const ExperimentConfig& cfg, const WorkloadScript& script, BaselineKind kind,
                           const BaselineTuning& tuning) {
  BaselineParams p;
  p.periods = tuning.smt.best;
  p.delay_threshold = tuning.dt.best > 0.0 ? tuning.dt.best : 1.0;
  p.workload_threshold = tuning.wt.best > 0.0 ? tuning.wt.best : 1.0;
  BaselineUpdatePolicy policy(kind, p);
  return run_episode(cfg.cluster, script, cfg.rules, cfg.rule_params, policy, {});
}

std::vector<std::string> ablation_names() {
  return {"no-decomposition", "no-layer1", "no-layer2", "no-layer3", "no-centralized", "no-safe"};
}

HdrlConfig ablation_config(const HdrlConfig& base, const std::string& variant) {
  HdrlConfig h = base;
  if (variant == "full") return h;
  if (variant == "no-decomposition") {
    h.decomposed = false;
  } else if (variant == "no-layer1") {
    h.layer_learned[0] = false;
  } else if (variant == "no-layer2") {
    h.layer_learned[1] = false;
  } else if (variant == "no-layer3") {
    h.layer_learned[2] = false;
  } else if (variant == "no-centralized") {
    h.centralized_critic = false;
  } else if (variant == "no-safe") {
    h.safe_masking = false;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  return h;
}

std::string Summary::text() const {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + num(v) + "\n";
  return out;
}

// ---------------------------------------------------------------- metrics

MethodMetrics compute_metrics(const std::string& method, const EpisodeResult& r, double reference_profit) {
  MethodMetrics m;
  m.method = method;
  m.total_profit = r.total_profit;
  m.normalized_profit = reference_profit != 0.0 ? r.total_profit / reference_profit : 0.0;
  for (const auto& l : r.ledgers) {
    for (const auto& e : l.edges) {
      m.revenue += e.revenue;
      m.place_cost += e.action.bits[0] * e.place_cost;
      m.offload_cost += e.action.bits[1] * e.offload_cost;
      m.alloc_cost += e.action.bits[2] * e.alloc_cost;
      m.arrived += e.arrived;
      m.served += e.served;
      m.violated += e.violated;
      for (int k = 0; k < kNumLayers; ++k) m.updates[k] += e.action.bits[k];
    }
    for (const auto& c : l.completions) {
      ++m.completed;
      if (c.within_budget) ++m.within_budget;
    }
  }
  m.forced_updates = r.forced_updates;
  m.unsafe_holds = r.unsafe_holds;
  m.blocked_task_slots = r.blocked_task_slots;
  return m;
}

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  std::vector<std::pair<double, double>> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k + 1 < values.size() && values[k + 1] == values[k]) continue;
    out.emplace_back(values[k], static_cast<double>(k + 1) / n);
  }
  return out;
}

std::vector<std::pair<double, double>> delay_cdf(const EpisodeResult& r, int service) {
  std::vector<double> delays;
  for (const auto& l : r.ledgers)
    for (const auto& c : l.completions)
      if (service < 0 || c.task.service == service) delays.push_back(c.delay);
  return empirical_cdf(std::move(delays));
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_ledger_csv(const fs::path& path, const std::vector<MethodResult>& results) {
  auto out = open_out(path);
  out << "method,slot,edge,revenue,place_cost,offload_cost,alloc_cost,profit,arrived,served,violated,covered,"
         "unserved,offload_in_budget,compute_in_budget,queued,late_tasks,blocked_tasks,a1,a2,a3\n";
  for (const auto& r : results) {
    for (const auto& l : r.episode.ledgers) {
      for (std::size_t i = 0; i < l.edges.size(); ++i) {
        const auto& e = l.edges[i];
        out << r.method << ',' << l.slot << ',' << i << ',' << num(e.revenue) << ',' << num(e.place_cost) << ','
            << num(e.offload_cost) << ',' << num(e.alloc_cost) << ',' << num(e.profit) << ',' << num(e.arrived) << ','
            << num(e.served) << ',' << num(e.violated) << ',' << num(e.covered) << ',' << num(e.unserved) << ','
            << num(e.offload_in_budget) << ',' << num(e.compute_in_budget) << ',' << num(e.queued) << ','
            << e.late_tasks << ',' << e.blocked_tasks << ',' << int(e.action.bits[0]) << ','
            << int(e.action.bits[1]) << ',' << int(e.action.bits[2]) << '\n';
      }
    }
  }
}

void write_metrics_csv(const fs::path& path, const std::vector<MethodMetrics>& rows) {
  auto out = open_out(path);
  out << "method,total_profit,normalized_profit,revenue,place_cost,offload_cost,alloc_cost,arrived,served,violated,"
         "completed,within_budget,within_budget_ratio,updates_l1,updates_l2,updates_l3,forced_updates,unsafe_holds,"
         "blocked_task_slots\n";
  for (const auto& m : rows) {
    const double ratio = m.completed > 0 ? static_cast<double>(m.within_budget) / m.completed : 0.0;
    out << m.method << ',' << num(m.total_profit) << ',' << num(m.normalized_profit) << ',' << num(m.revenue) << ','
        << num(m.place_cost) << ',' << num(m.offload_cost) << ',' << num(m.alloc_cost) << ',' << num(m.arrived) << ','
        << num(m.served) << ',' << num(m.violated) << ',' << m.completed << ',' << m.within_budget << ','
        << num(ratio) << ',' << m.updates[0] << ',' << m.updates[1] << ',' << m.updates[2] << ','
        << m.forced_updates << ',' << m.unsafe_holds << ',' << m.blocked_task_slots << '\n';
  }
}

void write_curves_csv(const fs::path& path, const std::vector<EpochCurve>& curves) {
  auto out = open_out(path);
  out << "epoch,layer,mean_reward,profit\n";
  for (const auto& c : curves) {
    for (Layer l : kLayers) {
      out << c.epoch << ',' << layer_name(l) << ',' << num(c.layer_reward[index_of(l)]) << ',' << num(c.profit)
          << '\n';
    }
  }
}

void write_latency_csv(const fs::path& path, const std::vector<MethodResult>& results) {
  auto out = open_out(path);
  out << "method,slot,seconds\n";
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.episode.latency_seconds.size(); ++t) {
      out << r.method << ',' << t << ',' << num(r.episode.latency_seconds[t]) << '\n';
    }
  }
}

void write_plotdata(const fs::path& path, const ClusterConfig& cluster, const std::vector<MethodResult>& results,
                    const std::vector<MethodMetrics>& metrics) {
  json j;
  j["methods"] = json::array();
  for (const auto& m : metrics) {
    j["methods"].push_back(m.method);
    j["total_profit"][m.method] = m.total_profit;
    j["normalized_profit"][m.method] = m.normalized_profit;
  }
  for (const auto& r : results) {
    json cdf;
    auto to_json = [](const std::vector<std::pair<double, double>>& pts) {
      json a = json::array();
      for (const auto& [x, y] : pts) a.push_back({x, y});
      return a;
    };
    cdf["all"] = to_json(delay_cdf(r.episode, -1));
    for (int s = 0; s < cluster.num_services; ++s) cdf["service_" + std::to_string(s)] = to_json(delay_cdf(r.episode, s));
    j["delay_cdf"][r.method] = cdf;

    json timeline;
    for (Layer l : kLayers) {
      json edges = json::array();
      for (int i = 0; i < cluster.num_edges; ++i) {
        json slots = json::array();
        for (const auto& led : r.episode.ledgers)
          if (led.edges[i].action.bits[index_of(l)]) slots.push_back(led.slot);
        edges.push_back(slots);
      }
      timeline[std::string(layer_name(l))] = edges;
    }
    j["update_timeline"][r.method] = timeline;
  }
  auto out = open_out(path);
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------- subcommands

namespace {

void save_checkpoint(const EdgeTimerPolicy& policy, const ExperimentConfig& cfg, const fs::path& path) {
  auto out = open_out(path);
  policy.save(out, cfg.hash());
}

void load_checkpoint(EdgeTimerPolicy& policy, const ExperimentConfig& cfg, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint("checkpoint not found: " + path.string());
  policy.load(in, cfg.hash());
}

std::vector<MethodMetrics> metrics_for(const std::vector<MethodResult>& results) {
  double reference = results.empty() ? 0.0 : results.front().episode.total_profit;
  for (const auto& r : results)
    if (r.method == "edgetimer") reference = r.episode.total_profit;
  std::vector<MethodMetrics> rows;
  for (const auto& r : results) rows.push_back(compute_metrics(r.method, r.episode, reference));
  return rows;
}

void write_grid_csv(const fs::path& path, const BaselineTuning& t) {
  auto out = open_out(path);
  out << "baseline,params,profit,best\n";
  for (const auto& [p, v] : t.smt.evaluated) {
    out << "smt," << p[0] << ' ' << p[1] << ' ' << p[2] << ',' << num(v) << ',' << (p == t.smt.best ? 1 : 0) << '\n';
  }
  for (const auto& [th, v] : t.dt.evaluated) out << "dt," << num(th) << ',' << num(v) << ',' << (th == t.dt.best) << '\n';
  for (const auto& [th, v] : t.wt.evaluated) out << "wt," << num(th) << ',' << num(v) << ',' << (th == t.wt.best) << '\n';
}

void write_eval_artifacts(const ExperimentConfig& cfg, const fs::path& out, const std::vector<MethodResult>& results,
                          Summary& summary) {
  const auto rows = metrics_for(results);
  write_ledger_csv(out / "ledger.csv", results);
  write_metrics_csv(out / "metrics.csv", rows);
  write_plotdata(out / "plotdata.json", cfg.cluster, results, rows);
  write_latency_csv(out / "latency.csv", results);
  for (const auto& m : rows) {
    summary.values["profit." + m.method] = m.total_profit;
    summary.values["normalized." + m.method] = m.normalized_profit;
  }
}

}  // namespace

Summary run_train(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const auto script = train_script(cfg);
  EdgeTimerPolicy policy(cfg.cluster, cfg.hdrl, cfg.rewards, cfg.seed);
  const auto curves = train(policy, cfg.cluster, script, cfg.rules, cfg.rule_params);
  save_checkpoint(policy, cfg, out / "checkpoint.bin");
  write_curves_csv(out / "curves.csv", curves);

  const auto eval = eval_script(cfg);
  std::vector<MethodResult> results{{"edgetimer", infer(policy, cfg.cluster, eval, cfg.rules, cfg.rule_params)}};
  Summary s;
  s.values["epochs"] = static_cast<double>(curves.size());
  if (!curves.empty()) s.values["train_profit.last"] = curves.back().profit;
  write_eval_artifacts(cfg, out, results, s);
  return s;
}

Summary run_eval(const ExperimentConfig& cfg, const fs::path& out, const std::optional<fs::path>& checkpoint) {
  fs::create_directories(out);
  const auto script = eval_script(cfg);
  std::vector<MethodResult> results;
  if (cfg.method == "edgetimer") {
    EdgeTimerPolicy policy(cfg.cluster, cfg.hdrl, cfg.rewards, cfg.seed);
    load_checkpoint(policy, cfg, checkpoint.value_or(out / "checkpoint.bin"));
    results.push_back({"edgetimer", infer(policy, cfg.cluster, script, cfg.rules, cfg.rule_params)});
  }
  const auto tuning = tune_baselines(cfg, script);
  write_grid_csv(out / "grid.csv", tuning);
  for (auto kind : {BaselineKind::SST, BaselineKind::SMT, BaselineKind::DT, BaselineKind::WT}) {
    if (cfg.method != "edgetimer" && cfg.method != baseline_name(kind)) continue;
    results.push_back({baseline_name(kind), run_baseline(cfg, script, kind, tuning)});
  }
  Summary s;
  write_eval_artifacts(cfg, out, results, s);
  if (cfg.method == "edgetimer") {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : results)
      if (r.method != "edgetimer") best = std::max(best, r.episode.total_profit);
    s.values["best_baseline_profit"] = best;
    s.values["edgetimer_over_best_baseline"] = best != 0.0 ? results.front().episode.total_profit / best : 0.0;
  }
  return s;
}

Summary run_grid(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const auto script = eval_script(cfg);
  const auto t = tune_baselines(cfg, script);
  write_grid_csv(out / "grid.csv", t);
  Summary s;
  s.values["smt.p1"] = t.smt.best[0];
  s.values["smt.p2"] = t.smt.best[1];
  s.values["smt.p3"] = t.smt.best[2];
  s.values["smt.profit"] = t.smt.best_profit;
  s.values["dt.threshold"] = t.dt.best;
  s.values["dt.profit"] = t.dt.best_profit;
  s.values["wt.threshold"] = t.wt.best;
  s.values["wt.profit"] = t.wt.best_profit;
  return s;
}

Summary run_ablate(const ExperimentConfig& cfg, const std::string& variant, const fs::path& out) {
  fs::create_directories(out);
  std::vector<std::string> variants;
  if (variant == "all") {
    variants.push_back("full");
    for (const auto& v : ablation_names()) variants.push_back(v);
  } else {
    ablation_config(cfg.hdrl, variant);   // validates the name
    variants.push_back(variant);
  }
  const auto train_s = train_script(cfg);
  const auto eval_s = eval_script(cfg);
  std::vector<MethodResult> results;
  for (const auto& v : variants) {
    EdgeTimerPolicy policy(cfg.cluster, ablation_config(cfg.hdrl, v), cfg.rewards, cfg.seed);
    const auto curves = train(policy, cfg.cluster, train_s, cfg.rules, cfg.rule_params);
    write_curves_csv(out / ("curves_" + v + ".csv"), curves);
    results.push_back({v, infer(policy, cfg.cluster, eval_s, cfg.rules, cfg.rule_params)});
  }
  double reference = results.front().episode.total_profit;
  std::vector<MethodMetrics> rows;
  Summary s;
  for (const auto& r : results) {
    rows.push_back(compute_metrics(r.method, r.episode, reference));
    s.values["profit." + r.method] = r.episode.total_profit;
    s.values["unsafe_holds." + r.method] = static_cast<double>(r.episode.unsafe_holds);
  }
  write_metrics_csv(out / "metrics.csv", rows);
  return s;
}

namespace {

// Wraps a policy and checks the decision and conservation invariants after
// every slot.
class CheckingPolicy : public UpdatePolicy {
 public:
  explicit CheckingPolicy(UpdatePolicy& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  void reset() override {
    inner_.reset();
    arrived_ = served_ = violated_ = 0.0;
    violations.clear();
  }
  void begin_slot(const SlotContext& ctx) override { inner_.begin_slot(ctx); }
  void decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) override {
    inner_.decide(layer, ctx, bits);
  }
  void end_slot(const SlotContext& ctx, const SlotLedger& ledger) override {
    for (const auto& m : validate_decisions(ctx.cfg, ctx.state.current))
      violations.push_back("slot " + std::to_string(ledger.slot) + ": " + m);
    for (const auto& e : ledger.edges) {
      arrived_ += e.arrived;
      served_ += e.served;
      violated_ += e.violated;
    }
    const double in_system = ctx.state.in_system_workload();
    if (std::abs(arrived_ - (served_ + violated_ + in_system)) > 1e-6 * std::max(1.0, arrived_)) {
      violations.push_back("slot " + std::to_string(ledger.slot) + ": workload not conserved");
    }
    inner_.end_slot(ctx, ledger);
  }
  std::vector<std::string> violations;

 private:
  UpdatePolicy& inner_;
  double arrived_ = 0.0, served_ = 0.0, violated_ = 0.0;
};

WorkloadScript truncate(const WorkloadScript& s, int slots) {
  WorkloadScript out;
  out.pattern = s.pattern;
  out.horizon = std::min(slots, s.horizon);
  for (const auto& e : s.events)
    if (e.arrival_slot < out.horizon) out.events.push_back(e);
  return out;
}

}  // namespace

Summary run_smoke(const ExperimentConfig& cfg, const fs::path& out, int slots) {
  fs::create_directories(out);
  const auto script = truncate(eval_script(cfg), slots);
  auto csv = open_out(out / "smoke.csv");
  csv << "rules,status,slots,violations,profit,detail\n";
  int completed = 0;
  const auto all = RuleSet::all();
  for (const auto& rs : all) {
    BaselineUpdatePolicy sst(BaselineKind::SST, {});
    CheckingPolicy checker(sst);
    std::string status = "ok", detail;
    double profit = 0.0;
    try {
      profit = run_episode(cfg.cluster, script, rs, cfg.rule_params, checker, {.safety_net = true, .keep_ledgers = false})
                   .total_profit;
      if (!checker.violations.empty()) {
        status = "violation";
        detail = checker.violations.front();
      }
    } catch (const std::exception& e) {
      status = "error";
      detail = e.what();
    }
    if (status == "ok") ++completed;
    std::replace(detail.begin(), detail.end(), ',', ';');
    csv << rs.name() << ',' << status << ',' << script.horizon << ',' << checker.violations.size() << ','
        << num(profit) << ',' << detail << '\n';
  }
  Summary s;
  s.values["completed"] = completed;
  s.values["total"] = static_cast<double>(all.size());
  return s;
}

}  // namespace edgetimer
