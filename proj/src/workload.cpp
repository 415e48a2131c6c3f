#include "edgetimer/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "edgetimer/rng.hpp"

namespace edgetimer {

std::string pattern_name(Pattern p) {
  switch (p) {
    case Pattern::A: return "A";
    case Pattern::B: return "B";
    case Pattern::C: return "C";
    case Pattern::D: return "D";
    case Pattern::Custom: return "custom";
  }
  return "custom";
}

Pattern parse_pattern(const std::string& tag) {
  if (tag == "A") return Pattern::A;
  if (tag == "B") return Pattern::B;
  if (tag == "C") return Pattern::C;
  if (tag == "D") return Pattern::D;
  if (tag == "custom") return Pattern::Custom;
  throw WorkloadError("unknown workload pattern '" + tag + "'");
}

WorkloadScript::SlotIndex WorkloadScript::index() const {
  SlotIndex idx;
  idx.begin.assign(static_cast<std::size_t>(horizon) + 1, events.size());
  std::size_t k = 0;
  for (int t = 0; t <= horizon; ++t) {
    while (k < events.size() && events[k].arrival_slot < t) ++k;
    idx.begin[t] = k;
  }
  return idx;
}

double WorkloadScript::total_workload() const {
  double w = 0.0;
  for (const auto& e : events) w += e.workload;
  return w;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, int line, const char* what) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw WorkloadError("line " + std::to_string(line) + ": cannot parse " + what + " '" + field + "'");
  }
  return v;
}

void renumber(std::vector<Task>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Task& a, const Task& b) { return a.arrival_slot < b.arrival_slot; });
  std::int64_t id = 0;
  for (auto& e : events) e.id = id++;
}

}  // namespace

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  static const std::vector<std::string> kHeader{"start_time", "end_time", "task_type", "plan_cpu", "plan_mem"};
  std::vector<TraceRow> rows;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (fields != kHeader) {
        throw WorkloadError("line " + std::to_string(lineno) +
                            ": expected header start_time,end_time,task_type,plan_cpu,plan_mem");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 5) {
      throw WorkloadError("line " + std::to_string(lineno) + ": expected 5 fields, got " +
                          std::to_string(fields.size()));
    }
    TraceRow r;
    r.start_time = parse_number(fields[0], lineno, "start_time");
    r.end_time = parse_number(fields[1], lineno, "end_time");
    r.task_type = fields[2];
    r.plan_cpu = parse_number(fields[3], lineno, "plan_cpu");
    r.plan_mem = parse_number(fields[4], lineno, "plan_mem");
    if (r.task_type.empty()) throw WorkloadError("line " + std::to_string(lineno) + ": empty task_type");
    if (r.end_time < r.start_time) throw WorkloadError("line " + std::to_string(lineno) + ": end_time before start_time");
    if (!(r.plan_cpu > 0.0)) throw WorkloadError("line " + std::to_string(lineno) + ": plan_cpu must be positive");
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw WorkloadError("trace is empty");
  if (rows.empty()) throw WorkloadError("trace has a header but no rows");
  return rows;
}

WorkloadScript ingest_trace(const std::vector<TraceRow>& rows, const ClusterConfig& cfg, double budget_scale,
                            std::uint64_t seed) {
  if (rows.empty()) throw WorkloadError("trace has no rows");
  if (!(budget_scale > 0.0)) throw WorkloadError("budget_scale must be positive");

  std::vector<std::string> types;
  for (const auto& r : rows) types.push_back(r.task_type);
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  const bool bijective_fit = static_cast<int>(types.size()) <= cfg.num_services;
  auto service_of = [&](const std::string& type) {
    if (bijective_fit) {
      return static_cast<int>(std::lower_bound(types.begin(), types.end(), type) - types.begin());
    }
    return static_cast<int>(fnv1a(type) % static_cast<std::uint64_t>(cfg.num_services));
  };

  double t0 = rows.front().start_time;
  for (const auto& r : rows) t0 = std::min(t0, r.start_time);

  auto rng = make_stream(seed, "trace-edges");
  std::uniform_int_distribution<int> edge(0, cfg.num_edges - 1);

  WorkloadScript script;
  script.pattern = Pattern::A;
  for (const auto& r : rows) {
    Task t;
    t.service = service_of(r.task_type);
    t.arrival_slot = static_cast<int>(std::floor((r.start_time - t0) / cfg.slot_length));
    // Zero-length rows still occupy one slot of processing.
    const double duration = std::max(r.end_time - r.start_time, cfg.slot_length);
    t.cpu_demand = r.plan_cpu;
    t.workload = r.plan_cpu * duration;
    t.delay_budget = std::max(1, static_cast<int>(std::ceil(budget_scale * duration / cfg.slot_length)));
    t.origin_edge = edge(rng);
    script.events.push_back(t);
    script.horizon = std::max(script.horizon, t.arrival_slot + 1);
  }
  renumber(script.events);
  return script;
}

WorkloadScript ingest_trace_file(const std::string& path, const ClusterConfig& cfg, double budget_scale,
                                 std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot open trace file '" + path + "'");
  return ingest_trace(read_trace_csv(in), cfg, budget_scale, seed);
}

namespace {

WorkloadScript shuffle_per_edge(const WorkloadScript& raw, std::uint64_t seed) {
  auto rng = make_stream(seed, "pattern-B");
  WorkloadScript out = raw;
  std::map<int, std::vector<std::size_t>> by_edge;
  for (std::size_t k = 0; k < out.events.size(); ++k) by_edge[out.events[k].origin_edge].push_back(k);
  for (auto& [edge, idx] : by_edge) {
    std::vector<int> slots;
    std::vector<Task> tasks;
    for (auto k : idx) {
      slots.push_back(out.events[k].arrival_slot);
      tasks.push_back(out.events[k]);
    }
    std::shuffle(tasks.begin(), tasks.end(), rng);
    for (std::size_t m = 0; m < idx.size(); ++m) {
      tasks[m].arrival_slot = slots[m];
      out.events[idx[m]] = tasks[m];
    }
  }
  renumber(out.events);
  out.pattern = Pattern::B;
  return out;
}

WorkloadScript double_frequency(const WorkloadScript& raw, std::uint64_t seed) {
  constexpr int kJitter = 5;
  auto rng = make_stream(seed, "pattern-C");
  std::uniform_int_distribution<int> jitter(-kJitter, kJitter);
  WorkloadScript out = raw;
  for (const auto& e : raw.events) {
    Task clone = e;
    clone.arrival_slot = std::clamp(e.arrival_slot + jitter(rng), 0, std::max(0, raw.horizon - 1));
    out.events.push_back(clone);
  }
  renumber(out.events);
  out.pattern = Pattern::C;
  return out;
}

}  // namespace

WorkloadScript make_pattern(const WorkloadScript& raw, Pattern pattern, std::uint64_t seed) {
  if (raw.pattern != Pattern::A) throw WorkloadError("patterns are derived from a raw (pattern A) script");
  switch (pattern) {
    case Pattern::A: return raw;
    case Pattern::B: return shuffle_per_edge(raw, seed);
    case Pattern::C: return double_frequency(raw, seed);
    case Pattern::D: {
      WorkloadScript out;
      out.pattern = Pattern::D;
      out.horizon = 3 * raw.horizon;
      out.events = raw.events;
      int offset = 0;
      const WorkloadScript b = shuffle_per_edge(raw, seed);
      const WorkloadScript c = double_frequency(raw, seed);
      for (const auto* part : {&b, &c}) {
        offset += raw.horizon;
        for (Task t : part->events) {
          t.arrival_slot += offset;
          out.events.push_back(t);
        }
      }
      renumber(out.events);
      return out;
    }
    case Pattern::Custom: break;
  }
  throw WorkloadError("unknown workload pattern");
}

RateProfile constant_rate(double lambda) {
  return [lambda](int) { return lambda; };
}

RateProfile diurnal_rate(double low, double high, int period) {
  return [=](int slot) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(slot) / std::max(1, period);
    return low + (high - low) * 0.5 * (1.0 - std::cos(phase));
  };
}

RateProfile bursty_rate(double quiet, double burst, int mean_quiet_len, int mean_burst_len, int horizon,
                        std::uint64_t seed) {
  auto rng = make_stream(seed, "bursty-phases");
  std::exponential_distribution<double> quiet_len(1.0 / std::max(1, mean_quiet_len));
  std::exponential_distribution<double> burst_len(1.0 / std::max(1, mean_burst_len));
  auto levels = std::make_shared<std::vector<double>>();
  bool bursting = false;
  while (static_cast<int>(levels->size()) < horizon) {
    const int len = 1 + static_cast<int>(bursting ? burst_len(rng) : quiet_len(rng));
    for (int k = 0; k < len && static_cast<int>(levels->size()) < horizon; ++k) {
      levels->push_back(bursting ? burst : quiet);
    }
    bursting = !bursting;
  }
  return [levels, quiet](int slot) {
    if (slot < 0 || slot >= static_cast<int>(levels->size())) return quiet;
    return (*levels)[static_cast<std::size_t>(slot)];
  };
}

WorkloadScript synth_workload(const ClusterConfig& cfg, int horizon, const RateProfile& rate, std::uint64_t seed,
                              const TaskShape& shape) {
  require_valid(cfg);
  if (horizon < 0) throw WorkloadError("horizon must be non-negative");
  if (shape.cpu_choices.empty() || shape.min_duration < 1 || shape.max_duration < shape.min_duration) {
    throw WorkloadError("invalid task shape");
  }
  auto rng = make_stream(seed, "synth-workload");
  std::vector<double> weights = shape.service_weights;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(cfg.num_services), 1.0);
  if (static_cast<int>(weights.size()) != cfg.num_services) throw WorkloadError("service_weights must have S entries");
  std::discrete_distribution<int> service(weights.begin(), weights.end());
  std::uniform_int_distribution<std::size_t> cpu(0, shape.cpu_choices.size() - 1);
  std::uniform_int_distribution<int> duration(shape.min_duration, shape.max_duration);

  WorkloadScript script;
  script.horizon = horizon;
  script.pattern = Pattern::A;
  std::int64_t id = 0;
  for (int t = 0; t < horizon; ++t) {
    const double lambda = std::max(0.0, rate(t));
    for (int i = 0; i < cfg.num_edges; ++i) {
      if (lambda <= 0.0) continue;
      std::poisson_distribution<int> count(lambda);
      const int k = count(rng);
      for (int m = 0; m < k; ++m) {
        Task task;
        task.id = id++;
        task.arrival_slot = t;
        task.origin_edge = i;
        task.service = service(rng);
        task.cpu_demand = shape.cpu_choices[cpu(rng)];
        const int d = duration(rng);
        task.workload = task.cpu_demand * d;
        task.delay_budget = std::max(1, static_cast<int>(std::ceil(shape.budget_scale * d)));
        script.events.push_back(task);
      }
    }
  }
  return script;
}

void write_script(std::ostream& out, const WorkloadScript& script) {
  out << "# edgetimer-script v1 horizon=" << script.horizon << " pattern=" << pattern_name(script.pattern) << '\n';
  out << std::setprecision(17);
  for (const auto& e : script.events) {
    out << e.id << ' ' << e.arrival_slot << ' ' << e.origin_edge << ' ' << e.service << ' ' << e.cpu_demand << ' '
        << e.workload << ' ' << e.delay_budget << '\n';
  }
}

WorkloadScript read_script(std::istream& in) {
  WorkloadScript script;
  std::string header;
  if (!std::getline(in, header) || header.rfind("# edgetimer-script v1", 0) != 0) {
    throw WorkloadError("not an edgetimer script");
  }
  std::istringstream hs(header.substr(header.find("horizon=")));
  std::string tok;
  while (hs >> tok) {
    if (tok.rfind("horizon=", 0) == 0) script.horizon = std::stoi(tok.substr(8));
    if (tok.rfind("pattern=", 0) == 0) script.pattern = parse_pattern(tok.substr(8));
  }
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    Task t;
    if (!(ls >> t.id >> t.arrival_slot >> t.origin_edge >> t.service >> t.cpu_demand >> t.workload >> t.delay_budget)) {
      throw WorkloadError("line " + std::to_string(lineno) + ": malformed script record");
    }
    script.events.push_back(t);
  }
  return script;
}

}  // namespace edgetimer
