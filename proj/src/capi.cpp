#include "edgetimer/edgetimer.h"

#include <exception>
#include <string>

#include "edgetimer/experiment.hpp"

struct et_experiment {
  edgetimer::ExperimentConfig cfg;
  std::string config_json;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

template <class F>
et_status guarded(F&& f) {
  using namespace edgetimer;
  try {
    g_last_error.clear();
    f();
    return ET_OK;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return ET_ERR_CONFIG;
  } catch (const MissingCheckpoint& e) {
    g_last_error = e.what();
    return ET_ERR_MISSING_CHECKPOINT;
  } catch (const CheckpointError& e) {
    g_last_error = e.what();
    return ET_ERR_CHECKPOINT;
  } catch (const WorkloadError& e) {
    g_last_error = e.what();
    return ET_ERR_WORKLOAD;
  } catch (const TrainingDiverged& e) {
    g_last_error = e.what();
    return ET_ERR_DIVERGED;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return ET_ERR_IO;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return ET_ERR_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ET_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return ET_ERR_INTERNAL;
  }
}

et_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be null";
  return ET_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* et_version(void) { return "1.0.0"; }

const char* et_last_error(void) { return g_last_error.c_str(); }

et_status et_experiment_from_file(const char* path, et_experiment** out) {
  if (!path || !out) return null_arg("path and out");
  return guarded([&] { *out = new et_experiment{edgetimer::load_config(path), {}, {}}; });
}

et_status et_experiment_from_json(const char* json, et_experiment** out) {
  if (!json || !out) return null_arg("json and out");
  return guarded([&] { *out = new et_experiment{edgetimer::parse_config(json), {}, {}}; });
}

void et_experiment_destroy(et_experiment* exp) { delete exp; }

et_status et_experiment_set(et_experiment* exp, const char* key, const char* value) {
  if (!exp || !key || !value) return null_arg("experiment, key and value");
  return guarded([&] {
    auto copy = exp->cfg;
    edgetimer::apply_override(copy, key, value);
    exp->cfg = std::move(copy);
  });
}

const char* et_experiment_config(et_experiment* exp) {
  if (!exp) return "";
  exp->config_json = edgetimer::dump_config(exp->cfg);
  return exp->config_json.c_str();
}

et_status et_train(et_experiment* exp, const char* out_dir) {
  if (!exp || !out_dir) return null_arg("experiment and out_dir");
  return guarded([&] { exp->summary = edgetimer::run_train(exp->cfg, out_dir).text(); });
}

et_status et_eval(et_experiment* exp, const char* out_dir, const char* checkpoint) {
  if (!exp || !out_dir) return null_arg("experiment and out_dir");
  return guarded([&] {
    std::optional<std::filesystem::path> ck;
    if (checkpoint) ck = checkpoint;
    exp->summary = edgetimer::run_eval(exp->cfg, out_dir, ck).text();
  });
}

et_status et_grid(et_experiment* exp, const char* out_dir) {
  if (!exp || !out_dir) return null_arg("experiment and out_dir");
  return guarded([&] { exp->summary = edgetimer::run_grid(exp->cfg, out_dir).text(); });
}

et_status et_ablate(et_experiment* exp, const char* variant, const char* out_dir) {
  if (!exp || !variant || !out_dir) return null_arg("experiment, variant and out_dir");
  return guarded([&] {
    const std::string v = variant;
    if (v != "all") {
      try {
        edgetimer::ablation_config(exp->cfg.hdrl, v);
      } catch (const edgetimer::ConfigError& e) {
        throw std::invalid_argument(e.what());
      }
    }
    exp->summary = edgetimer::run_ablate(exp->cfg, v, out_dir).text();
  });
}

et_status et_smoke(et_experiment* exp, const char* out_dir, int slots, int* completed, int* total) {
  if (!exp || !out_dir) return null_arg("experiment and out_dir");
  if (slots < 1) {
    g_last_error = "slots must be positive";
    return ET_ERR_ARGUMENT;
  }
  return guarded([&] {
    const auto s = edgetimer::run_smoke(exp->cfg, out_dir, slots);
    exp->summary = s.text();
    if (completed) *completed = static_cast<int>(s.values.at("completed"));
    if (total) *total = static_cast<int>(s.values.at("total"));
  });
}

const char* et_last_summary(et_experiment* exp) { return exp ? exp->summary.c_str() : ""; }

}  // extern "C"
