// Command-line driver over the C API.
#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "edgetimer/edgetimer.h"

namespace {

enum Exit {
  kOk = 0,
  kSmokeIncomplete = 1,
  kUsage = 2,
  kConfig = 3,
  kMissingCheckpoint = 4,
  kBadCheckpoint = 5,
  kWorkload = 6,
  kDiverged = 7,
  kIo = 8,
  kInternal = 9,
};

int exit_code(et_status s) {
  switch (s) {
    case ET_OK:
      return kOk;
    case ET_ERR_ARGUMENT:
      return kUsage;
    case ET_ERR_CONFIG:
      return kConfig;
    case ET_ERR_MISSING_CHECKPOINT:
      return kMissingCheckpoint;
    case ET_ERR_CHECKPOINT:
      return kBadCheckpoint;
    case ET_ERR_WORKLOAD:
      return kWorkload;
    case ET_ERR_DIVERGED:
      return kDiverged;
    case ET_ERR_IO:
      return kIo;
    default:
      return kInternal;
  }
}

int fail(et_status s) {
  std::fprintf(stderr, "error: %s\n", et_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgetimer: multi-timescale edge scheduling simulator and controller"};
  app.require_subcommand(1);

  std::string config, out = "out", checkpoint, variant;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string seed, pattern, rules, method, epochs, horizon;
  int slots = 100;
  bool print_config = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Root seed");
    sub->add_option("--pattern", pattern, "Workload pattern")->check(CLI::IsMember({"A", "B", "C", "D"}));
    sub->add_option("--rules", rules, "Rule triple, e.g. AM-MRP-EA");
    sub->add_option("--method", method, "Timescale method")
        ->check(CLI::IsMember({"edgetimer", "sst", "smt", "dt", "wt"}));
    sub->add_option("--epochs", epochs, "Training epochs");
    sub->add_option("--horizon", horizon, "Raw workload horizon in slots");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--print-config", print_config, "Print the effective config");
  };

  auto* train = app.add_subcommand("train", "Train the controllers, write checkpoint and curves");
  auto* eval = app.add_subcommand("eval", "Compare EdgeTimer with the baselines on the eval script");
  auto* grid = app.add_subcommand("grid", "Tune the SMT/DT/WT baselines");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate an ablation variant");
  auto* smoke = app.add_subcommand("smoke", "Run every rule combination for a short script");
  for (auto* sub : {train, eval, grid, ablate, smoke}) add_common(sub);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <out>/checkpoint.bin)");
  ablate->add_option("variant", variant,
                     "no-decomposition | no-layer1 | no-layer2 | no-layer3 | no-centralized | no-safe | all")
      ->required();
  smoke->add_option("--slots", slots, "Slots per combination")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  et_experiment* exp = nullptr;
  if (auto s = et_experiment_from_file(config.c_str(), &exp); s != ET_OK) return fail(s);
  struct Guard {
    et_experiment* e;
    ~Guard() { et_experiment_destroy(e); }
  } guard{exp};

  for (const auto& [key, value] : std::vector<std::pair<const char*, std::string*>>{
           {"seed", &seed}, {"pattern", &pattern}, {"rules", &rules}, {"method", &method}, {"epochs", &epochs},
           {"horizon", &horizon}}) {
    if (value->empty()) continue;
    if (auto s = et_experiment_set(exp, key, value->c_str()); s != ET_OK) return fail(s == ET_ERR_ARGUMENT ? ET_ERR_CONFIG : s);
  }
  if (print_config) std::printf("%s\n", et_experiment_config(exp));

  et_status status = ET_OK;
  int completed = 0, total = 0;
  if (train->parsed()) {
    status = et_train(exp, out.c_str());
  } else if (eval->parsed()) {
    status = et_eval(exp, out.c_str(), checkpoint.empty() ? nullptr : checkpoint.c_str());
  } else if (grid->parsed()) {
    status = et_grid(exp, out.c_str());
  } else if (ablate->parsed()) {
    status = et_ablate(exp, variant.c_str(), out.c_str());
  } else if (smoke->parsed()) {
    status = et_smoke(exp, out.c_str(), slots, &completed, &total);
  }
  if (status != ET_OK) return fail(status);
  std::fputs(et_last_summary(exp), stdout);
  if (smoke->parsed()) {
    std::printf("%d/%d combos complete\n", completed, total);
    if (completed != total) return kSmokeIncomplete;
  }
  return kOk;
}
