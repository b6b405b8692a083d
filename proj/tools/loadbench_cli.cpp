// Command-line front end over the loadbench C API.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "loadbench/loadbench.h"

namespace {

struct Key {
  const char* name;
  const char* help;
};

struct Command {
  const char* name;
  const char* help;
  std::vector<Key> keys;
};

const Key kOut{"out", "output directory (index file path for `index`)"};
const Key kCorpus{"corpus", "corpus directory (metadata.csv + data/)"};
const Key kSeed{"seed", "base seed; other seeds default to it"};
const Key kThreads{"threads", "worker threads (0 = hardware concurrency)"};
const Key kBootstrap{"bootstrap", "bootstrap replicates"};
const Key kBootstrapSeed{"bootstrap_seed", "bootstrap seed"};

const std::vector<Key> kEvalKeys{
    kCorpus, kOut, kSeed, kThreads, kBootstrap, kBootstrapSeed,
    {"forecaster", "previous_day | previous_week | persistence_ensemble | linear | dlinear"},
    {"sample", "evaluate N residential and N commercial buildings drawn at random"},
    {"sample_seed", "seed for --sample"},
    {"cap", "exclude buildings above the hourly consumption cap (on/off)"},
    {"max_hourly_kw", "consumption cap in kWh per hour"},
    {"sigma_floor", "lower bound on Gaussian sigma in kWh"},
    {"bias", "linear models use bias terms (on/off)"},
    {"kernel_size", "DLinear moving-average kernel (odd)"},
    {"max_epochs", "training epochs"},
    {"patience", "early-stopping patience in epochs"},
    {"lr_grid", "comma-separated learning rates"},
    {"steps_per_epoch", "gradient steps per epoch"},
    {"train_seed", "training seed"},
};

std::vector<Command> commands() {
  auto transfer_keys = kEvalKeys;
  transfer_keys.push_back({"baseline_run", "run directory to compare against (P(X<Y))"});
  return {
      {"synth", "generate a synthetic corpus",
       {kOut, kSeed,
        {"n_residential", "residential buildings"},
        {"n_commercial", "commercial buildings"},
        {"n_days", "days per building"},
        {"noise_scale", "noise level (0 = noiseless weekly-periodic)"},
        {"base_min", "minimum base load (kWh)"},
        {"base_max", "maximum base load (kWh)"},
        {"peak_min", "minimum peak amplitude (kWh)"},
        {"peak_max", "maximum peak amplitude (kWh)"},
        {"commercial_scale", "commercial magnitude multiplier"},
        {"weekend_attenuation", "fraction of the commercial peak removed on weekends"},
        {"n_regions", "number of regions"},
        {"start", "first timestamp (UTC)"}}},
      {"ingest", "clean raw meter CSVs into a corpus",
       {{"input", "directory with metadata.csv and <id>.csv files"}, kOut,
        {"max_missing_fraction", "exclude buildings missing more than this fraction"},
        {"long_gap_threshold", "gaps longer than this many hours are zero-filled"},
        {"max_hourly_kw", "exclude buildings above this hourly consumption"},
        {"cap", "apply the consumption cap (on/off)"},
        {"outlier_window", "outlier window in hours"},
        {"aggregation", "sub-hourly aggregation: mean | sum"}}},
      {"index", "build a shuffled window index over a corpus",
       {kCorpus, kOut, kSeed,
        {"stride", "window stride in hours"},
        {"holdout_hours", "hours withheld at the end of every series"},
        {"heldout_regions", "comma-separated regions left out"}}},
      {"tokenize", "fit a load tokenizer vocabulary",
       {kCorpus, kOut, kSeed, {"k", "initial KMeans clusters"}, {"tau", "merge threshold in kWh"}}},
      {"fit-boxcox", "fit Box-Cox parameters on a corpus",
       {kCorpus, kOut, {"per_type", "also fit per building type (on/off)"}}},
      {"eval-zero-shot", "zero-shot evaluation of a persistence forecaster", kEvalKeys},
      {"eval-transfer", "transfer-learning evaluation (5 months train, 1 validation, 6 test)",
       transfer_keys},
      {"score-file", "score an external prediction file",
       {kCorpus, kOut, kThreads, kBootstrap, kBootstrapSeed, kSeed,
        {"predictions", "prediction CSV"},
        {"vocab", "vocabulary file for categorical rows"},
        {"boxcox", "Box-Cox parameter file when gaussian rows are in transformed space"},
        {"sigma_floor", "lower bound on Gaussian sigma in kWh"}}},
      {"compare", "compare two runs by building",
       {{"run_a", "reference run directory"}, {"run_b", "candidate run directory"}, kOut}},
      {"report", "re-aggregate a run's buildings.csv",
       {{"run", "run directory"}, kOut, kBootstrap, kBootstrapSeed, kSeed}},
  };
}

std::string flag_name(const char* key) {
  std::string s = std::string("--") + key;
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

int fail_with(lb_status status) {
  std::fprintf(stderr, "error: %s\n", lb_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loadbench: day-ahead building load forecasting benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lb_version()));

  const auto cmds = commands();
  struct Parsed {
    std::vector<std::string> config_files;
    std::vector<std::string> sets;
    std::map<std::string, std::optional<std::string>> values;
  };
  std::map<std::string, Parsed> parsed;
  std::map<std::string, CLI::App*> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& p = parsed[cmd.name];
    sub->add_option("--config", p.config_files, "key = value config file (repeatable)");
    sub->add_option("--set", p.sets, "override any key: KEY=VALUE (repeatable)");
    for (const auto& key : cmd.keys) {
      sub->add_option(flag_name(key.name), p.values[key.name], key.help);
    }
    subs[cmd.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : LB_ERR_USAGE;
  }

  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  const auto& p = parsed[name];

  lb_config* config = nullptr;
  if (auto s = lb_config_create(&config); s != LB_OK) return fail_with(s);
  const auto finish = [&](int code) {
    lb_config_destroy(config);
    return code;
  };
  for (const auto& file : p.config_files) {
    if (auto s = lb_config_load(config, file.c_str()); s != LB_OK) return finish(fail_with(s));
  }
  for (const auto& [key, value] : p.values) {
    if (!value) continue;
    if (auto s = lb_config_set(config, key.c_str(), value->c_str()); s != LB_OK) {
      return finish(fail_with(s));
    }
  }
  for (const auto& kv : p.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
      return finish(LB_ERR_USAGE);
    }
    const auto key = kv.substr(0, eq);
    const auto value = kv.substr(eq + 1);
    if (auto s = lb_config_set(config, key.c_str(), value.c_str()); s != LB_OK) {
      return finish(fail_with(s));
    }
  }

  const char* summary = nullptr;
  if (auto s = lb_run(name.c_str(), config, &summary); s != LB_OK) return finish(fail_with(s));
  std::printf("%s\n", summary);
  return finish(0);
}
