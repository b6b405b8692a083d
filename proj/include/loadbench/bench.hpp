#pragma once

// Evaluation harness: the zero-shot and transfer protocols, run comparison,
// report emission and the subcommand entry points used by the CLI.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loadbench/forecast.hpp"
#include "loadbench/kvconfig.hpp"
#include "loadbench/metrics.hpp"
#include "loadbench/store.hpp"

namespace loadbench::bench {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::size_t kMonthDays = 30;

/// FNV-1a over the canonical config, ignoring keys that cannot change output
/// bytes (`threads`, `out`). Sixteen hex digits.
std::string config_hash(const KvConfig& config);

/// Builds the forecaster named by `forecaster` with its parameters.
std::unique_ptr<forecast::Forecaster> make_forecaster(const KvConfig& config);
forecast::TrainSchedule train_schedule(const KvConfig& config);

// ---------------------------------------------------------------------------
// Transfer split: months 1-5 train, month 6 validation, months 7-12 test, with
// 30-day months. Offsets are window start hours into the building series.

struct TransferSplit {
  std::size_t train_days = 5 * kMonthDays;
  std::size_t val_days = kMonthDays;
  std::size_t test_days = 6 * kMonthDays;
  std::vector<std::size_t> train_offsets;  // windows lying entirely in the train months
  std::vector<std::size_t> val_offsets;    // windows whose target day is a validation day
  std::vector<std::size_t> test_offsets;   // windows whose target day is a test day
};

/// nullopt when the series is shorter than twelve 30-day months.
std::optional<TransferSplit> transfer_split(std::size_t n_hours);

// ---------------------------------------------------------------------------
// Per-building evaluation.

enum class Status { Scored, Skipped, Excluded };

struct BuildingOutcome {
  std::string building_id;
  Status status = Status::Skipped;
  std::string reason;
  std::optional<metrics::BuildingScore> score;
};

struct EvalOutcome {
  std::size_t input = 0;
  std::vector<metrics::BuildingScore> scores;  // sorted by building id
  std::vector<BuildingOutcome> not_scored;     // skipped or excluded, sorted by id
  std::size_t skipped() const;
  std::size_t excluded() const;
};

/// Scores `forecaster` on each window's target day.
metrics::BuildingScore score_windows(const forecast::Forecaster& forecaster,
                                     std::span<const Window> windows, const BuildingRecord& record,
                                     const metrics::ScoringContext& ctx);

/// Runs `fn` over every building on `threads` workers; outcomes come back in
/// input order regardless of scheduling.
std::vector<BuildingOutcome> parallel_map(
    std::span<const store::CorpusBuilding* const> buildings, std::size_t threads,
    const std::function<BuildingOutcome(const store::CorpusBuilding&)>& fn);

struct EvalOptions {
  bool cap = true;  // exclude buildings above the hourly consumption cap
  double max_hourly_kw = 5100.0;
  double sigma_floor = metrics::kSigmaFloor;
  std::size_t threads = 1;
};

/// Buildings chosen for evaluation: all of them, or `per_type` residential and
/// `per_type` commercial buildings drawn with a seeded shuffle (sorted by id).
std::vector<const store::CorpusBuilding*> select_buildings(const store::Corpus& corpus,
                                                           std::optional<std::size_t> per_type,
                                                           std::uint64_t seed);

EvalOutcome evaluate_zero_shot(const store::Corpus& corpus,
                               std::span<const store::CorpusBuilding* const> buildings,
                               const KvConfig& forecaster_config, const EvalOptions& options);

EvalOutcome evaluate_transfer(const store::Corpus& corpus,
                              std::span<const store::CorpusBuilding* const> buildings,
                              const KvConfig& forecaster_config, const EvalOptions& options);

// ---------------------------------------------------------------------------
// Reports.

std::string format_buildings_csv(std::span<const metrics::BuildingScore> scores);
std::vector<metrics::BuildingScore> parse_buildings_csv(const std::string& text);

std::string format_profiles_csv(const metrics::AggregateReport& report);

struct MetricComparison {
  double p_improvement = 0.0;  // percent of buildings where run b scores lower than run a
  std::size_t n = 0;
};

struct Comparison {
  std::vector<std::string> building_ids;  // paired, sorted
  std::vector<std::string> datasets;
  std::map<std::string, std::vector<double>> a, b;  // per metric, aligned with building_ids
  std::map<std::string, MetricComparison> overall;
  std::map<std::string, std::map<std::string, MetricComparison>> by_stratum;
  std::optional<std::string> warning;
};

/// Pairs buildings by id; for each metric P(X<Y) with X = run b and Y = run a.
Comparison compare_scores(std::span<const metrics::BuildingScore> a,
                          std::span<const metrics::BuildingScore> b);

std::string format_deltas_csv(const Comparison& c);

// ---------------------------------------------------------------------------
// Subcommands. Each reads its keys from `config` and returns a short
// human-readable summary; outputs go to the `out` path.

std::string run_synth(const KvConfig& config);
std::string run_ingest(const KvConfig& config);
std::string run_index(const KvConfig& config);
std::string run_tokenize(const KvConfig& config);
std::string run_fit_boxcox(const KvConfig& config);
std::string run_zero_shot(const KvConfig& config);
std::string run_transfer(const KvConfig& config);
std::string run_score_file(const KvConfig& config);
std::string run_compare(const KvConfig& config);
std::string run_report(const KvConfig& config);

/// Dispatches on the subcommand name (`synth`, `eval-zero-shot`, ...).
std::string run_command(std::string_view name, const KvConfig& config);
std::vector<std::string> command_names();

}  // namespace loadbench::bench
