#pragma once

// Scoring rules and statistical aggregation of per-building scores.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "loadbench/core.hpp"
#include "loadbench/error.hpp"
#include "loadbench/tokenizer.hpp"
#include "loadbench/transform.hpp"

namespace loadbench::metrics {

inline constexpr double kSigmaFloor = 1e-6;  // kWh

/// Mean actual load is zero, so the normalized scores are undefined.
class UndefinedScore : public Error {
 public:
  explicit UndefinedScore(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Percent scores over M x 24 values (flattened); normalized by the mean actual.
double nrmse(std::span<const double> actual, std::span<const double> pred);
double nmae(std::span<const double> actual, std::span<const double> pred);
double nmbe(std::span<const double> actual, std::span<const double> pred);

/// Closed-form CRPS of N(mu, sigma^2) at y; sigma below `sigma_floor` is raised to it.
double gaussian_crps(double y, double mu, double sigma, double sigma_floor = kSigmaFloor);

/// sum_k (F_pred[k] - F_obs[k])^2 * bin_width[k], with F_obs the step at y_token.
/// Mass must sum to 1 within 1e-6.
double categorical_rps(std::size_t y_token, std::span<const double> mass,
                       const tokenizer::TokenVocabulary& vocab);

using HourArray = std::array<double, kHorizonHours>;

struct PointForecast {
  HourArray values{};
};

struct GaussianForecast {
  HourArray mu{};
  HourArray sigma{};
  bool boxcox_space = false;  // parameters live in Box-Cox space
};

struct CategoricalForecast {
  std::vector<std::vector<double>> mass;  // kHorizonHours rows over the vocabulary
};

using ForecastDistribution = std::variant<PointForecast, GaussianForecast, CategoricalForecast>;

struct ScoringContext {
  const tokenizer::TokenVocabulary* vocab = nullptr;
  const transform::BoxCoxParams* boxcox = nullptr;
  double sigma_floor = kSigmaFloor;
};

struct HourScore {
  double point = 0.0;  // kWh value used for the accuracy metrics
  std::optional<double> rps;
  bool flagged = false;  // sigma floored or back-projection clamped
};

/// Gaussian -> closed-form CRPS (back-projected first when in Box-Cox space),
/// Categorical -> categorical RPS of the encoded actual (point = median token),
/// Point -> accuracy only.
HourScore score_hour(const ForecastDistribution& forecast, std::size_t hour, double actual,
                     const ScoringContext& ctx);

inline std::optional<double> rps_dispatch(const ForecastDistribution& forecast, std::size_t hour,
                                          double actual, const ScoringContext& ctx) {
  return score_hour(forecast, hour, actual, ctx).rps;
}

struct BuildingScore {
  std::string building_id;
  std::string dataset;
  double nrmse = 0.0;
  double nmae = 0.0;
  double nmbe = 0.0;
  std::optional<double> rps;  // kWh, mean over hours and days
  std::size_t n_days = 0;
  std::size_t flagged_hours = 0;
};

/// Throws UndefinedScore when the mean actual load is zero.
BuildingScore score_building(const std::string& id, const std::string& dataset,
                             std::span<const HourArray> actual_days,
                             std::span<const ForecastDistribution> forecasts,
                             const ScoringContext& ctx);

double median(std::span<const double> values);
/// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::span<const double> sorted, double q);

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
};

/// Median with a 95% percentile-bootstrap interval; buildings are resampled
/// with replacement inside each stratum.
Interval bootstrap_median(std::span<const double> scores, std::span<const std::string> strata,
                          std::size_t n_boot, std::uint64_t seed);

struct ProfilePoint {
  double threshold = 0.0;
  double fraction = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Fraction of buildings with score > threshold, with per-point 95% bootstrap CIs.
std::vector<ProfilePoint> performance_profile(std::span<const double> scores,
                                              std::span<const double> thresholds,
                                              std::size_t n_boot, std::uint64_t seed);

/// 100/N * #{i : x_i < y_i}.
double probability_of_improvement(std::span<const double> x, std::span<const double> y);

struct MetricSummary {
  Interval overall;
  std::map<std::string, Interval> by_stratum;
  std::vector<ProfilePoint> profile;
};

struct AggregateReport {
  std::map<std::string, MetricSummary> metrics;  // nrmse, nmae, nmbe, rps
  std::size_t n_buildings = 0;
};

inline constexpr std::size_t kDefaultBootstrap = 1000;
inline constexpr std::size_t kProfilePoints = 41;

AggregateReport aggregate(std::span<const BuildingScore> scores, std::size_t n_boot,
                          std::uint64_t seed);

}  // namespace loadbench::metrics
