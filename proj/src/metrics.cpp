#include "loadbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "loadbench/rng.hpp"
#include "loadbench/text.hpp"

namespace loadbench::metrics {

namespace {

double mean_actual(std::span<const double> actual, std::span<const double> pred) {
  if (actual.size() != pred.size() || actual.empty()) {
    fail(ErrorKind::Usage, "actuals and predictions must be non-empty and equally long");
  }
  double sum = 0.0;
  for (double v : actual) sum += v;
  const double mean = sum / static_cast<double>(actual.size());
  if (!(mean > 0.0)) throw UndefinedScore("mean actual load is zero; normalized scores undefined");
  return mean;
}

}  // namespace

double nrmse(std::span<const double> actual, std::span<const double> pred) {
  const double ybar = mean_actual(actual, pred);
  double sq = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sq += (actual[i] - pred[i]) * (actual[i] - pred[i]);
  return 100.0 / ybar * std::sqrt(sq / static_cast<double>(actual.size()));
}

double nmae(std::span<const double> actual, std::span<const double> pred) {
  const double ybar = mean_actual(actual, pred);
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) s += std::abs(actual[i] - pred[i]);
  return 100.0 / ybar * s / static_cast<double>(actual.size());
}

double nmbe(std::span<const double> actual, std::span<const double> pred) {
  const double ybar = mean_actual(actual, pred);
  double s = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) s += actual[i] - pred[i];
  return 100.0 / ybar * s / static_cast<double>(actual.size());
}

double gaussian_crps(double y, double mu, double sigma, double sigma_floor) {
  if (std::isnan(sigma)) fail(ErrorKind::Data, "Gaussian sigma is NaN");
  const double s = std::max(sigma, sigma_floor);
  const double z = (y - mu) / s;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return s * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

double categorical_rps(std::size_t y_token, std::span<const double> mass,
                       const tokenizer::TokenVocabulary& vocab) {
  if (mass.size() != vocab.size()) {
    fail(ErrorKind::Data, "categorical mass has " + std::to_string(mass.size()) +
                              " entries, vocabulary has " + std::to_string(vocab.size()));
  }
  if (y_token >= vocab.size()) fail(ErrorKind::Range, "observed token outside vocabulary");
  double total = 0.0;
  for (double m : mass) {
    if (!(m >= 0.0)) fail(ErrorKind::Data, "categorical mass must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    fail(ErrorKind::Data, "categorical mass sums to " + text::format_double(total) + ", not 1");
  }
  double cdf = 0.0, rps = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    cdf += mass[k];
    const double step = k >= y_token ? 1.0 : 0.0;
    rps += (cdf - step) * (cdf - step) * vocab.bin_width[k];
  }
  return rps;
}

HourScore score_hour(const ForecastDistribution& forecast, std::size_t hour, double actual,
                     const ScoringContext& ctx) {
  if (hour >= kHorizonHours) fail(ErrorKind::Range, "forecast hour out of range");
  HourScore out;
  if (const auto* p = std::get_if<PointForecast>(&forecast)) {
    out.point = p->values[hour];
  } else if (const auto* g = std::get_if<GaussianForecast>(&forecast)) {
    double mu = g->mu[hour];
    double sigma = g->sigma[hour];
    if (g->boxcox_space) {
      if (!ctx.boxcox) fail(ErrorKind::Usage, "Box-Cox space forecast scored without Box-Cox parameters");
      const auto bp = transform::backproject_gaussian(mu, sigma, *ctx.boxcox);
      mu = bp.mu;
      sigma = bp.sigma;
      out.flagged = bp.low_confidence;
    }
    if (sigma < ctx.sigma_floor) out.flagged = true;
    out.point = mu;
    out.rps = gaussian_crps(actual, mu, sigma, ctx.sigma_floor);
  } else {
    const auto& c = std::get<CategoricalForecast>(forecast);
    if (!ctx.vocab) fail(ErrorKind::Usage, "categorical forecast scored without a vocabulary");
    if (c.mass.size() != kHorizonHours) fail(ErrorKind::Data, "categorical forecast needs 24 rows");
    const auto& mass = c.mass[hour];
    out.rps = categorical_rps(tokenizer::encode(actual, *ctx.vocab), mass, *ctx.vocab);
    double cdf = 0.0;
    std::size_t median_token = mass.size() - 1;
    for (std::size_t k = 0; k < mass.size(); ++k) {
      cdf += mass[k];
      if (cdf >= 0.5) {
        median_token = k;
        break;
      }
    }
    out.point = tokenizer::decode(median_token, *ctx.vocab);
  }
  return out;
}

BuildingScore score_building(const std::string& id, const std::string& dataset,
                             std::span<const HourArray> actual_days,
                             std::span<const ForecastDistribution> forecasts,
                             const ScoringContext& ctx) {
  if (actual_days.size() != forecasts.size() || actual_days.empty()) {
    fail(ErrorKind::Usage, "building " + id + ": need one forecast per actual day");
  }
  std::vector<double> actual, point;
  actual.reserve(actual_days.size() * kHorizonHours);
  point.reserve(actual.capacity());
  double rps_sum = 0.0;
  std::size_t rps_n = 0;
  BuildingScore s;
  s.building_id = id;
  s.dataset = dataset;
  s.n_days = actual_days.size();
  for (std::size_t d = 0; d < actual_days.size(); ++d) {
    for (std::size_t h = 0; h < kHorizonHours; ++h) {
      const auto hs = score_hour(forecasts[d], h, actual_days[d][h], ctx);
      actual.push_back(actual_days[d][h]);
      point.push_back(hs.point);
      if (hs.rps) {
        rps_sum += *hs.rps;
        ++rps_n;
      }
      if (hs.flagged) ++s.flagged_hours;
    }
  }
  s.nrmse = nrmse(actual, point);
  s.nmae = nmae(actual, point);
  s.nmbe = nmbe(actual, point);
  if (rps_n > 0) s.rps = rps_sum / static_cast<double>(rps_n);
  return s;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::Usage, "percentile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

double median(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return percentile(v, 0.5);
}

namespace {

std::vector<std::vector<std::size_t>> group_by_stratum(std::span<const std::string> strata,
                                                       std::size_t n) {
  if (!strata.empty() && strata.size() != n) fail(ErrorKind::Usage, "strata must match scores");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[strata.empty() ? std::string() : strata[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [name, idx] : groups) out.push_back(std::move(idx));
  return out;
}

}  // namespace

Interval bootstrap_median(std::span<const double> scores, std::span<const std::string> strata,
                          std::size_t n_boot, std::uint64_t seed) {
  if (scores.empty()) fail(ErrorKind::Usage, "bootstrap of empty scores");
  if (n_boot == 0) fail(ErrorKind::Usage, "bootstrap needs at least one replicate");
  const auto groups = group_by_stratum(strata, scores.size());
  Rng rng(seed, 0xb007);
  std::vector<double> medians(n_boot), sample;
  sample.reserve(scores.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    sample.clear();
    for (const auto& g : groups) {
      for (std::size_t i = 0; i < g.size(); ++i) sample.push_back(scores[g[rng.below(g.size())]]);
    }
    std::sort(sample.begin(), sample.end());
    medians[b] = percentile(sample, 0.5);
  }
  std::sort(medians.begin(), medians.end());
  return {median(scores), percentile(medians, 0.025), percentile(medians, 0.975), scores.size()};
}

std::vector<ProfilePoint> performance_profile(std::span<const double> scores,
                                              std::span<const double> thresholds,
                                              std::size_t n_boot, std::uint64_t seed) {
  if (scores.empty()) fail(ErrorKind::Usage, "performance profile of empty scores");
  const auto fraction_above = [&](const std::vector<double>& sorted, double t) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(above) / static_cast<double>(sorted.size());
  };
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());

  // The same resample serves every threshold, so each replicate curve is monotone.
  std::vector<std::vector<double>> boot(thresholds.size(), std::vector<double>(n_boot));
  Rng rng(seed, 0x9f0f);
  std::vector<double> sample(scores.size());
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (auto& v : sample) v = scores[rng.below(scores.size())];
    std::sort(sample.begin(), sample.end());
    for (std::size_t t = 0; t < thresholds.size(); ++t) boot[t][b] = fraction_above(sample, thresholds[t]);
  }
  std::vector<ProfilePoint> out;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    ProfilePoint p;
    p.threshold = thresholds[t];
    p.fraction = fraction_above(sorted, thresholds[t]);
    if (n_boot > 0) {
      std::sort(boot[t].begin(), boot[t].end());
      p.lower = percentile(boot[t], 0.025);
      p.upper = percentile(boot[t], 0.975);
    } else {
      p.lower = p.upper = p.fraction;
    }
    out.push_back(p);
  }
  return out;
}

double probability_of_improvement(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::Usage, "paired scores differ in length");
  if (x.empty()) fail(ErrorKind::Usage, "probability of improvement needs at least one pair");
  std::size_t better = 0;
  for (std::size_t i = 0; i < x.size(); ++i) better += x[i] < y[i] ? 1 : 0;
  return 100.0 * static_cast<double>(better) / static_cast<double>(x.size());
}

AggregateReport aggregate(std::span<const BuildingScore> scores, std::size_t n_boot,
                          std::uint64_t seed) {
  AggregateReport report;
  report.n_buildings = scores.size();
  const std::pair<const char*, std::optional<double> (*)(const BuildingScore&)> fields[] = {
      {"nrmse", [](const BuildingScore& s) -> std::optional<double> { return s.nrmse; }},
      {"nmae", [](const BuildingScore& s) -> std::optional<double> { return s.nmae; }},
      {"nmbe", [](const BuildingScore& s) -> std::optional<double> { return s.nmbe; }},
      {"rps", [](const BuildingScore& s) { return s.rps; }},
  };
  for (const auto& [name, get] : fields) {
    std::vector<double> values;
    std::vector<std::string> strata;
    for (const auto& s : scores) {
      if (const auto v = get(s)) {
        values.push_back(*v);
        strata.push_back(s.dataset);
      }
    }
    if (values.empty()) continue;
    const auto stream = text::fnv1a64(name);
    MetricSummary m;
    m.overall = bootstrap_median(values, strata, n_boot, seed ^ stream);

    std::map<std::string, std::vector<double>> per;
    for (std::size_t i = 0; i < values.size(); ++i) per[strata[i]].push_back(values[i]);
    for (const auto& [stratum, vals] : per) {
      m.by_stratum[stratum] =
          bootstrap_median(vals, {}, n_boot, seed ^ stream ^ text::fnv1a64(stratum));
    }

    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    std::vector<double> thresholds;
    if (*lo == *hi) {
      thresholds.push_back(*lo);
    } else {
      for (std::size_t i = 0; i < kProfilePoints; ++i) {
        thresholds.push_back(*lo + (*hi - *lo) * static_cast<double>(i) /
                                       static_cast<double>(kProfilePoints - 1));
      }
    }
    m.profile = performance_profile(values, thresholds, n_boot, seed ^ stream ^ 0x9f);
    report.metrics[name] = std::move(m);
  }
  return report;
}

}  // namespace loadbench::metrics
