#include "loadbench/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <algorithm>
#include <map>

#include "loadbench/error.hpp"
#include "loadbench/ingest.hpp"
#include "loadbench/rng.hpp"
#include "loadbench/store.hpp"

namespace loadbench::synth {

namespace chr = std::chrono;

void SynthConfig::validate() const {
  if (n_days == 0) fail(ErrorKind::Usage, "n_days must be >= 1");
  if (!(base_load_range.first > 0.0 && base_load_range.second >= base_load_range.first)) {
    fail(ErrorKind::Usage, "base_load_range must be positive and ordered");
  }
  if (!(peak_load_range.first > 0.0 && peak_load_range.second >= peak_load_range.first)) {
    fail(ErrorKind::Usage, "peak_load_range must be positive and ordered");
  }
  if (!(commercial_scale > 0.0)) fail(ErrorKind::Usage, "commercial_scale must be > 0");
  if (!(noise_scale >= 0.0)) fail(ErrorKind::Usage, "noise_scale must be >= 0");
  if (!(weekend_attenuation >= 0.0 && weekend_attenuation <= 1.0)) {
    fail(ErrorKind::Usage, "weekend_attenuation must lie in [0, 1]");
  }
  if (n_regions == 0) fail(ErrorKind::Usage, "n_regions must be >= 1");
}

namespace {

double bump(double hour, double centre, double width) {
  const double z = (hour - centre) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

std::pair<BuildingRecord, LoadSeries> generate_building(const SynthConfig& config,
                                                        std::size_t ordinal) {
  config.validate();
  if (ordinal >= config.size()) fail(ErrorKind::Range, "building ordinal out of range");
  const bool commercial = ordinal >= config.n_residential;
  Rng rng(config.seed, ordinal);

  const double scale = commercial ? config.commercial_scale : 1.0;
  const double base = rng.uniform(config.base_load_range.first, config.base_load_range.second) * scale;
  const double peak = rng.uniform(config.peak_load_range.first, config.peak_load_range.second) * scale;
  const double phase = rng.uniform(-1.0, 1.0);

  BuildingRecord rec;
  char id[32];
  std::snprintf(id, sizeof id, "%s-%05zu", commercial ? "com" : "res", ordinal);
  rec.id = id;
  rec.building_type = commercial ? BuildingType::Commercial : BuildingType::Residential;
  rec.latitude = rng.uniform(25.0, 49.0);
  rec.longitude = rng.uniform(-124.0, -67.0);
  char region[32];
  std::snprintf(region, sizeof region, "R%02zu", ordinal % config.n_regions);
  rec.region_id = region;
  rec.dataset_name = commercial ? "synthetic-commercial" : "synthetic-residential";

  // Residential homes are noisier and get sporadic appliance spikes.
  const double sigma = config.noise_scale * (commercial ? 1.0 : 3.0);
  const double spike_rate = commercial ? 0.0 : 0.02 * std::min(1.0, config.noise_scale / 0.1);

  std::vector<double> values(config.n_days * 24);
  double day_level = 1.0;
  for (std::size_t h = 0; h < values.size(); ++h) {
    const auto t = config.start + chr::hours(static_cast<long>(h));
    const auto day = chr::floor<chr::days>(t);
    const double hour = static_cast<double>((t - day).count());
    const bool weekend = chr::weekday{day}.iso_encoding() >= 6;

    double shape;
    if (commercial) {
      shape = bump(hour, 13.0 + phase, 3.0) * (weekend ? 1.0 - config.weekend_attenuation : 1.0);
    } else {
      const double morning = weekend ? 9.0 : 7.5;
      shape = 0.6 * bump(hour, morning + phase, 1.5) + bump(hour, 19.0 + phase, 2.2);
    }
    double v = base + peak * shape;

    if (sigma > 0.0) {
      if (hour == 0.0 || h == 0) {
        day_level = std::exp(0.5 * sigma * rng.normal() - 0.125 * sigma * sigma);
      }
      const double eps = rng.normal();
      v *= day_level * std::exp(sigma * eps - 0.5 * sigma * sigma);
      if (spike_rate > 0.0 && rng.uniform() < spike_rate) v += peak * rng.uniform(0.5, 1.5);
    }
    values[h] = v;
  }
  return {std::move(rec), LoadSeries(config.start, std::move(values))};
}

void write_corpus(const SynthConfig& config, const std::string& dir) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "data");

  struct Group {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> columns;
  };
  std::map<std::string, Group> groups;
  std::vector<BuildingRecord> records;
  const int year = static_cast<int>(chr::year_month_day{chr::floor<chr::days>(config.start)}.year());
  for (std::size_t i = 0; i < config.size(); ++i) {
    auto [rec, series] = generate_building(config, i);
    const auto key = rec.region_id + "_" + std::string(to_string(rec.building_type)) + "_" +
                     std::to_string(year);
    auto& g = groups[key];
    g.ids.push_back(rec.id);
    g.columns.emplace_back(series.values().begin(), series.values().end());
    records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  ingest::write_metadata_csv((fs::path(dir) / "metadata.csv").string(), records);
  for (const auto& [key, g] : groups) {
    store::write_shard_csv((fs::path(dir) / "data" / (key + ".csv")).string(), config.start, g.ids,
                           g.columns);
  }
}

}  // namespace loadbench::synth
