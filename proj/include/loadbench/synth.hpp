#pragma once

// Seeded generator of simulated residential and commercial hourly loads.

#include <cstdint>
#include <string>
#include <utility>

#include "loadbench/core.hpp"

namespace loadbench::synth {

struct SynthConfig {
  std::size_t n_residential = 10;
  std::size_t n_commercial = 10;
  std::size_t n_days = 365;
  std::uint64_t seed = 0;
  std::pair<double, double> base_load_range{0.3, 0.8};  // kWh, residential scale
  std::pair<double, double> peak_load_range{0.8, 2.0};  // kWh, residential scale
  double commercial_scale = 25.0;  // commercial magnitudes relative to the ranges
  double noise_scale = 0.1;
  double weekend_attenuation = 0.7;  // fraction of the commercial bump removed on weekends
  std::size_t n_regions = 2;
  /// 2018-01-01 is a Monday.
  HourStamp start = HourStamp{std::chrono::sys_days{std::chrono::year{2018} / 1 / 1}};

  void validate() const;
  std::size_t size() const { return n_residential + n_commercial; }
};

/// Ordinals [0, n_residential) are residential, the rest commercial. The
/// result depends only on (config, ordinal).
std::pair<BuildingRecord, LoadSeries> generate_building(const SynthConfig& config,
                                                        std::size_t building_ordinal);

/// Writes `<dir>/metadata.csv` and one shard `<dir>/data/<region>_<type>_<year>.csv`
/// per (region, type) group.
void write_corpus(const SynthConfig& config, const std::string& dir);

}  // namespace loadbench::synth
