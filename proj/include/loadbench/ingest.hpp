#pragma once

// Real-building CSV ingestion: hourly resampling, gap filling, exclusion
// rules and 1-NN spike removal.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "loadbench/core.hpp"

namespace loadbench::ingest {

enum class Aggregation { Sum, Mean };

Aggregation parse_aggregation(std::string_view s);

struct IngestPolicy {
  double max_missing_fraction = 0.10;
  std::size_t long_gap_threshold = 168;  // hours
  double max_hourly_kw = 5100.0;         // kW; infinity disables the cap
  std::size_t outlier_window = 24;       // hours
  Aggregation aggregation = Aggregation::Mean;

  void validate() const;
};

/// A building dropped by one of the exclusion rules.
struct Excluded {
  std::string reason;
};

struct RawSample {
  SecondStamp timestamp;
  std::optional<double> kwh;  // empty CSV field -> missing
};

/// Hourly values before gap filling; nullopt marks an hour with no data.
struct HourlyWithGaps {
  HourStamp start;
  std::vector<std::optional<double>> values;
};

/// One value per clock hour from floor(first) to floor(last). Sum adds the
/// samples inside an hour, Mean averages them. Hours without any present
/// sample stay missing. Unsorted input is rejected.
HourlyWithGaps resample_hourly(std::span<const RawSample> raw, Aggregation aggregation);

/// Interior gaps up to `long_gap_threshold` hours are linearly interpolated,
/// longer ones are zero-filled. Leading/trailing gaps copy the nearest
/// observation when short and are zero-filled when long.
std::variant<LoadSeries, Excluded> fill_missing(const HourlyWithGaps& series,
                                                const IngestPolicy& policy);

/// Replaces values whose nearest-neighbour distance inside a centred window
/// (12 h before, 11 h after for the default 24 h) exceeds the average daily
/// peak minus the average daily base load with the window median. All
/// comparisons use the input values, so one replacement never affects another.
LoadSeries remove_outliers(const LoadSeries& series, const IngestPolicy& policy);

std::variant<LoadSeries, Excluded> apply_consumption_cap(const LoadSeries& series,
                                                         const IngestPolicy& policy);

/// resample -> fill -> cap -> outliers.
std::variant<LoadSeries, Excluded> clean_building(std::span<const RawSample> raw,
                                                  const IngestPolicy& policy);

/// Reads `timestamp,kwh`; empty kwh fields are missing values.
std::vector<RawSample> read_building_csv(const std::string& path);

/// Reads `id,dataset,building_type,latitude,longitude,region_id`.
std::vector<BuildingRecord> read_metadata_csv(const std::string& path);
void write_metadata_csv(const std::string& path, std::span<const BuildingRecord> buildings);

}  // namespace loadbench::ingest
