#pragma once

// Domain types shared by every module: hourly load series, building
// metadata, calendar/metadata covariates and the 168h + 24h forecast window.

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loadbench {

inline constexpr std::size_t kContextHours = 168;
inline constexpr std::size_t kHorizonHours = 24;
inline constexpr std::size_t kWindowHours = kContextHours + kHorizonHours;

/// Hour-aligned UTC instant.
using HourStamp = std::chrono::sys_time<std::chrono::hours>;
/// Second-resolution UTC instant, used for raw (possibly sub-hourly) samples.
using SecondStamp = std::chrono::sys_seconds;

/// Accepts RFC 3339 (`2018-01-01T00:00:00Z`, `...+02:00`, fractional seconds)
/// and `YYYY-MM-DD HH:MM:SS`. Timestamps without an offset are taken as UTC.
SecondStamp parse_timestamp(std::string_view text);
/// `YYYY-MM-DDTHH:00:00Z`
std::string format_timestamp(HourStamp t);

/// Hourly kWh values starting at `start`; value i belongs to start + i hours.
class LoadSeries {
 public:
  LoadSeries(HourStamp start, std::vector<double> values);

  HourStamp start() const { return start_; }
  HourStamp timestamp(std::size_t i) const {
    return start_ + std::chrono::hours(static_cast<long>(i));
  }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Sub-series [offset, offset + length).
  LoadSeries slice(std::size_t offset, std::size_t length) const;

 private:
  HourStamp start_;
  std::vector<double> values_;
};

enum class BuildingType { Residential, Commercial };

std::string_view to_string(BuildingType t);
BuildingType parse_building_type(std::string_view s);

struct BuildingRecord {
  std::string id;
  BuildingType building_type = BuildingType::Residential;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string region_id;
  std::string dataset_name;

  /// Throws Error(Data) when coordinates are out of range or id is empty.
  void validate() const;
};

struct CovariateVector {
  double day_of_year_sin = 0, day_of_year_cos = 1;
  double day_of_week_sin = 0, day_of_week_cos = 1;
  double hour_of_day_sin = 0, hour_of_day_cos = 1;
  double latitude_norm = 0, longitude_norm = 0;
  double building_type_flag = 0;
};

/// Calendar fields are zero-indexed (day of year 0..365 with period 366,
/// Monday = 0 with period 7, hour 0..23 with period 24) and each value c with
/// period P maps to (sin(2*pi*c/P), cos(2*pi*c/P)).
CovariateVector extract_covariates(HourStamp t, const BuildingRecord& building);

struct Window {
  LoadSeries context;  // kContextHours values
  LoadSeries target;   // kHorizonHours values, immediately after context
  std::vector<CovariateVector> covariates;  // kWindowHours entries
};

/// Builds the window starting at `offset`; requires offset + 192 <= size.
Window make_window(const LoadSeries& series, const BuildingRecord& building,
                   std::size_t offset);

/// floor((len - 192) / stride) + 1 windows, window k starting at k * stride.
/// Series shorter than 192 hours yield no windows.
std::vector<Window> sliding_windows(const LoadSeries& series,
                                    const BuildingRecord& building,
                                    std::size_t stride);

std::size_t window_count(std::size_t length, std::size_t stride);

}  // namespace loadbench
