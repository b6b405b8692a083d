#include "loadbench/core.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <tuple>

#include "loadbench/error.hpp"
#include "loadbench/text.hpp"

namespace loadbench {

namespace chr = std::chrono;

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t n, std::string_view whole) {
  if (pos + n > s.size()) fail(ErrorKind::Data, "truncated timestamp '" + std::string(whole) + "'");
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') {
      fail(ErrorKind::Data, "bad timestamp '" + std::string(whole) + "'");
    }
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, char c, std::string_view whole) {
  if (pos >= s.size() || s[pos] != c) {
    fail(ErrorKind::Data, "bad timestamp '" + std::string(whole) + "'");
  }
}

std::pair<double, double> cyclic(double value, double period) {
  const double angle = 2.0 * std::numbers::pi * value / period;
  return {std::sin(angle), std::cos(angle)};
}

}  // namespace

SecondStamp parse_timestamp(std::string_view text_in) {
  const auto s = text::trim(text_in);
  const int y = digits(s, 0, 4, s);
  expect(s, 4, '-', s);
  const int mo = digits(s, 5, 2, s);
  expect(s, 7, '-', s);
  const int d = digits(s, 8, 2, s);
  if (s.size() <= 10 || (s[10] != 'T' && s[10] != ' ' && s[10] != 't')) {
    fail(ErrorKind::Data, "bad timestamp '" + std::string(s) + "'");
  }
  const int h = digits(s, 11, 2, s);
  expect(s, 13, ':', s);
  const int mi = digits(s, 14, 2, s);
  int sec = 0;
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    sec = digits(s, pos + 1, 2, s);
    pos += 3;
  }
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    const char c = s[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      const int oh = digits(s, pos + 1, 2, s);
      expect(s, pos + 3, ':', s);
      const int om = digits(s, pos + 4, 2, s);
      offset_minutes = (c == '+' ? 1 : -1) * (oh * 60 + om);
      pos += 6;
    }
  }
  if (pos != s.size()) fail(ErrorKind::Data, "bad timestamp '" + std::string(s) + "'");

  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) {
    fail(ErrorKind::Data, "invalid calendar value in '" + std::string(s) + "'");
  }
  return SecondStamp{chr::sys_days{ymd}} + chr::hours(h) + chr::minutes(mi) +
         chr::seconds(sec) - chr::minutes(offset_minutes);
}

std::string format_timestamp(HourStamp t) {
  const auto day = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{day};
  const auto hour = (t - day).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:00:00Z", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hour));
  return buf;
}

LoadSeries::LoadSeries(HourStamp start, std::vector<double> values)
    : start_(start), values_(std::move(values)) {
  if (values_.empty()) fail(ErrorKind::Data, "load series must not be empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
      fail(ErrorKind::Data, "load value at hour " + std::to_string(i) +
                                " is negative or not finite");
    }
  }
}

LoadSeries LoadSeries::slice(std::size_t offset, std::size_t length) const {
  if (offset + length > values_.size() || length == 0) {
    fail(ErrorKind::Range, "slice [" + std::to_string(offset) + ", " +
                               std::to_string(offset + length) + ") outside series of length " +
                               std::to_string(values_.size()));
  }
  return LoadSeries(timestamp(offset),
                    std::vector<double>(values_.begin() + static_cast<long>(offset),
                                        values_.begin() + static_cast<long>(offset + length)));
}

std::string_view to_string(BuildingType t) {
  return t == BuildingType::Commercial ? "commercial" : "residential";
}

BuildingType parse_building_type(std::string_view s) {
  s = text::trim(s);
  if (s == "commercial" || s == "Commercial" || s == "1") return BuildingType::Commercial;
  if (s == "residential" || s == "Residential" || s == "0") return BuildingType::Residential;
  fail(ErrorKind::Data, "unknown building type '" + std::string(s) + "'");
}

void BuildingRecord::validate() const {
  if (id.empty()) fail(ErrorKind::Data, "building id must not be empty");
  if (!(latitude >= -90.0 && latitude <= 90.0)) {
    fail(ErrorKind::Data, "building " + id + ": latitude out of range");
  }
  if (!(longitude >= -180.0 && longitude <= 180.0)) {
    fail(ErrorKind::Data, "building " + id + ": longitude out of range");
  }
}

CovariateVector extract_covariates(HourStamp t, const BuildingRecord& building) {
  const auto day = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{day};
  const auto jan1 = chr::sys_days{ymd.year() / chr::January / 1};
  const double day_of_year = static_cast<double>((day - jan1).count());
  const double weekday = static_cast<double>(chr::weekday{day}.iso_encoding() - 1);
  const double hour = static_cast<double>((t - day).count());

  CovariateVector c;
  std::tie(c.day_of_year_sin, c.day_of_year_cos) = cyclic(day_of_year, 366.0);
  std::tie(c.day_of_week_sin, c.day_of_week_cos) = cyclic(weekday, 7.0);
  std::tie(c.hour_of_day_sin, c.hour_of_day_cos) = cyclic(hour, 24.0);
  c.latitude_norm = building.latitude / 90.0;
  c.longitude_norm = building.longitude / 180.0;
  c.building_type_flag = building.building_type == BuildingType::Commercial ? 1.0 : 0.0;
  return c;
}

Window make_window(const LoadSeries& series, const BuildingRecord& building,
                   std::size_t offset) {
  if (offset + kWindowHours > series.size()) {
    fail(ErrorKind::Range, "window at hour " + std::to_string(offset) + " exceeds series");
  }
  std::vector<CovariateVector> cov;
  cov.reserve(kWindowHours);
  for (std::size_t i = 0; i < kWindowHours; ++i) {
    cov.push_back(extract_covariates(series.timestamp(offset + i), building));
  }
  return Window{series.slice(offset, kContextHours),
                series.slice(offset + kContextHours, kHorizonHours), std::move(cov)};
}

std::size_t window_count(std::size_t length, std::size_t stride) {
  if (stride == 0) fail(ErrorKind::Usage, "window stride must be >= 1");
  if (length < kWindowHours) return 0;
  return (length - kWindowHours) / stride + 1;
}

std::vector<Window> sliding_windows(const LoadSeries& series, const BuildingRecord& building,
                                    std::size_t stride) {
  const auto n = window_count(series.size(), stride);
  std::vector<Window> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(make_window(series, building, k * stride));
  return out;
}

}  // namespace loadbench
