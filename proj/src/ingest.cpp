#include "loadbench/ingest.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "loadbench/error.hpp"
#include "loadbench/text.hpp"

namespace loadbench::ingest {

namespace chr = std::chrono;

Aggregation parse_aggregation(std::string_view s) {
  if (s == "sum") return Aggregation::Sum;
  if (s == "mean") return Aggregation::Mean;
  fail(ErrorKind::Usage, "aggregation must be 'sum' or 'mean', got '" + std::string(s) + "'");
}

void IngestPolicy::validate() const {
  if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
    fail(ErrorKind::Usage, "max_missing_fraction must lie in [0, 1]");
  }
  if (long_gap_threshold == 0) fail(ErrorKind::Usage, "long_gap_threshold must be > 0");
  if (!(max_hourly_kw > 0.0)) fail(ErrorKind::Usage, "max_hourly_kw must be > 0");
  if (outlier_window < 2) fail(ErrorKind::Usage, "outlier_window must be >= 2 hours");
}

HourlyWithGaps resample_hourly(std::span<const RawSample> raw, Aggregation aggregation) {
  if (raw.empty()) fail(ErrorKind::Data, "no samples to resample");
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i].timestamp < raw[i - 1].timestamp) {
      fail(ErrorKind::Data, "samples are not sorted by timestamp (row " + std::to_string(i + 1) +
                                " precedes row " + std::to_string(i) + ")");
    }
  }
  const auto first = chr::floor<chr::hours>(raw.front().timestamp);
  const auto last = chr::floor<chr::hours>(raw.back().timestamp);
  const auto n = static_cast<std::size_t>((last - first).count()) + 1;

  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& s : raw) {
    if (!s.kwh) continue;
    const auto h = static_cast<std::size_t>((chr::floor<chr::hours>(s.timestamp) - first).count());
    sum[h] += *s.kwh;
    ++count[h];
  }

  HourlyWithGaps out{first, std::vector<std::optional<double>>(n)};
  for (std::size_t h = 0; h < n; ++h) {
    if (count[h] == 0) continue;
    out.values[h] = aggregation == Aggregation::Sum ? sum[h] : sum[h] / static_cast<double>(count[h]);
  }
  return out;
}

std::variant<LoadSeries, Excluded> fill_missing(const HourlyWithGaps& series,
                                                const IngestPolicy& policy) {
  const auto& in = series.values;
  const std::size_t n = in.size();
  if (n == 0) return Excluded{"empty series"};

  std::size_t missing = 0;
  for (const auto& v : in) {
    if (!v) {
      ++missing;
    } else if (!std::isfinite(*v) || *v < 0.0) {
      return Excluded{"negative or non-finite readings"};
    }
  }
  if (missing == n) return Excluded{"all values missing"};
  const double fraction = static_cast<double>(missing) / static_cast<double>(n);
  if (fraction > policy.max_missing_fraction) {
    return Excluded{"missing fraction " + text::format_double(fraction) + " exceeds " +
                    text::format_double(policy.max_missing_fraction)};
  }

  std::vector<double> out(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    if (in[i]) {
      out[i] = *in[i];
      ++i;
      continue;
    }
    const std::size_t a = i;
    while (i < n && !in[i]) ++i;
    const std::size_t b = i;  // gap is [a, b)
    const bool long_gap = (b - a) > policy.long_gap_threshold;
    if (long_gap) continue;  // zeros already in place
    if (a == 0) {
      std::fill(out.begin(), out.begin() + static_cast<long>(b), *in[b]);
    } else if (b == n) {
      std::fill(out.begin() + static_cast<long>(a), out.end(), *in[a - 1]);
    } else {
      const double left = *in[a - 1];
      const double right = *in[b];
      const double span = static_cast<double>(b - (a - 1));
      for (std::size_t k = a; k < b; ++k) {
        out[k] = left + (right - left) * static_cast<double>(k - (a - 1)) / span;
      }
    }
  }
  return LoadSeries(series.start, std::move(out));
}

LoadSeries remove_outliers(const LoadSeries& series, const IngestPolicy& policy) {
  const auto v = series.values();
  const std::size_t n = v.size();
  const std::size_t w = policy.outlier_window;
  if (n < w) {
    fail(ErrorKind::Data, "series of " + std::to_string(n) +
                              " hours is shorter than the outlier window");
  }

  // Average daily peak and base over UTC calendar days.
  std::map<chr::sys_days, std::pair<double, double>> days;
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = chr::floor<chr::days>(series.timestamp(i));
    auto [it, inserted] = days.try_emplace(d, v[i], v[i]);
    if (!inserted) {
      it->second.first = std::max(it->second.first, v[i]);
      it->second.second = std::min(it->second.second, v[i]);
    }
  }
  double peak = 0.0, base = 0.0;
  for (const auto& [d, pb] : days) {
    peak += pb.first;
    base += pb.second;
  }
  const double threshold = (peak - base) / static_cast<double>(days.size());

  const std::size_t before = w / 2;
  const std::size_t after = w - before - 1;
  std::vector<double> out(v.begin(), v.end());
  std::vector<double> scratch;
  scratch.reserve(w);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n, i + after + 1);
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = lo; j < hi; ++j) {
      if (j != i) nearest = std::min(nearest, std::abs(v[i] - v[j]));
    }
    if (!(nearest > threshold)) continue;

    scratch.assign(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi));
    std::sort(scratch.begin(), scratch.end());
    const std::size_t m = scratch.size();
    out[i] = m % 2 == 1 ? scratch[m / 2] : 0.5 * (scratch[m / 2 - 1] + scratch[m / 2]);
  }
  return LoadSeries(series.start(), std::move(out));
}

std::variant<LoadSeries, Excluded> apply_consumption_cap(const LoadSeries& series,
                                                         const IngestPolicy& policy) {
  const auto v = series.values();
  const double peak = *std::max_element(v.begin(), v.end());
  // One-hour resolution: a kW cap is a kWh-per-hour cap.
  if (peak > policy.max_hourly_kw) {
    return Excluded{"max hourly consumption " + text::format_double(peak) + " kWh exceeds cap " +
                    text::format_double(policy.max_hourly_kw)};
  }
  return series;
}

std::variant<LoadSeries, Excluded> clean_building(std::span<const RawSample> raw,
                                                  const IngestPolicy& policy) {
  policy.validate();
  auto filled = fill_missing(resample_hourly(raw, policy.aggregation), policy);
  if (auto* ex = std::get_if<Excluded>(&filled)) return *ex;
  auto capped = apply_consumption_cap(std::get<LoadSeries>(filled), policy);
  if (auto* ex = std::get_if<Excluded>(&capped)) return *ex;
  const auto& series = std::get<LoadSeries>(capped);
  if (series.size() < policy.outlier_window) {
    return Excluded{"shorter than the outlier window"};
  }
  return remove_outliers(series, policy);
}

std::vector<RawSample> read_building_csv(const std::string& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) fail(ErrorKind::Data, path + ": empty file");
  const auto header = text::split(lines[0], ',');
  if (header.size() != 2 || text::trim(header[0]) != "timestamp" ||
      text::trim(header[1]) != "kwh") {
    fail(ErrorKind::Data, path + ": expected header 'timestamp,kwh'");
  }
  std::vector<RawSample> out;
  out.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto fields = text::split(lines[i], ',');
    if (fields.size() != 2) {
      fail(ErrorKind::Data, path + ":" + std::to_string(i + 1) + ": expected 2 fields");
    }
    try {
      RawSample s{parse_timestamp(fields[0]), std::nullopt};
      const auto value = text::trim(fields[1]);
      if (!value.empty() && value != "nan" && value != "NaN" && value != "NA") {
        s.kwh = text::parse_double(value);
      }
      out.push_back(s);
    } catch (const Error& e) {
      fail(ErrorKind::Data, path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::vector<BuildingRecord> read_metadata_csv(const std::string& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) fail(ErrorKind::Data, path + ": empty metadata file");
  const auto header = text::split(lines[0], ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(text::trim(header[i]))] = i;
  for (const char* name : {"id", "dataset", "building_type", "latitude", "longitude", "region_id"}) {
    if (!col.count(name)) fail(ErrorKind::Data, path + ": missing column '" + name + "'");
  }
  std::vector<BuildingRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split(lines[i], ',');
    if (f.size() != header.size()) {
      fail(ErrorKind::Data, path + ":" + std::to_string(i + 1) + ": wrong field count");
    }
    try {
      BuildingRecord r;
      r.id = std::string(text::trim(f[col["id"]]));
      r.dataset_name = std::string(text::trim(f[col["dataset"]]));
      r.building_type = parse_building_type(f[col["building_type"]]);
      r.latitude = text::parse_double(f[col["latitude"]]);
      r.longitude = text::parse_double(f[col["longitude"]]);
      r.region_id = std::string(text::trim(f[col["region_id"]]));
      r.validate();
      out.push_back(std::move(r));
    } catch (const Error& e) {
      fail(ErrorKind::Data, path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void write_metadata_csv(const std::string& path, std::span<const BuildingRecord> buildings) {
  std::string out = "id,dataset,building_type,latitude,longitude,region_id\n";
  for (const auto& b : buildings) {
    out += b.id + "," + b.dataset_name + "," + std::string(to_string(b.building_type)) + "," +
           text::format_double(b.latitude) + "," + text::format_double(b.longitude) + "," +
           b.region_id + "\n";
  }
  text::write_file(path, out);
}

}  // namespace loadbench::ingest
