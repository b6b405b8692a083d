#include "loadbench/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>

#include "loadbench/error.hpp"
#include "loadbench/ingest.hpp"
#include "loadbench/kvconfig.hpp"
#include "loadbench/rng.hpp"
#include "loadbench/text.hpp"

namespace loadbench::store {

namespace fs = std::filesystem;
namespace chr = std::chrono;

ShardTable read_shard_csv(const std::string& path) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) fail(ErrorKind::Data, path + ": empty shard");
  const auto header = text::split(lines[0], ',');
  if (header.size() < 2 || text::trim(header[0]) != "timestamp") {
    fail(ErrorKind::Data, path + ": shard header must be 'timestamp,<id>,...'");
  }
  ShardTable t;
  t.path = path;
  for (std::size_t c = 1; c < header.size(); ++c) t.ids.emplace_back(text::trim(header[c]));
  t.columns.assign(t.ids.size(), {});
  std::size_t row = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto f = text::split(lines[i], ',');
    const auto where = path + ":" + std::to_string(i + 1);
    if (f.size() != header.size()) fail(ErrorKind::Data, where + ": wrong field count");
    try {
      const auto ts = chr::floor<chr::hours>(parse_timestamp(f[0]));
      if (row == 0) {
        t.start = ts;
      } else if (ts != t.start + chr::hours(static_cast<long>(row))) {
        fail(ErrorKind::Data, "timestamps must be consecutive hours");
      }
      for (std::size_t c = 1; c < f.size(); ++c) t.columns[c - 1].push_back(text::parse_double(f[c]));
    } catch (const Error& e) {
      fail(ErrorKind::Data, where + ": " + e.what());
    }
    ++row;
  }
  if (row == 0) fail(ErrorKind::Data, path + ": shard has no rows");
  return t;
}

void write_shard_csv(const std::string& path, HourStamp start, std::span<const std::string> ids,
                     std::span<const std::vector<double>> columns) {
  if (ids.size() != columns.size() || ids.empty()) {
    fail(ErrorKind::Usage, "shard needs one column per id");
  }
  const std::size_t n = columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) fail(ErrorKind::Usage, "shard columns differ in length");
  }
  std::string out = "timestamp";
  for (const auto& id : ids) out += "," + id;
  out += "\n";
  for (std::size_t h = 0; h < n; ++h) {
    out += format_timestamp(start + chr::hours(static_cast<long>(h)));
    for (const auto& c : columns) {
      out += ",";
      out += text::format_double(c[h]);
    }
    out += "\n";
  }
  text::write_file(path, out);
}

std::vector<std::string> list_shards(const std::string& corpus_dir) {
  const fs::path data = fs::path(corpus_dir) / "data";
  std::vector<std::string> out;
  if (!fs::is_directory(data)) return out;
  for (const auto& entry : fs::directory_iterator(data)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Corpus load_corpus(const std::string& corpus_dir) {
  const auto meta_path = (fs::path(corpus_dir) / "metadata.csv").string();
  if (!fs::exists(meta_path)) fail(ErrorKind::Usage, "corpus has no metadata.csv: " + corpus_dir);
  const auto metadata = ingest::read_metadata_csv(meta_path);

  std::map<std::string, const BuildingRecord*> by_id;
  for (const auto& r : metadata) {
    if (!by_id.emplace(r.id, &r).second) fail(ErrorKind::Data, "duplicate building id " + r.id);
  }

  // Pieces of the same building from several shards are joined in time order.
  std::map<std::string, std::vector<std::pair<HourStamp, std::vector<double>>>> pieces;
  for (const auto& path : list_shards(corpus_dir)) {
    auto shard = read_shard_csv(path);
    for (std::size_t c = 0; c < shard.ids.size(); ++c) {
      if (!by_id.count(shard.ids[c])) {
        fail(ErrorKind::Data, path + ": building '" + shard.ids[c] + "' has no metadata");
      }
      pieces[shard.ids[c]].emplace_back(shard.start, std::move(shard.columns[c]));
    }
  }

  Corpus corpus;
  for (const auto& [id, rec] : by_id) {
    auto it = pieces.find(id);
    if (it == pieces.end()) {
      corpus.without_data.push_back(id);
      continue;
    }
    auto& parts = it->second;
    std::sort(parts.begin(), parts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<double> values = std::move(parts.front().second);
    for (std::size_t p = 1; p < parts.size(); ++p) {
      const auto expected = parts.front().first + chr::hours(static_cast<long>(values.size()));
      if (parts[p].first != expected) {
        fail(ErrorKind::Data, "building '" + id + "' has non-contiguous shards");
      }
      values.insert(values.end(), parts[p].second.begin(), parts[p].second.end());
    }
    try {
      corpus.buildings.push_back({*rec, LoadSeries(parts.front().first, std::move(values))});
    } catch (const Error& e) {
      fail(ErrorKind::Data, "building '" + id + "': " + e.what());
    }
  }
  return corpus;
}

std::vector<Shard> describe_shards(const std::string& corpus_dir) {
  const auto metadata =
      ingest::read_metadata_csv((fs::path(corpus_dir) / "metadata.csv").string());
  std::map<std::string, const BuildingRecord*> by_id;
  for (const auto& r : metadata) by_id[r.id] = &r;

  std::vector<Shard> out;
  for (const auto& path : list_shards(corpus_dir)) {
    const auto table = read_shard_csv(path);
    const auto it = by_id.find(table.ids.front());
    if (it == by_id.end()) {
      fail(ErrorKind::Data, path + ": building '" + table.ids.front() + "' has no metadata");
    }
    Shard s;
    s.path = path;
    s.region_id = it->second->region_id;
    s.building_type = it->second->building_type;
    s.year_tag = static_cast<int>(chr::year_month_day{chr::floor<chr::days>(table.start)}.year());
    s.n_buildings = table.ids.size();
    s.n_hours = table.n_hours();
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_index_line(const IndexEntry& e) {
  if (e.shard_ordinal > 999999 || e.building_column > 99999 || e.window_start_hour > 99999) {
    fail(ErrorKind::Usage, "index entry exceeds the fixed field widths");
  }
  char buf[kIndexLineBytes + 1];
  std::snprintf(buf, sizeof buf, "%06u %05u %05u\n", e.shard_ordinal, e.building_column,
                e.window_start_hour);
  return std::string(buf, kIndexLineBytes);
}

IndexEntry parse_index_line(std::string_view line) {
  const auto bad = [&] { fail(ErrorKind::Integrity, "malformed index line"); };
  if (line.size() != kIndexLineBytes || line[6] != ' ' || line[12] != ' ' || line[18] != '\n') bad();
  const auto field = [&](std::size_t pos, std::size_t len) {
    std::uint32_t v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (line[i] < '0' || line[i] > '9') bad();
      v = v * 10 + static_cast<std::uint32_t>(line[i] - '0');
    }
    return v;
  };
  return {field(0, 6), field(7, 5), field(13, 5)};
}

std::vector<IndexEntry> enumerate_entries(std::span<const Shard> shards,
                                          const IndexOptions& options) {
  if (options.stride == 0) fail(ErrorKind::Usage, "index stride must be >= 1");
  std::vector<IndexEntry> entries;
  for (std::size_t s = 0; s < shards.size(); ++s) {
    const auto& shard = shards[s];
    if (std::find(options.heldout_regions.begin(), options.heldout_regions.end(),
                  shard.region_id) != options.heldout_regions.end()) {
      continue;
    }
    if (shard.n_hours <= options.holdout_hours) continue;
    const std::size_t usable = shard.n_hours - options.holdout_hours;
    const std::size_t n_windows = window_count(usable, options.stride);
    for (std::size_t b = 0; b < shard.n_buildings; ++b) {
      for (std::size_t k = 0; k < n_windows; ++k) {
        entries.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(b),
                           static_cast<std::uint32_t>(k * options.stride)});
      }
    }
  }
  return entries;
}

namespace {

std::string manifest_path_for(const std::string& index_path) { return index_path + ".manifest"; }

std::string relative_to(const fs::path& target, const fs::path& base_dir) {
  const auto rel = fs::relative(fs::absolute(target), fs::absolute(base_dir));
  return rel.empty() ? fs::absolute(target).string() : rel.generic_string();
}

}  // namespace

std::size_t build_index(std::span<const Shard> shards, const IndexOptions& options,
                        const std::string& metadata_path, const std::string& index_path) {
  auto entries = enumerate_entries(shards, options);
  Rng rng(options.seed, 0x1dc);
  rng.shuffle(entries.begin(), entries.end());

  std::string header = "STLFIDX v1 " + std::to_string(entries.size());
  if (header.size() > kIndexHeaderBytes - 1) fail(ErrorKind::Usage, "index too large");
  header.resize(kIndexHeaderBytes - 1, ' ');
  header += '\n';

  std::string body;
  body.reserve(header.size() + entries.size() * kIndexLineBytes);
  body += header;
  for (const auto& e : entries) body += format_index_line(e);
  if (const auto parent = fs::path(index_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  text::write_file(index_path, body);

  const fs::path base = fs::path(index_path).parent_path().empty()
                            ? fs::current_path()
                            : fs::path(index_path).parent_path();
  KvConfig manifest;
  manifest.set("format", "STLFIDX v1");
  manifest.set("entries", std::to_string(entries.size()));
  manifest.set("seed", std::to_string(options.seed));
  manifest.set("stride", std::to_string(options.stride));
  manifest.set("holdout_hours", std::to_string(options.holdout_hours));
  std::string regions;
  for (const auto& r : options.heldout_regions) regions += (regions.empty() ? "" : ",") + r;
  manifest.set("heldout_regions", regions);
  manifest.set("metadata", relative_to(metadata_path, base));
  manifest.set("shards", std::to_string(shards.size()));
  for (std::size_t s = 0; s < shards.size(); ++s) {
    const auto key = "shard." + std::to_string(s) + ".";
    manifest.set(key + "path", relative_to(shards[s].path, base));
    manifest.set(key + "region_id", shards[s].region_id);
    manifest.set(key + "building_type", std::string(to_string(shards[s].building_type)));
    manifest.set(key + "year_tag", std::to_string(shards[s].year_tag));
    manifest.set(key + "n_buildings", std::to_string(shards[s].n_buildings));
    manifest.set(key + "n_hours", std::to_string(shards[s].n_hours));
  }
  text::write_file(manifest_path_for(index_path),
                   "# loadbench index manifest\n" + manifest.canonical());
  return entries.size();
}

struct IndexReader::Impl {
  int fd = -1;
  std::size_t count = 0;
  std::vector<Shard> shards;
  std::map<std::string, BuildingRecord> metadata;
  mutable std::mutex cache_mutex;
  mutable std::vector<std::shared_ptr<const ShardTable>> cache;
  mutable std::atomic<std::uint64_t> bytes_read{0};
  mutable std::atomic<std::uint64_t> reads{0};

  ~Impl() {
    if (fd >= 0) ::close(fd);
  }

  std::shared_ptr<const ShardTable> shard_table(std::size_t ordinal) const {
    std::lock_guard lock(cache_mutex);
    if (!cache[ordinal]) {
      auto table = std::make_shared<ShardTable>(read_shard_csv(shards[ordinal].path));
      if (table->ids.size() != shards[ordinal].n_buildings ||
          table->n_hours() != shards[ordinal].n_hours) {
        fail(ErrorKind::Integrity,
             "shard '" + shards[ordinal].path + "' does not match its manifest entry");
      }
      cache[ordinal] = std::move(table);
    }
    return cache[ordinal];
  }
};

IndexReader::IndexReader(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
IndexReader::IndexReader(IndexReader&&) noexcept = default;
IndexReader& IndexReader::operator=(IndexReader&&) noexcept = default;
IndexReader::~IndexReader() = default;

IndexReader IndexReader::open(const std::string& index_path) {
  auto impl = std::make_unique<Impl>();
  const auto manifest_path = manifest_path_for(index_path);
  if (!fs::exists(manifest_path)) {
    fail(ErrorKind::Integrity, "index manifest missing: " + manifest_path);
  }
  const auto manifest = KvConfig::parse(text::read_file(manifest_path));
  const fs::path base = fs::path(manifest_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal().string();
  };

  impl->fd = ::open(index_path.c_str(), O_RDONLY);
  if (impl->fd < 0) fail(ErrorKind::Usage, "cannot open index '" + index_path + "'");
  char header[kIndexHeaderBytes];
  if (::pread(impl->fd, header, kIndexHeaderBytes, 0) != static_cast<ssize_t>(kIndexHeaderBytes) ||
      header[kIndexHeaderBytes - 1] != '\n' ||
      std::string_view(header, 11) != "STLFIDX v1 ") {
    fail(ErrorKind::Integrity, "index header is missing or malformed");
  }
  const auto count_text = text::trim(std::string_view(header + 11, kIndexHeaderBytes - 12));
  try {
    impl->count = static_cast<std::size_t>(text::parse_int(count_text));
  } catch (const Error&) {
    fail(ErrorKind::Integrity, "index header has a bad entry count");
  }
  struct stat st {};
  if (::fstat(impl->fd, &st) != 0 ||
      static_cast<std::size_t>(st.st_size) != kIndexHeaderBytes + impl->count * kIndexLineBytes) {
    fail(ErrorKind::Integrity, "index file size does not match its header (truncated?)");
  }

  try {
    if (static_cast<std::size_t>(manifest.get_int("entries", -1)) != impl->count) {
      fail(ErrorKind::Integrity, "manifest entry count differs from index header");
    }
    const auto n_shards = static_cast<std::size_t>(manifest.get_int("shards", 0));
    for (std::size_t s = 0; s < n_shards; ++s) {
      const auto key = "shard." + std::to_string(s) + ".";
      Shard shard;
      shard.path = resolve(manifest.require(key + "path"));
      shard.region_id = manifest.get_or(key + "region_id", "");
      shard.building_type = parse_building_type(manifest.require(key + "building_type"));
      shard.year_tag = static_cast<int>(manifest.get_int(key + "year_tag", 0));
      shard.n_buildings = static_cast<std::size_t>(manifest.get_int(key + "n_buildings", 0));
      shard.n_hours = static_cast<std::size_t>(manifest.get_int(key + "n_hours", 0));
      impl->shards.push_back(std::move(shard));
    }
    for (auto& r : ingest::read_metadata_csv(resolve(manifest.require("metadata")))) {
      auto id = r.id;
      impl->metadata.emplace(std::move(id), std::move(r));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Integrity) throw;
    fail(ErrorKind::Integrity, std::string("bad index manifest: ") + e.what());
  }
  impl->cache.resize(impl->shards.size());
  return IndexReader(std::move(impl));
}

std::size_t IndexReader::size() const { return impl_->count; }
const std::vector<Shard>& IndexReader::shards() const { return impl_->shards; }

IndexEntry IndexReader::entry(std::size_t n) const {
  if (n >= impl_->count) {
    fail(ErrorKind::Range, "index entry " + std::to_string(n) + " out of range (size " +
                               std::to_string(impl_->count) + ")");
  }
  char line[kIndexLineBytes];
  const auto offset = static_cast<off_t>(kIndexHeaderBytes + n * kIndexLineBytes);
  const auto got = ::pread(impl_->fd, line, kIndexLineBytes, offset);
  impl_->reads.fetch_add(1, std::memory_order_relaxed);
  if (got > 0) impl_->bytes_read.fetch_add(static_cast<std::uint64_t>(got), std::memory_order_relaxed);
  if (got != static_cast<ssize_t>(kIndexLineBytes)) {
    fail(ErrorKind::Integrity, "short read from index file");
  }
  return parse_index_line(std::string_view(line, kIndexLineBytes));
}

FetchedWindow IndexReader::fetch(std::size_t n) const {
  const auto e = entry(n);
  if (e.shard_ordinal >= impl_->shards.size()) {
    fail(ErrorKind::Integrity, "index references unknown shard " + std::to_string(e.shard_ordinal));
  }
  const auto& shard = impl_->shards[e.shard_ordinal];
  if (e.building_column >= shard.n_buildings ||
      e.window_start_hour + kWindowHours > shard.n_hours) {
    fail(ErrorKind::Integrity, "index entry " + std::to_string(n) + " lies outside its shard");
  }
  const auto table = impl_->shard_table(e.shard_ordinal);
  const auto& id = table->ids[e.building_column];
  const auto meta = impl_->metadata.find(id);
  if (meta == impl_->metadata.end()) {
    fail(ErrorKind::Integrity, "building '" + id + "' missing from index metadata");
  }
  const auto& column = table->columns[e.building_column];
  const auto first = column.begin() + static_cast<long>(e.window_start_hour);
  LoadSeries slice(table->start + chr::hours(static_cast<long>(e.window_start_hour)),
                   std::vector<double>(first, first + static_cast<long>(kWindowHours)));
  return {e, id, make_window(slice, meta->second, 0)};
}

std::uint64_t IndexReader::index_bytes_read() const { return impl_->bytes_read.load(); }
std::uint64_t IndexReader::index_reads() const { return impl_->reads.load(); }

}  // namespace loadbench::store
