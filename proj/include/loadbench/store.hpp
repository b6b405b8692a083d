#pragma once

// Sharded on-disk corpus and the fixed-width shuffled index that gives O(1)
// access to any 192-hour training window.
//
// Corpus directory layout:
//   metadata.csv        id,dataset,building_type,latitude,longitude,region_id
//   data/*.csv          shards: `timestamp,<id>,<id>,...`, one row per hour
//
// Index file: a 32-byte header `STLFIDX v1 <count>` (space padded, newline
// terminated) followed by 19-byte lines `SSSSSS BBBBB HHHHH\n` holding the
// shard ordinal, building column and window start hour. The sidecar
// `<index>.manifest` is key-value text mapping ordinals to shard files.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loadbench/core.hpp"

namespace loadbench::store {

inline constexpr std::size_t kIndexHeaderBytes = 32;
inline constexpr std::size_t kIndexLineBytes = 19;

struct ShardTable {
  std::string path;
  HourStamp start;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> columns;  // columns[b][hour]

  std::size_t n_hours() const { return columns.empty() ? 0 : columns.front().size(); }
};

ShardTable read_shard_csv(const std::string& path);
void write_shard_csv(const std::string& path, HourStamp start, std::span<const std::string> ids,
                     std::span<const std::vector<double>> columns);

struct CorpusBuilding {
  BuildingRecord record;
  LoadSeries series;
};

struct Corpus {
  std::vector<CorpusBuilding> buildings;  // sorted by id
  std::vector<std::string> without_data;  // metadata rows with no series
  std::size_t metadata_count() const { return buildings.size() + without_data.size(); }
};

/// Shard file paths under `<dir>/data`, sorted by name.
std::vector<std::string> list_shards(const std::string& corpus_dir);
Corpus load_corpus(const std::string& corpus_dir);

struct Shard {
  std::string path;
  std::string region_id;
  BuildingType building_type = BuildingType::Residential;
  int year_tag = 0;
  std::size_t n_buildings = 0;
  std::size_t n_hours = 0;
};

/// Reads every shard of a corpus; region and type come from the metadata of
/// the shard's first building, the year tag from its first timestamp.
std::vector<Shard> describe_shards(const std::string& corpus_dir);

struct IndexEntry {
  std::uint32_t shard_ordinal = 0;
  std::uint32_t building_column = 0;
  std::uint32_t window_start_hour = 0;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
  friend auto operator<=>(const IndexEntry&, const IndexEntry&) = default;
};

std::string format_index_line(const IndexEntry& e);
IndexEntry parse_index_line(std::string_view line);

struct IndexOptions {
  std::uint64_t seed = 0;
  std::size_t stride = 24;
  /// Trailing hours of every shard kept out of training windows (validation).
  std::size_t holdout_hours = 336;
  /// Regions reserved for testing; their shards contribute no entries.
  std::vector<std::string> heldout_regions;
};

/// All (shard, building, start) triples in enumeration order, before shuffling.
std::vector<IndexEntry> enumerate_entries(std::span<const Shard> shards,
                                          const IndexOptions& options);

/// Writes `index_path` and `index_path + ".manifest"`; returns the entry count.
std::size_t build_index(std::span<const Shard> shards, const IndexOptions& options,
                        const std::string& metadata_path, const std::string& index_path);

struct FetchedWindow {
  IndexEntry entry;
  std::string building_id;
  Window window;
};

/// Read-only view over a built index. fetch() is safe to call concurrently.
class IndexReader {
 public:
  static IndexReader open(const std::string& index_path);
  IndexReader(IndexReader&&) noexcept;
  IndexReader& operator=(IndexReader&&) noexcept;
  ~IndexReader();

  std::size_t size() const;
  const std::vector<Shard>& shards() const;

  /// Reads exactly one index line at header + n * 19.
  IndexEntry entry(std::size_t n) const;
  FetchedWindow fetch(std::size_t n) const;

  /// Bytes and read calls issued against the index file after open().
  std::uint64_t index_bytes_read() const;
  std::uint64_t index_reads() const;

 private:
  struct Impl;
  explicit IndexReader(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace loadbench::store
