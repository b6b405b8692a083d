#pragma once

// Load tokenizer: 1-D KMeans over sampled loads followed by an anchored merge
// of centroids closer than tau, with encode/decode and per-token bin widths.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadbench/core.hpp"

namespace loadbench::tokenizer {

struct TokenVocabulary {
  std::vector<double> centroids;  // merged tokens, strictly increasing (kWh)
  std::vector<double> bin_width;  // max - min load assigned to each token (kWh)
  std::vector<double> original_centroids;  // sorted KMeans centroids
  std::vector<std::size_t> original_to_token;
  std::size_t k_initial = 0;
  double tau = 0.01;
  std::uint64_t seed = 0;

  std::size_t size() const { return centroids.size(); }
  void validate() const;
};

struct MergeResult {
  std::vector<double> merged;
  std::vector<std::size_t> original_to_token;
};

/// Walks the sorted centroids; a run grows while the next centroid is less
/// than tau above the run's FIRST centroid, and each run collapses to its mean.
MergeResult merge_centroids(std::span<const double> sorted_centroids, double tau);

inline constexpr std::size_t kMaxSubsample = 1'000'000;
inline constexpr std::size_t kMaxLloydIterations = 100;

/// kmeans++ seeding and Lloyd iterations on a seeded subsample of at most
/// kMaxSubsample values. Returns sorted, distinct centroids.
std::vector<double> kmeans_1d(std::span<const double> samples, std::size_t k, std::uint64_t seed);

TokenVocabulary fit(std::span<const double> samples, std::size_t k, double tau, std::uint64_t seed);

/// Nearest original centroid (ties to the lower index), mapped to its token.
std::size_t encode(double x, const TokenVocabulary& vocab);
double decode(std::size_t token, const TokenVocabulary& vocab);

struct CompressionStats {
  double mae_overall = 0.0;
  std::optional<double> mae_residential;
  std::optional<double> mae_commercial;
  std::vector<std::size_t> token_counts;  // utilisation histogram
  std::size_t tokens_used = 0;
};

CompressionStats compression_stats(std::span<const double> samples,
                                   std::span<const BuildingType> types,
                                   const TokenVocabulary& vocab);

/// CSV `token,centroid_kwh,bin_width_kwh` preceded by a `#` metadata line and
/// followed by a `# originals` block (`original,centroid_kwh,token`) so the
/// encode mapping survives a round trip.
std::string serialize(const TokenVocabulary& vocab);
TokenVocabulary parse_vocabulary(const std::string& text);

}  // namespace loadbench::tokenizer
