#include "loadbench/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loadbench/error.hpp"
#include "loadbench/kvconfig.hpp"
#include "loadbench/rng.hpp"
#include "loadbench/text.hpp"

namespace loadbench::tokenizer {

void TokenVocabulary::validate() const {
  if (centroids.empty()) fail(ErrorKind::Data, "vocabulary is empty");
  if (bin_width.size() != centroids.size()) fail(ErrorKind::Data, "bin widths do not match tokens");
  if (original_to_token.size() != original_centroids.size()) {
    fail(ErrorKind::Data, "original centroid mapping is incomplete");
  }
  for (std::size_t i = 1; i < centroids.size(); ++i) {
    if (!(centroids[i] > centroids[i - 1])) fail(ErrorKind::Data, "token centroids not increasing");
  }
  for (std::size_t i = 0; i < original_to_token.size(); ++i) {
    if (original_to_token[i] >= centroids.size() ||
        (i > 0 && original_to_token[i] < original_to_token[i - 1])) {
      fail(ErrorKind::Data, "original-to-token mapping is not monotone");
    }
  }
  for (double w : bin_width) {
    if (!(w >= 0.0)) fail(ErrorKind::Data, "negative bin width");
  }
}

MergeResult merge_centroids(std::span<const double> sorted, double tau) {
  if (sorted.empty()) fail(ErrorKind::Usage, "no centroids to merge");
  if (!(tau >= 0.0)) fail(ErrorKind::Usage, "tau must be >= 0");
  MergeResult out;
  out.original_to_token.resize(sorted.size());
  double anchor = sorted[0];
  double run_sum = sorted[0];
  std::size_t run_len = 1;
  out.original_to_token[0] = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - anchor < tau) {
      run_sum += sorted[i];
      ++run_len;
    } else {
      out.merged.push_back(run_sum / static_cast<double>(run_len));
      anchor = sorted[i];
      run_sum = sorted[i];
      run_len = 1;
    }
    out.original_to_token[i] = out.merged.size();
  }
  out.merged.push_back(run_sum / static_cast<double>(run_len));
  return out;
}

namespace {

// Sum tree over point weights for D^2 sampling; parents are recomputed from
// children so there is no drift from repeated delta updates.
class SumTree {
 public:
  explicit SumTree(std::size_t n) : size_(1) {
    while (size_ < n) size_ <<= 1;
    tree_.assign(2 * size_, 0.0);
  }
  void set(std::size_t i, double v) {
    std::size_t p = i + size_;
    tree_[p] = v;
    for (p >>= 1; p >= 1; p >>= 1) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }
  double total() const { return tree_[1]; }
  /// Leaf whose cumulative range contains r, r in [0, total).
  std::size_t find(double r) const {
    std::size_t p = 1;
    while (p < size_) {
      if (r < tree_[2 * p] || tree_[2 * p + 1] <= 0.0) {
        p = 2 * p;
      } else {
        r -= tree_[2 * p];
        p = 2 * p + 1;
      }
    }
    return p - size_;
  }

 private:
  std::size_t size_;
  std::vector<double> tree_;
};

std::vector<double> seed_plus_plus(const std::vector<double>& xs, std::size_t k, Rng& rng) {
  const std::size_t n = xs.size();
  std::vector<double> centers{xs[rng.below(n)]};
  std::vector<double> d2(n);
  SumTree tree(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = (xs[i] - centers[0]) * (xs[i] - centers[0]);
    tree.set(i, d2[i]);
  }
  std::vector<double> sorted_centers = centers;
  while (centers.size() < k) {
    const double total = tree.total();
    if (!(total > 0.0)) break;
    const std::size_t pick = tree.find(rng.uniform() * total);
    const double c = xs[pick];
    // Points whose nearest center may change lie between the midpoints to
    // the neighbouring centers.
    const auto pos = std::lower_bound(sorted_centers.begin(), sorted_centers.end(), c);
    const double left = pos == sorted_centers.begin() ? -INFINITY : 0.5 * (*(pos - 1) + c);
    const double right = pos == sorted_centers.end() ? INFINITY : 0.5 * (*pos + c);
    sorted_centers.insert(pos, c);
    centers.push_back(c);
    auto lo = std::lower_bound(xs.begin(), xs.end(), left);
    auto hi = std::upper_bound(xs.begin(), xs.end(), right);
    for (auto it = lo; it != hi; ++it) {
      const auto i = static_cast<std::size_t>(it - xs.begin());
      const double d = (xs[i] - c) * (xs[i] - c);
      if (d < d2[i]) {
        d2[i] = d;
        tree.set(i, d);
      }
    }
  }
  return sorted_centers;
}

}  // namespace

std::vector<double> kmeans_1d(std::span<const double> samples, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::Usage, "k must be >= 2");
  if (samples.empty()) fail(ErrorKind::Data, "no samples to cluster");
  Rng rng(seed, 0x70c);

  std::vector<double> xs;
  if (samples.size() > kMaxSubsample) {
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < kMaxSubsample; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    xs.reserve(kMaxSubsample);
    for (std::size_t i = 0; i < kMaxSubsample; ++i) xs.push_back(samples[idx[i]]);
  } else {
    xs.assign(samples.begin(), samples.end());
  }
  for (double v : xs) {
    if (!std::isfinite(v)) fail(ErrorKind::Data, "non-finite sample");
  }
  std::sort(xs.begin(), xs.end());
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < xs.size(); ++i) distinct += xs[i] != xs[i - 1] ? 1 : 0;
  if (distinct < k) {
    fail(ErrorKind::Data, "k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                              " distinct sample values");
  }

  std::vector<long double> prefix(xs.size() + 1, 0.0L);
  for (std::size_t i = 0; i < xs.size(); ++i) prefix[i + 1] = prefix[i] + xs[i];

  auto centers = seed_plus_plus(xs, k, rng);
  for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
    std::vector<double> next(centers.size());
    std::size_t begin = 0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
      std::size_t end = xs.size();
      if (j + 1 < centers.size()) {
        const double mid = 0.5 * (centers[j] + centers[j + 1]);
        end = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), mid) - xs.begin());
      }
      next[j] = end > begin
                    ? static_cast<double>((prefix[end] - prefix[begin]) / static_cast<long double>(end - begin))
                    : centers[j];
      begin = std::max(begin, end);
    }
    std::sort(next.begin(), next.end());
    if (next == centers) break;
    centers = std::move(next);
  }
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  return centers;
}

TokenVocabulary fit(std::span<const double> samples, std::size_t k, double tau, std::uint64_t seed) {
  if (!(tau >= 0.0)) fail(ErrorKind::Usage, "tau must be >= 0");
  TokenVocabulary v;
  v.k_initial = k;
  v.tau = tau;
  v.seed = seed;
  v.original_centroids = kmeans_1d(samples, k, seed);
  auto merged = merge_centroids(v.original_centroids, tau);
  v.centroids = std::move(merged.merged);
  v.original_to_token = std::move(merged.original_to_token);

  // Pre-merge bins are unioned: min of mins, max of maxes.
  std::vector<double> lo(v.size(), INFINITY), hi(v.size(), -INFINITY);
  for (double x : samples) {
    const auto t = encode(x, v);
    lo[t] = std::min(lo[t], x);
    hi[t] = std::max(hi[t], x);
  }
  v.bin_width.resize(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) v.bin_width[t] = hi[t] >= lo[t] ? hi[t] - lo[t] : 0.0;
  return v;
}

std::size_t encode(double x, const TokenVocabulary& vocab) {
  const auto& c = vocab.original_centroids;
  const auto pos = std::lower_bound(c.begin(), c.end(), x);
  std::size_t nearest;
  if (pos == c.begin()) {
    nearest = 0;
  } else if (pos == c.end()) {
    nearest = c.size() - 1;
  } else {
    const auto i = static_cast<std::size_t>(pos - c.begin());
    nearest = (x - c[i - 1] <= c[i] - x) ? i - 1 : i;
  }
  return vocab.original_to_token[nearest];
}

double decode(std::size_t token, const TokenVocabulary& vocab) {
  if (token >= vocab.size()) {
    fail(ErrorKind::Range, "token " + std::to_string(token) + " outside vocabulary of size " +
                               std::to_string(vocab.size()));
  }
  return vocab.centroids[token];
}

CompressionStats compression_stats(std::span<const double> samples,
                                   std::span<const BuildingType> types,
                                   const TokenVocabulary& vocab) {
  if (samples.empty()) fail(ErrorKind::Data, "compression stats need samples");
  if (!types.empty() && types.size() != samples.size()) {
    fail(ErrorKind::Usage, "building types must be empty or match samples");
  }
  CompressionStats s;
  s.token_counts.assign(vocab.size(), 0);
  double err[2] = {0.0, 0.0};
  std::size_t cnt[2] = {0, 0};
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto t = encode(samples[i], vocab);
    ++s.token_counts[t];
    const double e = std::abs(samples[i] - vocab.centroids[t]);
    total += e;
    if (!types.empty()) {
      const int k = types[i] == BuildingType::Commercial ? 1 : 0;
      err[k] += e;
      ++cnt[k];
    }
  }
  s.mae_overall = total / static_cast<double>(samples.size());
  if (cnt[0]) s.mae_residential = err[0] / static_cast<double>(cnt[0]);
  if (cnt[1]) s.mae_commercial = err[1] / static_cast<double>(cnt[1]);
  s.tokens_used = static_cast<std::size_t>(
      std::count_if(s.token_counts.begin(), s.token_counts.end(), [](auto c) { return c > 0; }));
  return s;
}

std::string serialize(const TokenVocabulary& v) {
  std::string out = "# loadbench-vocabulary v1 k_initial=" + std::to_string(v.k_initial) +
                    " tau=" + text::format_double(v.tau) + " seed=" + std::to_string(v.seed) +
                    " size=" + std::to_string(v.size()) +
                    " originals=" + std::to_string(v.original_centroids.size()) + "\n";
  out += "token,centroid_kwh,bin_width_kwh\n";
  for (std::size_t t = 0; t < v.size(); ++t) {
    out += std::to_string(t) + "," + text::format_double(v.centroids[t]) + "," +
           text::format_double(v.bin_width[t]) + "\n";
  }
  out += "# originals\noriginal,centroid_kwh,token\n";
  for (std::size_t i = 0; i < v.original_centroids.size(); ++i) {
    out += std::to_string(i) + "," + text::format_double(v.original_centroids[i]) + "," +
           std::to_string(v.original_to_token[i]) + "\n";
  }
  return out;
}

TokenVocabulary parse_vocabulary(const std::string& content) {
  const auto lines = text::split(content, '\n');
  const auto bad = [](const std::string& why) { fail(ErrorKind::Data, "vocabulary file: " + why); };
  if (lines.size() < 2 || !lines[0].starts_with("# loadbench-vocabulary v1")) bad("missing header line");

  TokenVocabulary v;
  for (auto field : text::split(lines[0].substr(2), ' ')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "k_initial") v.k_initial = static_cast<std::size_t>(text::parse_int(value));
    if (key == "tau") v.tau = text::parse_double(value);
    if (key == "seed") v.seed = static_cast<std::uint64_t>(text::parse_int(value));
  }
  if (text::trim(lines[1]) != "token,centroid_kwh,bin_width_kwh") bad("missing token table header");

  std::size_t i = 2;
  for (; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    if (line.starts_with("#")) break;
    const auto f = text::split(line, ',');
    if (f.size() != 3 || static_cast<std::size_t>(text::parse_int(f[0])) != v.centroids.size()) {
      bad("bad token row " + std::to_string(i + 1));
    }
    v.centroids.push_back(text::parse_double(f[1]));
    v.bin_width.push_back(text::parse_double(f[2]));
  }
  i += 2;  // "# originals" and its column header
  for (; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 3) bad("bad original-centroid row " + std::to_string(i + 1));
    v.original_centroids.push_back(text::parse_double(f[1]));
    v.original_to_token.push_back(static_cast<std::size_t>(text::parse_int(f[2])));
  }
  if (v.original_centroids.empty()) {
    // A bare token table: every token is its own original centroid.
    v.original_centroids = v.centroids;
    v.original_to_token.resize(v.size());
    std::iota(v.original_to_token.begin(), v.original_to_token.end(), 0);
  }
  v.validate();
  return v;
}

}  // namespace loadbench::tokenizer
