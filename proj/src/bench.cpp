#include "loadbench/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <thread>

#include "json.hpp"

#include "loadbench/error.hpp"
#include "loadbench/ingest.hpp"
#include "loadbench/rng.hpp"
#include "loadbench/synth.hpp"
#include "loadbench/text.hpp"
#include "loadbench/tokenizer.hpp"
#include "loadbench/transform.hpp"

namespace loadbench::bench {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using metrics::BuildingScore;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::uint64_t get_seed(const KvConfig& c, const std::string& key) {
  const auto fallback = c.get_int("seed", 0);
  const auto v = c.get_int(key, fallback);
  if (v < 0) fail(ErrorKind::Usage, key + " must be >= 0");
  return static_cast<std::uint64_t>(v);
}

std::size_t get_count(const KvConfig& c, const std::string& key, std::int64_t fallback) {
  const auto v = c.get_int(key, fallback);
  if (v < 0) fail(ErrorKind::Usage, key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

std::string require_existing(const KvConfig& c, const std::string& key) {
  const auto path = c.require(key);
  if (!fs::exists(path)) fail(ErrorKind::Usage, key + " path does not exist: " + path);
  return path;
}

fs::path prepare_out_dir(const KvConfig& c) {
  const fs::path out = c.require("out");
  fs::create_directories(out);
  return out;
}

std::size_t thread_count(const KvConfig& c) {
  const auto v = c.get_int("threads", 0);
  if (v < 0) fail(ErrorKind::Usage, "threads must be >= 0");
  if (v > 0) return static_cast<std::size_t>(v);
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Ordered `key=value` manifest; carries no timestamps or absolute paths.
class Manifest {
 public:
  Manifest(const std::string& command, const KvConfig& config) {
    add("tool", "loadbench");
    add("tool_version", kToolVersion);
    add("command", command);
    add("config_hash", config_hash(config));
  }
  void add(const std::string& key, const std::string& value) {
    text_ += key + "=" + value + "\n";
  }
  void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
  void add_seed(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  /// input = scored + skipped + excluded, asserted before writing.
  void add_counts(std::size_t input, std::size_t scored, std::size_t skipped, std::size_t excluded) {
    if (scored + skipped + excluded != input) {
      fail(ErrorKind::Internal, "building counts do not add up: " + std::to_string(scored) + " + " +
                                    std::to_string(skipped) + " + " + std::to_string(excluded) +
                                    " != " + std::to_string(input));
    }
    add("buildings_input", input);
    add("buildings_scored", scored);
    add("buildings_skipped", skipped);
    add("buildings_excluded", excluded);
  }
  void write(const fs::path& dir) const { text::write_file((dir / "manifest.txt").string(), text_); }

 private:
  std::string text_;
};

json interval_json(const metrics::Interval& iv) {
  return json{{"median", iv.point}, {"lower", iv.lower}, {"upper", iv.upper}, {"n", iv.n}};
}

json report_json(const metrics::AggregateReport& report) {
  json metrics_node = json::object();
  for (const auto& [name, m] : report.metrics) {
    json strata = json::object();
    for (const auto& [s, iv] : m.by_stratum) strata[s] = interval_json(iv);
    json profile = json::array();
    for (const auto& p : m.profile) {
      profile.push_back(json{{"threshold", p.threshold},
                             {"fraction", p.fraction},
                             {"lower", p.lower},
                             {"upper", p.upper}});
    }
    metrics_node[name] =
        json{{"overall", interval_json(m.overall)}, {"by_stratum", strata}, {"profile", profile}};
  }
  return json{{"n_buildings", report.n_buildings}, {"metrics", metrics_node}};
}

std::string not_scored_csv(std::span<const BuildingOutcome> rows) {
  std::string out = "building,status,reason\n";
  for (const auto& r : rows) {
    out += r.building_id + "," + (r.status == Status::Excluded ? "excluded" : "skipped") + "," +
           r.reason + "\n";
  }
  return out;
}

struct ReportFiles {
  metrics::AggregateReport report;
  json document;
};

/// Writes buildings.csv, profiles.csv and aggregate.json; returns the JSON
/// document so callers can add sections before it is written.
ReportFiles build_reports(std::span<const BuildingScore> scores, const KvConfig& config) {
  const auto n_boot = get_count(config, "bootstrap", metrics::kDefaultBootstrap);
  const auto seed = get_seed(config, "bootstrap_seed");
  ReportFiles r;
  r.report = metrics::aggregate(scores, n_boot, seed);
  r.document = report_json(r.report);
  r.document["bootstrap"] = n_boot;
  r.document["bootstrap_seed"] = seed;
  return r;
}

void write_reports(const fs::path& out, std::span<const BuildingScore> scores, ReportFiles& r) {
  text::write_file((out / "buildings.csv").string(), format_buildings_csv(scores));
  text::write_file((out / "profiles.csv").string(), format_profiles_csv(r.report));
  text::write_file((out / "aggregate.json").string(), r.document.dump(2) + "\n");
}

EvalOptions eval_options(const KvConfig& c) {
  EvalOptions o;
  o.cap = c.get_bool("cap", true);
  o.max_hourly_kw = c.get_double("max_hourly_kw", o.max_hourly_kw);
  o.sigma_floor = c.get_double("sigma_floor", o.sigma_floor);
  if (!(o.sigma_floor > 0.0)) fail(ErrorKind::Usage, "sigma_floor must be > 0");
  o.threads = thread_count(c);
  return o;
}

std::optional<std::size_t> sample_option(const KvConfig& c) {
  if (!c.has("sample")) return std::nullopt;
  const auto n = c.get_int("sample", 0);
  if (n <= 0) fail(ErrorKind::Usage, "sample must be >= 1");
  return static_cast<std::size_t>(n);
}

std::string outcome_summary(const std::string& what, const EvalOutcome& e) {
  return what + ": " + std::to_string(e.scores.size()) + " scored, " +
         std::to_string(e.skipped()) + " skipped, " + std::to_string(e.excluded()) +
         " excluded of " + std::to_string(e.input) + " buildings";
}

EvalOutcome gather(std::size_t input, std::vector<BuildingOutcome> outcomes,
                   std::vector<BuildingOutcome> extra) {
  EvalOutcome e;
  e.input = input;
  for (auto& o : outcomes) {
    if (o.status == Status::Scored) {
      e.scores.push_back(std::move(*o.score));
    } else {
      e.not_scored.push_back(std::move(o));
    }
  }
  for (auto& o : extra) e.not_scored.push_back(std::move(o));
  std::sort(e.scores.begin(), e.scores.end(),
            [](const auto& a, const auto& b) { return a.building_id < b.building_id; });
  std::sort(e.not_scored.begin(), e.not_scored.end(),
            [](const auto& a, const auto& b) { return a.building_id < b.building_id; });
  return e;
}

std::optional<BuildingOutcome> capped_out(const store::CorpusBuilding& b, const EvalOptions& o) {
  if (!o.cap) return std::nullopt;
  ingest::IngestPolicy policy;
  policy.max_hourly_kw = o.max_hourly_kw;
  auto r = ingest::apply_consumption_cap(b.series, policy);
  if (auto* ex = std::get_if<ingest::Excluded>(&r)) {
    return BuildingOutcome{b.record.id, Status::Excluded, ex->reason, std::nullopt};
  }
  return std::nullopt;
}

BuildingOutcome scored_or_undefined(const std::string& id,
                                    const std::function<BuildingScore()>& score) {
  try {
    return {id, Status::Scored, "", score()};
  } catch (const metrics::UndefinedScore& e) {
    return {id, Status::Skipped, "zero mean load", std::nullopt};
  }
}

std::vector<BuildingOutcome> without_data(const store::Corpus& corpus, bool sampled) {
  std::vector<BuildingOutcome> out;
  if (sampled) return out;
  for (const auto& id : corpus.without_data) out.push_back({id, Status::Skipped, "no load data", {}});
  return out;
}

EvalOutcome evaluate(const store::Corpus& corpus,
                     std::span<const store::CorpusBuilding* const> buildings, bool sampled,
                     const EvalOptions& options,
                     const std::function<BuildingOutcome(const store::CorpusBuilding&)>& fn) {
  auto outcomes = parallel_map(buildings, options.threads, [&](const store::CorpusBuilding& b) {
    if (auto ex = capped_out(b, options)) return *ex;
    return fn(b);
  });
  const std::size_t input = buildings.size() + (sampled ? 0 : corpus.without_data.size());
  return gather(input, std::move(outcomes), without_data(corpus, sampled));
}

}  // namespace

std::size_t EvalOutcome::skipped() const {
  return static_cast<std::size_t>(std::count_if(
      not_scored.begin(), not_scored.end(), [](const auto& o) { return o.status == Status::Skipped; }));
}

std::size_t EvalOutcome::excluded() const {
  return static_cast<std::size_t>(std::count_if(
      not_scored.begin(), not_scored.end(), [](const auto& o) { return o.status == Status::Excluded; }));
}

std::string config_hash(const KvConfig& config) {
  std::string canonical;
  for (const auto& [k, v] : config.entries()) {
    if (k == "threads" || k == "out") continue;
    canonical += k + "=" + v + "\n";
  }
  return hex64(text::fnv1a64(canonical));
}

forecast::TrainSchedule train_schedule(const KvConfig& c) {
  forecast::TrainSchedule s;
  s.max_epochs = get_count(c, "max_epochs", 25);
  s.patience = get_count(c, "patience", static_cast<std::int64_t>(s.patience));
  s.lr_grid = c.get_double_list("lr_grid", s.lr_grid);
  s.seed = get_seed(c, "train_seed");
  s.steps_per_epoch = get_count(c, "steps_per_epoch", static_cast<std::int64_t>(s.steps_per_epoch));
  s.validate();
  return s;
}

std::unique_ptr<forecast::Forecaster> make_forecaster(const KvConfig& c) {
  const auto name = c.get_or("forecaster", "persistence_ensemble");
  const bool bias = c.get_bool("bias", true);
  if (name == "previous_day") return std::make_unique<forecast::PreviousDay>();
  if (name == "previous_week") return std::make_unique<forecast::PreviousWeek>();
  if (name == "persistence_ensemble") return std::make_unique<forecast::PersistenceEnsemble>();
  if (name == "linear") return std::make_unique<forecast::LinearDirect>(bias);
  if (name == "dlinear") {
    const auto kernel = get_count(c, "kernel_size", 25);
    if (kernel % 2 == 0 || kernel == 0 || kernel > kContextHours) {
      fail(ErrorKind::Usage, "kernel_size must be odd and <= 168");
    }
    return std::make_unique<forecast::DLinear>(train_schedule(c), kernel, bias);
  }
  fail(ErrorKind::Usage, "unknown forecaster '" + name +
                             "' (previous_day, previous_week, persistence_ensemble, linear, dlinear)");
}

std::optional<TransferSplit> transfer_split(std::size_t n_hours) {
  TransferSplit s;
  const std::size_t total_days = s.train_days + s.val_days + s.test_days;
  if (n_hours < total_days * kHorizonHours) return std::nullopt;
  const std::size_t context_days = kContextHours / kHorizonHours;
  for (std::size_t off = 0; off + kWindowHours <= s.train_days * kHorizonHours; off += kHorizonHours) {
    s.train_offsets.push_back(off);
  }
  for (std::size_t d = s.train_days; d < s.train_days + s.val_days; ++d) {
    s.val_offsets.push_back((d - context_days) * kHorizonHours);
  }
  for (std::size_t d = s.train_days + s.val_days; d < total_days; ++d) {
    s.test_offsets.push_back((d - context_days) * kHorizonHours);
  }
  return s;
}

metrics::BuildingScore score_windows(const forecast::Forecaster& forecaster,
                                     std::span<const Window> windows, const BuildingRecord& record,
                                     const metrics::ScoringContext& ctx) {
  std::vector<metrics::HourArray> actual;
  std::vector<metrics::ForecastDistribution> forecasts;
  actual.reserve(windows.size());
  forecasts.reserve(windows.size());
  for (const auto& w : windows) {
    metrics::HourArray a{};
    std::copy(w.target.values().begin(), w.target.values().end(), a.begin());
    actual.push_back(a);
    forecasts.push_back(forecaster.predict(w));
  }
  return metrics::score_building(record.id, record.dataset_name, actual, forecasts, ctx);
}

std::vector<BuildingOutcome> parallel_map(
    std::span<const store::CorpusBuilding* const> buildings, std::size_t threads,
    const std::function<BuildingOutcome(const store::CorpusBuilding&)>& fn) {
  std::vector<BuildingOutcome> results(buildings.size());
  std::vector<std::exception_ptr> errors(buildings.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < buildings.size(); i = next++) {
      try {
        results[i] = fn(*buildings[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(std::max<std::size_t>(threads, 1), buildings.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }
  // Report the first failure in input order, independent of scheduling.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<const store::CorpusBuilding*> select_buildings(const store::Corpus& corpus,
                                                           std::optional<std::size_t> per_type,
                                                           std::uint64_t seed) {
  std::vector<const store::CorpusBuilding*> all;
  for (const auto& b : corpus.buildings) all.push_back(&b);
  if (!per_type) return all;
  std::vector<const store::CorpusBuilding*> out;
  for (const auto type : {BuildingType::Residential, BuildingType::Commercial}) {
    std::vector<const store::CorpusBuilding*> pool;
    for (const auto* b : all) {
      if (b->record.building_type == type) pool.push_back(b);
    }
    Rng rng(seed, type == BuildingType::Residential ? 0x5a3 : 0x5a4);
    rng.shuffle(pool.begin(), pool.end());
    pool.resize(std::min(pool.size(), *per_type));
    out.insert(out.end(), pool.begin(), pool.end());
  }
  std::sort(out.begin(), out.end(),
            [](const auto* a, const auto* b) { return a->record.id < b->record.id; });
  return out;
}

EvalOutcome evaluate_zero_shot(const store::Corpus& corpus,
                               std::span<const store::CorpusBuilding* const> buildings,
                               const KvConfig& forecaster_config, const EvalOptions& options) {
  const auto forecaster = make_forecaster(forecaster_config);
  if (forecaster->needs_fit()) {
    fail(ErrorKind::Usage, "forecaster '" + forecaster->name() +
                               "' must be fitted; zero-shot evaluation takes persistence forecasters");
  }
  const metrics::ScoringContext ctx{nullptr, nullptr, options.sigma_floor};
  const bool sampled = forecaster_config.has("sample");
  return evaluate(corpus, buildings, sampled, options, [&](const store::CorpusBuilding& b) {
    const auto windows = sliding_windows(b.series, b.record, kHorizonHours);
    if (windows.empty()) {
      return BuildingOutcome{b.record.id, Status::Skipped, "shorter than 192 hours", std::nullopt};
    }
    return scored_or_undefined(b.record.id,
                               [&] { return score_windows(*forecaster, windows, b.record, ctx); });
  });
}

EvalOutcome evaluate_transfer(const store::Corpus& corpus,
                              std::span<const store::CorpusBuilding* const> buildings,
                              const KvConfig& forecaster_config, const EvalOptions& options) {
  make_forecaster(forecaster_config);  // validate parameters before fanning out
  const metrics::ScoringContext ctx{nullptr, nullptr, options.sigma_floor};
  const bool sampled = forecaster_config.has("sample");
  return evaluate(corpus, buildings, sampled, options, [&](const store::CorpusBuilding& b) {
    const auto split = transfer_split(b.series.size());
    if (!split) {
      return BuildingOutcome{b.record.id, Status::Skipped, "shorter than 360 days", std::nullopt};
    }
    const auto windows_at = [&](const std::vector<std::size_t>& offsets) {
      std::vector<Window> out;
      out.reserve(offsets.size());
      for (const auto off : offsets) out.push_back(make_window(b.series, b.record, off));
      return out;
    };
    const auto train = windows_at(split->train_offsets);
    const auto val = windows_at(split->val_offsets);
    const auto test = windows_at(split->test_offsets);
    auto forecaster = make_forecaster(forecaster_config);
    forecaster->fit(train, val);
    return scored_or_undefined(b.record.id,
                               [&] { return score_windows(*forecaster, test, b.record, ctx); });
  });
}

std::string format_buildings_csv(std::span<const BuildingScore> scores) {
  std::string out = "building,dataset,nrmse,nmae,nmbe,rps,n_days\n";
  for (const auto& s : scores) {
    out += s.building_id + "," + s.dataset + "," + text::format_double(s.nrmse) + "," +
           text::format_double(s.nmae) + "," + text::format_double(s.nmbe) + "," +
           (s.rps ? text::format_double(*s.rps) : std::string()) + "," + std::to_string(s.n_days) +
           "\n";
  }
  return out;
}

std::vector<BuildingScore> parse_buildings_csv(const std::string& content) {
  std::vector<std::string> lines;
  for (const auto line : text::split(content, '\n')) {
    const auto t = text::trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  if (lines.empty() || lines[0] != "building,dataset,nrmse,nmae,nmbe,rps,n_days") {
    fail(ErrorKind::Data, "expected header 'building,dataset,nrmse,nmae,nmbe,rps,n_days'");
  }
  std::vector<BuildingScore> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = text::split(lines[i], ',');
    if (f.size() != 7) fail(ErrorKind::Data, "buildings.csv line " + std::to_string(i + 1) + ": 7 fields expected");
    BuildingScore s;
    s.building_id = std::string(f[0]);
    s.dataset = std::string(f[1]);
    s.nrmse = text::parse_double(f[2]);
    s.nmae = text::parse_double(f[3]);
    s.nmbe = text::parse_double(f[4]);
    if (!text::trim(f[5]).empty()) s.rps = text::parse_double(f[5]);
    s.n_days = static_cast<std::size_t>(text::parse_int(f[6]));
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.building_id < b.building_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].building_id == out[i - 1].building_id) {
      fail(ErrorKind::Data, "duplicate building '" + out[i].building_id + "' in buildings.csv");
    }
  }
  return out;
}

std::string format_profiles_csv(const metrics::AggregateReport& report) {
  std::string out = "metric,threshold,fraction,lower,upper\n";
  for (const auto& [name, m] : report.metrics) {
    for (const auto& p : m.profile) {
      out += name + "," + text::format_double(p.threshold) + "," + text::format_double(p.fraction) +
             "," + text::format_double(p.lower) + "," + text::format_double(p.upper) + "\n";
    }
  }
  return out;
}

Comparison compare_scores(std::span<const BuildingScore> a, std::span<const BuildingScore> b) {
  std::map<std::string, const BuildingScore*> by_id;
  for (const auto& s : a) by_id[s.building_id] = &s;
  Comparison c;
  std::vector<std::pair<const BuildingScore*, const BuildingScore*>> pairs;
  for (const auto& s : b) {
    if (auto it = by_id.find(s.building_id); it != by_id.end()) pairs.emplace_back(it->second, &s);
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& x, const auto& y) { return x.first->building_id < y.first->building_id; });
  if (pairs.empty()) {
    c.warning = "runs share no buildings; comparison is empty";
    return c;
  }
  for (const auto& [sa, sb] : pairs) {
    c.building_ids.push_back(sa->building_id);
    c.datasets.push_back(sa->dataset);
  }
  using Getter = std::optional<double> (*)(const BuildingScore&);
  const std::pair<const char*, Getter> fields[] = {
      {"nrmse", [](const BuildingScore& s) -> std::optional<double> { return s.nrmse; }},
      {"nmae", [](const BuildingScore& s) -> std::optional<double> { return s.nmae; }},
      {"nmbe", [](const BuildingScore& s) -> std::optional<double> { return s.nmbe; }},
      {"rps", [](const BuildingScore& s) { return s.rps; }},
  };
  for (const auto& [name, get] : fields) {
    std::vector<double> xa, xb;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per;
    for (const auto& [sa, sb] : pairs) {
      const auto va = get(*sa), vb = get(*sb);
      if (!va || !vb) continue;
      xa.push_back(*va);
      xb.push_back(*vb);
      per[sa->dataset].first.push_back(*va);
      per[sa->dataset].second.push_back(*vb);
    }
    if (xa.empty()) continue;
    c.a[name] = xa;
    c.b[name] = xb;
    c.overall[name] = {metrics::probability_of_improvement(xb, xa), xa.size()};
    for (const auto& [stratum, v] : per) {
      c.by_stratum[name][stratum] = {metrics::probability_of_improvement(v.second, v.first),
                                     v.first.size()};
    }
  }
  return c;
}

std::string format_deltas_csv(const Comparison& c) {
  static const char* const names[] = {"nrmse", "nmae", "nmbe", "rps"};
  std::string out = "building,dataset";
  for (const char* n : names) {
    if (c.a.count(n)) out += std::string(",") + n + "_a," + n + "_b," + n + "_delta";
  }
  out += "\n";
  for (std::size_t i = 0; i < c.building_ids.size(); ++i) {
    out += c.building_ids[i] + "," + c.datasets[i];
    for (const char* n : names) {
      if (!c.a.count(n)) continue;
      // Buildings lacking an rps in either run are left blank.
      if (c.a.at(n).size() != c.building_ids.size()) {
        out += ",,,";
        continue;
      }
      const double va = c.a.at(n)[i], vb = c.b.at(n)[i];
      out += "," + text::format_double(va) + "," + text::format_double(vb) + "," +
             text::format_double(vb - va);
    }
    out += "\n";
  }
  return out;
}

namespace {

json comparison_json(const Comparison& c) {
  json overall = json::object();
  for (const auto& [name, m] : c.overall) overall[name] = json{{"p_improvement", m.p_improvement}, {"n", m.n}};
  json strata = json::object();
  for (const auto& [name, per] : c.by_stratum) {
    json node = json::object();
    for (const auto& [s, m] : per) node[s] = json{{"p_improvement", m.p_improvement}, {"n", m.n}};
    strata[name] = node;
  }
  json doc{{"n_paired", c.building_ids.size()}, {"overall", overall}, {"by_stratum", strata}};
  if (c.warning) doc["warning"] = *c.warning;
  return doc;
}

std::vector<BuildingScore> load_run(const std::string& dir, const std::string& what) {
  const auto path = fs::path(dir) / "buildings.csv";
  if (!fs::exists(path)) fail(ErrorKind::Usage, what + " run has no buildings.csv: " + dir);
  return parse_buildings_csv(text::read_file(path.string()));
}

std::string eval_command(const std::string& command, const KvConfig& config, bool transfer) {
  const auto corpus_path = require_existing(config, "corpus");
  std::optional<std::vector<BuildingScore>> baseline;
  if (transfer && config.has("baseline_run")) {
    baseline = load_run(config.require("baseline_run"), "baseline");
  }
  const auto options = eval_options(config);
  const auto forecaster = make_forecaster(config);
  const auto out = prepare_out_dir(config);

  const auto corpus = store::load_corpus(corpus_path);
  const auto sample = sample_option(config);
  const auto sample_seed = get_seed(config, "sample_seed");
  const auto chosen = select_buildings(corpus, sample, sample_seed);
  const auto outcome = transfer ? evaluate_transfer(corpus, chosen, config, options)
                                : evaluate_zero_shot(corpus, chosen, config, options);

  auto reports = build_reports(outcome.scores, config);
  reports.document["task"] = transfer ? "transfer" : "zero_shot";
  reports.document["forecaster"] = forecaster->name();
  std::string summary = outcome_summary(command + " (" + forecaster->name() + ")", outcome);
  if (baseline) {
    const auto cmp = compare_scores(*baseline, outcome.scores);
    text::write_file((out / "improvement.csv").string(), format_deltas_csv(cmp));
    reports.document["improvement_over_baseline"] = comparison_json(cmp);
    if (cmp.warning) summary += "\nwarning: " + *cmp.warning;
    if (const auto it = cmp.overall.find("nrmse"); it != cmp.overall.end()) {
      summary += "\nP(NRMSE improves over baseline) = " + text::format_double(it->second.p_improvement) + "%";
    }
  }
  write_reports(out, outcome.scores, reports);
  text::write_file((out / "not_scored.csv").string(), not_scored_csv(outcome.not_scored));

  Manifest m(command, config);
  m.add("forecaster", forecaster->name());
  m.add_seed("seed", get_seed(config, "seed"));
  m.add_seed("sample_seed", sample_seed);
  m.add_seed("bootstrap_seed", get_seed(config, "bootstrap_seed"));
  if (transfer) m.add_seed("train_seed", get_seed(config, "train_seed"));
  if (sample) m.add("sample_per_type", *sample);
  m.add_counts(outcome.input, outcome.scores.size(), outcome.skipped(), outcome.excluded());
  m.write(out);

  if (const auto it = reports.report.metrics.find("nrmse"); it != reports.report.metrics.end()) {
    summary += "\nmedian NRMSE " + text::format_double(it->second.overall.point) + "% [" +
               text::format_double(it->second.overall.lower) + ", " +
               text::format_double(it->second.overall.upper) + "]";
  }
  return summary;
}

std::vector<double> corpus_values(const store::Corpus& corpus, std::vector<BuildingType>* types) {
  std::vector<double> values;
  for (const auto& b : corpus.buildings) {
    values.insert(values.end(), b.series.values().begin(), b.series.values().end());
    if (types) types->insert(types->end(), b.series.size(), b.record.building_type);
  }
  return values;
}

}  // namespace

std::string run_synth(const KvConfig& c) {
  synth::SynthConfig s;
  s.n_residential = get_count(c, "n_residential", static_cast<std::int64_t>(s.n_residential));
  s.n_commercial = get_count(c, "n_commercial", static_cast<std::int64_t>(s.n_commercial));
  s.n_days = get_count(c, "n_days", static_cast<std::int64_t>(s.n_days));
  s.seed = get_seed(c, "seed");
  s.base_load_range = {c.get_double("base_min", s.base_load_range.first),
                       c.get_double("base_max", s.base_load_range.second)};
  s.peak_load_range = {c.get_double("peak_min", s.peak_load_range.first),
                       c.get_double("peak_max", s.peak_load_range.second)};
  s.commercial_scale = c.get_double("commercial_scale", s.commercial_scale);
  s.noise_scale = c.get_double("noise_scale", s.noise_scale);
  s.weekend_attenuation = c.get_double("weekend_attenuation", s.weekend_attenuation);
  s.n_regions = get_count(c, "n_regions", static_cast<std::int64_t>(s.n_regions));
  if (const auto start = c.get("start")) {
    s.start = std::chrono::floor<std::chrono::hours>(parse_timestamp(*start));
  }
  s.validate();
  const auto out = prepare_out_dir(c);
  synth::write_corpus(s, out.string());
  Manifest m("synth", c);
  m.add_seed("seed", s.seed);
  m.add("buildings", s.size());
  m.add("hours", s.n_days * 24);
  m.write(out);
  return "synth: wrote " + std::to_string(s.size()) + " buildings x " + std::to_string(s.n_days) +
         " days to " + out.string();
}

std::string run_ingest(const KvConfig& c) {
  const fs::path input = require_existing(c, "input");
  ingest::IngestPolicy policy;
  policy.max_missing_fraction = c.get_double("max_missing_fraction", policy.max_missing_fraction);
  policy.long_gap_threshold = get_count(c, "long_gap_threshold", static_cast<std::int64_t>(policy.long_gap_threshold));
  policy.max_hourly_kw = c.get_double("max_hourly_kw", policy.max_hourly_kw);
  if (!c.get_bool("cap", true)) policy.max_hourly_kw = std::numeric_limits<double>::infinity();
  policy.outlier_window = get_count(c, "outlier_window", static_cast<std::int64_t>(policy.outlier_window));
  policy.aggregation = ingest::parse_aggregation(c.get_or("aggregation", "mean"));
  policy.validate();
  const auto records = ingest::read_metadata_csv((input / "metadata.csv").string());
  const auto out = prepare_out_dir(c);

  struct Kept {
    BuildingRecord record;
    LoadSeries series;
  };
  std::vector<Kept> kept;
  std::string report = "building,status,reason\n";
  std::size_t excluded = 0;
  for (const auto& r : records) {
    const auto path = input / (r.id + ".csv");
    std::string reason;
    if (!fs::exists(path)) {
      reason = "no readings file";
    } else {
      const auto raw = ingest::read_building_csv(path.string());
      if (raw.empty()) {
        reason = "no readings";
      } else {
        auto cleaned = ingest::clean_building(raw, policy);
        if (auto* s = std::get_if<LoadSeries>(&cleaned)) {
          kept.push_back({r, std::move(*s)});
          report += r.id + ",kept,\n";
          continue;
        }
        reason = std::get<ingest::Excluded>(cleaned).reason;
      }
    }
    ++excluded;
    report += r.id + ",excluded," + reason + "\n";
  }

  // Buildings sharing region, type, start and length share a shard.
  std::map<std::string, std::vector<const Kept*>> shards;
  for (const auto& k : kept) {
    const auto day = std::chrono::floor<std::chrono::days>(k.series.start());
    const auto ymd = std::chrono::year_month_day{day};
    char key[128];
    std::snprintf(key, sizeof key, "%s_%s_%04d_%02u%02u%02ld_%zu", k.record.region_id.c_str(),
                  std::string(to_string(k.record.building_type)).c_str(), static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>((k.series.start() - day).count()), k.series.size());
    shards[key].push_back(&k);
  }
  fs::remove_all(out / "data");
  fs::create_directories(out / "data");
  for (const auto& [key, group] : shards) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> columns;
    for (const auto* k : group) {
      ids.push_back(k->record.id);
      columns.emplace_back(k->series.values().begin(), k->series.values().end());
    }
    store::write_shard_csv((out / "data" / (key + ".csv")).string(), group.front()->series.start(), ids,
                           columns);
  }
  std::vector<BuildingRecord> kept_records;
  for (const auto& k : kept) kept_records.push_back(k.record);
  std::sort(kept_records.begin(), kept_records.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  ingest::write_metadata_csv((out / "metadata.csv").string(), kept_records);
  text::write_file((out / "ingest_report.csv").string(), report);

  Manifest m("ingest", c);
  m.add("buildings_input", records.size());
  m.add("buildings_kept", kept.size());
  m.add("buildings_excluded", excluded);
  m.add("shards", shards.size());
  m.write(out);
  return "ingest: kept " + std::to_string(kept.size()) + ", excluded " + std::to_string(excluded) +
         " of " + std::to_string(records.size()) + " buildings";
}

std::string run_index(const KvConfig& c) {
  const auto corpus = require_existing(c, "corpus");
  store::IndexOptions o;
  o.seed = get_seed(c, "seed");
  o.stride = get_count(c, "stride", static_cast<std::int64_t>(o.stride));
  if (o.stride == 0) fail(ErrorKind::Usage, "stride must be >= 1");
  o.holdout_hours = get_count(c, "holdout_hours", static_cast<std::int64_t>(o.holdout_hours));
  o.heldout_regions = c.get_list("heldout_regions");
  const auto shards = store::describe_shards(corpus);
  const fs::path index = c.require("out");
  if (index.has_parent_path()) fs::create_directories(index.parent_path());
  const auto n = store::build_index(shards, o, (fs::path(corpus) / "metadata.csv").string(),
                                    index.string());
  return "index: " + std::to_string(n) + " windows from " + std::to_string(shards.size()) +
         " shards -> " + index.string();
}

std::string run_tokenize(const KvConfig& c) {
  const auto corpus = store::load_corpus(require_existing(c, "corpus"));
  const auto k = get_count(c, "k", 512);
  const double tau = c.get_double("tau", 0.01);
  const auto seed = get_seed(c, "seed");
  std::vector<BuildingType> types;
  const auto values = corpus_values(corpus, &types);
  if (values.empty()) fail(ErrorKind::Data, "corpus has no load values");
  const auto out = prepare_out_dir(c);
  const auto vocab = tokenizer::fit(values, k, tau, seed);
  const auto stats = tokenizer::compression_stats(values, types, vocab);
  text::write_file((out / "vocabulary.csv").string(), tokenizer::serialize(vocab));

  json doc{{"k_initial", vocab.k_initial},
           {"tau", vocab.tau},
           {"vocabulary_size", vocab.size()},
           {"tokens_used", stats.tokens_used},
           {"mae_overall", stats.mae_overall}};
  doc["mae_residential"] = stats.mae_residential ? json(*stats.mae_residential) : json(nullptr);
  doc["mae_commercial"] = stats.mae_commercial ? json(*stats.mae_commercial) : json(nullptr);
  doc["token_counts"] = stats.token_counts;
  text::write_file((out / "compression.json").string(), doc.dump(2) + "\n");

  Manifest m("tokenize", c);
  m.add_seed("seed", seed);
  m.add("samples", values.size());
  m.add("vocabulary_size", vocab.size());
  m.write(out);
  return "tokenize: " + std::to_string(vocab.size()) + " tokens (K=" + std::to_string(k) +
         ", tau=" + text::format_double(tau) + "), MAE " + text::format_double(stats.mae_overall) +
         " kWh";
}

std::string run_fit_boxcox(const KvConfig& c) {
  const auto corpus = store::load_corpus(require_existing(c, "corpus"));
  std::vector<BuildingType> types;
  const auto values = corpus_values(corpus, &types);
  if (values.empty()) fail(ErrorKind::Data, "corpus has no load values");
  const auto out = prepare_out_dir(c);
  const auto global = transform::boxcox_fit(values);
  text::write_file((out / "boxcox.txt").string(), transform::serialize(global));
  std::string summary = "fit-boxcox: lambda " + text::format_double(global.lambda) + ", shift " +
                        text::format_double(global.shift);
  Manifest m("fit-boxcox", c);
  m.add("samples", values.size());
  m.add("lambda", text::format_double(global.lambda));
  if (c.get_bool("per_type", false)) {
    for (const auto type : {BuildingType::Residential, BuildingType::Commercial}) {
      std::vector<double> subset;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (types[i] == type) subset.push_back(values[i]);
      }
      if (subset.empty()) continue;
      const auto p = transform::boxcox_fit(subset);
      const std::string name(to_string(type));
      text::write_file((out / ("boxcox_" + name + ".txt")).string(), transform::serialize(p));
      m.add("lambda_" + name, text::format_double(p.lambda));
      summary += "\n  " + name + ": lambda " + text::format_double(p.lambda);
    }
  }
  m.write(out);
  return summary;
}

std::string run_zero_shot(const KvConfig& c) { return eval_command("eval-zero-shot", c, false); }
std::string run_transfer(const KvConfig& c) { return eval_command("eval-transfer", c, true); }

std::string run_score_file(const KvConfig& c) {
  const auto predictions = require_existing(c, "predictions");
  const auto corpus = store::load_corpus(require_existing(c, "corpus"));
  std::optional<tokenizer::TokenVocabulary> vocab;
  std::optional<transform::BoxCoxParams> boxcox;
  if (c.has("vocab")) vocab = tokenizer::parse_vocabulary(text::read_file(require_existing(c, "vocab")));
  if (c.has("boxcox")) boxcox = transform::parse_boxcox(text::read_file(require_existing(c, "boxcox")));
  const auto options = eval_options(c);
  const metrics::ScoringContext ctx{vocab ? &*vocab : nullptr, boxcox ? &*boxcox : nullptr,
                                    options.sigma_floor};
  const auto out = prepare_out_dir(c);
  const auto result = forecast::score_prediction_file(predictions, corpus, ctx);

  auto reports = build_reports(result.scores, c);
  reports.document["task"] = "score_file";
  reports.document["rows_total"] = result.rows_total;
  reports.document["rows_rejected"] = result.rows_rejected;
  reports.document["days_rejected"] = result.days_rejected;
  write_reports(out, result.scores, reports);

  std::vector<BuildingOutcome> not_scored;
  for (const auto& id : result.undefined) not_scored.push_back({id, Status::Skipped, "zero mean load", {}});
  for (const auto& id : result.incomplete) {
    not_scored.push_back({id, Status::Skipped, "no complete forecast day", {}});
  }
  std::sort(not_scored.begin(), not_scored.end(),
            [](const auto& a, const auto& b) { return a.building_id < b.building_id; });
  text::write_file((out / "not_scored.csv").string(), not_scored_csv(not_scored));
  std::string rejections;
  for (const auto& r : result.rejections) rejections += r + "\n";
  text::write_file((out / "rejections.txt").string(), rejections);

  Manifest m("score-file", c);
  m.add("rows_total", result.rows_total);
  m.add("rows_rejected", result.rows_rejected);
  m.add("days_rejected", result.days_rejected);
  m.add_seed("bootstrap_seed", get_seed(c, "bootstrap_seed"));
  m.add_counts(result.scores.size() + not_scored.size(), result.scores.size(), not_scored.size(), 0);
  m.write(out);
  std::string summary = "score-file: " + std::to_string(result.scores.size()) + " buildings scored; " +
                        std::to_string(result.rows_rejected) + " of " +
                        std::to_string(result.rows_total) + " rows and " +
                        std::to_string(result.days_rejected) + " days rejected";
  for (const auto& r : result.rejections) summary += "\n  " + r;
  return summary;
}

std::string run_compare(const KvConfig& c) {
  const auto a = load_run(c.require("run_a"), "run_a");
  const auto b = load_run(c.require("run_b"), "run_b");
  const auto out = prepare_out_dir(c);
  const auto cmp = compare_scores(a, b);
  text::write_file((out / "deltas.csv").string(), format_deltas_csv(cmp));
  text::write_file((out / "comparison.json").string(), comparison_json(cmp).dump(2) + "\n");
  Manifest m("compare", c);
  m.add("buildings_a", a.size());
  m.add("buildings_b", b.size());
  m.add("buildings_paired", cmp.building_ids.size());
  m.write(out);
  std::string summary = "compare: " + std::to_string(cmp.building_ids.size()) + " paired buildings";
  for (const auto& [name, mc] : cmp.overall) {
    summary += "\n  P(" + name + " of b < a) = " + text::format_double(mc.p_improvement) + "%";
  }
  if (cmp.warning) summary += "\nwarning: " + *cmp.warning;
  return summary;
}

std::string run_report(const KvConfig& c) {
  const auto scores = load_run(c.require("run"), "input");
  const auto out = prepare_out_dir(c);
  auto reports = build_reports(scores, c);
  reports.document["task"] = "report";
  write_reports(out, scores, reports);
  Manifest m("report", c);
  m.add_seed("bootstrap_seed", get_seed(c, "bootstrap_seed"));
  m.add_counts(scores.size(), scores.size(), 0, 0);
  m.write(out);
  std::string summary = "report: " + std::to_string(scores.size()) + " buildings";
  for (const auto& [name, ms] : reports.report.metrics) {
    summary += "\n  median " + name + " " + text::format_double(ms.overall.point) + " [" +
               text::format_double(ms.overall.lower) + ", " + text::format_double(ms.overall.upper) + "]";
  }
  return summary;
}

std::vector<std::string> command_names() {
  return {"synth",          "ingest",        "index",      "tokenize", "fit-boxcox",
          "eval-zero-shot", "eval-transfer", "score-file", "compare",  "report"};
}

std::string run_command(std::string_view name, const KvConfig& config) {
  if (name == "synth") return run_synth(config);
  if (name == "ingest") return run_ingest(config);
  if (name == "index") return run_index(config);
  if (name == "tokenize") return run_tokenize(config);
  if (name == "fit-boxcox") return run_fit_boxcox(config);
  if (name == "eval-zero-shot") return run_zero_shot(config);
  if (name == "eval-transfer") return run_transfer(config);
  if (name == "score-file") return run_score_file(config);
  if (name == "compare") return run_compare(config);
  if (name == "report") return run_report(config);
  fail(ErrorKind::Usage, "unknown command '" + std::string(name) + "'");
}

}  // namespace loadbench::bench
