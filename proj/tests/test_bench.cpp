#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "loadbench/bench.hpp"
#include "loadbench/error.hpp"
#include "loadbench/synth.hpp"
#include "loadbench/text.hpp"
#include "support.hpp"

using namespace loadbench;
using namespace loadbench::bench;
using testing::hour_stamp;
using testing::record;

namespace {

store::Corpus synthetic_corpus(std::size_t n_res, std::size_t n_com, std::size_t days, double noise,
                               std::uint64_t seed = 1) {
  synth::SynthConfig cfg;
  cfg.n_residential = n_res;
  cfg.n_commercial = n_com;
  cfg.n_days = days;
  cfg.noise_scale = noise;
  cfg.seed = seed;
  store::Corpus c;
  for (std::size_t b = 0; b < cfg.size(); ++b) {
    auto [rec, series] = synth::generate_building(cfg, b);
    c.buildings.push_back({std::move(rec), std::move(series)});
  }
  std::sort(c.buildings.begin(), c.buildings.end(),
            [](const auto& a, const auto& b) { return a.record.id < b.record.id; });
  return c;
}

KvConfig config(std::initializer_list<std::pair<const char*, std::string>> kv) {
  KvConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

metrics::BuildingScore score(const std::string& id, const std::string& ds, double nrmse,
                             std::optional<double> rps = std::nullopt) {
  metrics::BuildingScore s;
  s.building_id = id;
  s.dataset = ds;
  s.nrmse = nrmse;
  s.nmae = nrmse / 2;
  s.nmbe = -nrmse / 4;
  s.rps = rps;
  s.n_days = 3;
  return s;
}

std::string slurp(const std::filesystem::path& p) { return text::read_file(p.string()); }

}  // namespace

TEST_CASE("transfer split arithmetic") {
  const auto s = transfer_split(365 * 24);
  REQUIRE(s);
  CHECK(s->train_days == 150);
  CHECK(s->val_days == 30);
  CHECK(s->test_days == 180);
  CHECK(s->train_offsets.size() == 143);
  CHECK(s->val_offsets.size() == 30);
  CHECK(s->test_offsets.size() == 180);
  CHECK(s->train_offsets.back() + kWindowHours == 150 * 24);
  // Target days of the validation and test windows.
  CHECK(s->val_offsets.front() / 24 + 7 == 150);
  CHECK(s->val_offsets.back() / 24 + 7 == 179);
  CHECK(s->test_offsets.front() / 24 + 7 == 180);
  CHECK(s->test_offsets.back() / 24 + 7 == 359);
  CHECK(transfer_split(360 * 24));
  CHECK(!transfer_split(360 * 24 - 1));
}

TEST_CASE("building sampling") {
  const auto corpus = synthetic_corpus(6, 5, 10, 0.1);
  CHECK(select_buildings(corpus, std::nullopt, 0).size() == 11);
  const auto a = select_buildings(corpus, 3, 9);
  const auto b = select_buildings(corpus, 3, 9);
  REQUIRE(a.size() == 6);
  CHECK(a == b);
  CHECK(std::is_sorted(a.begin(), a.end(), [](auto* x, auto* y) { return x->record.id < y->record.id; }));
  CHECK(std::count_if(a.begin(), a.end(), [](auto* x) { return x->record.building_type == BuildingType::Commercial; }) == 3);
  CHECK(select_buildings(corpus, 100, 9).size() == 11);
}

TEST_CASE("compare reproduces hand-enumerated P(X<Y)") {
  const std::vector<metrics::BuildingScore> a{score("b1", "p", 1), score("b2", "p", 2), score("b3", "q", 3),
                                              score("b4", "q", 4), score("only_a", "p", 9)};
  const std::vector<metrics::BuildingScore> b{score("b1", "p", 0.5), score("b2", "p", 2), score("b3", "q", 4),
                                              score("b4", "q", 3), score("only_b", "q", 1)};
  const auto c = compare_scores(a, b);
  CHECK(c.building_ids == std::vector<std::string>{"b1", "b2", "b3", "b4"});
  // b beats a on b1 and b4; b2 ties and is not an improvement.
  CHECK(c.overall.at("nrmse").p_improvement == 50.0);
  CHECK(c.overall.at("nrmse").n == 4);
  CHECK(c.by_stratum.at("nrmse").at("p").p_improvement == 50.0);
  CHECK(c.by_stratum.at("nrmse").at("q").p_improvement == 50.0);
  // nmbe = -nrmse/4, so lower nrmse means higher nmbe.
  CHECK(c.overall.at("nmbe").p_improvement == 25.0);
  CHECK(!c.overall.count("rps"));
  CHECK(!c.warning);

  const auto self = compare_scores(a, a);
  for (const auto& [name, m] : self.overall) CHECK(m.p_improvement == 0.0);

  const std::vector<metrics::BuildingScore> other{score("x", "p", 1)};
  const auto disjoint = compare_scores(a, other);
  CHECK(disjoint.warning);
  CHECK(disjoint.building_ids.empty());

  const auto deltas = format_deltas_csv(c);
  CHECK(deltas.starts_with("building,dataset,nrmse_a,nrmse_b,nrmse_delta,"));
  CHECK(deltas.find("b1,p,1,0.5,-0.5,") != std::string::npos);
}

TEST_CASE("buildings CSV round-trip") {
  const std::vector<metrics::BuildingScore> s{score("a", "x", 1.0 / 3.0, 0.125), score("b", "y", 12.5)};
  const auto text = format_buildings_csv(s);
  const auto back = parse_buildings_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].nrmse == s[0].nrmse);
  CHECK(back[0].rps == s[0].rps);
  CHECK(!back[1].rps);
  CHECK(format_buildings_csv(back) == text);
  CHECK_THROWS_AS(parse_buildings_csv("nope\n"), Error);
  CHECK_THROWS_AS(parse_buildings_csv(text + "a,x,1,1,1,,1\n"), Error);
}

TEST_CASE("config hash ignores thread count and output path") {
  auto a = config({{"corpus", "c"}, {"seed", "1"}, {"threads", "1"}, {"out", "/x"}});
  auto b = config({{"corpus", "c"}, {"seed", "1"}, {"threads", "8"}, {"out", "/y"}});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.set("seed", "2");
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("forecaster construction") {
  CHECK(make_forecaster(KvConfig{})->name() == "persistence_ensemble");
  CHECK(make_forecaster(config({{"forecaster", "dlinear"}}))->needs_fit());
  CHECK_THROWS_AS(make_forecaster(config({{"forecaster", "oracle"}})), Error);
  CHECK_THROWS_AS(make_forecaster(config({{"forecaster", "dlinear"}, {"kernel_size", "24"}})), Error);
  CHECK_THROWS_AS(train_schedule(config({{"patience", "0"}})), Error);
  CHECK(train_schedule(config({{"lr_grid", "0.1,0.01"}})).lr_grid == std::vector<double>{0.1, 0.01});
}

TEST_CASE("zero-shot previous week on a noiseless weekly corpus scores zero") {
  const auto corpus = synthetic_corpus(3, 3, 28, 0.0);
  const auto chosen = select_buildings(corpus, std::nullopt, 0);
  const auto r = evaluate_zero_shot(corpus, chosen, config({{"forecaster", "previous_week"}}), {});
  REQUIRE(r.scores.size() == 6);
  for (const auto& s : r.scores) {
    CHECK(std::abs(s.nrmse) < 1e-9);
    CHECK(s.n_days == 21);
  }
}

TEST_CASE("persistence ensemble has positive RPS on noisy data") {
  const auto corpus = synthetic_corpus(2, 2, 21, 0.1);
  const auto chosen = select_buildings(corpus, std::nullopt, 0);
  const auto r = evaluate_zero_shot(corpus, chosen, KvConfig{}, {});
  REQUIRE(r.scores.size() == 4);
  for (const auto& s : r.scores) {
    REQUIRE(s.rps);
    CHECK(*s.rps > 0.0);
  }
  CHECK_THROWS_AS(evaluate_zero_shot(corpus, chosen, config({{"forecaster", "linear"}}), {}), Error);
}

TEST_CASE("transfer learning") {
  const auto corpus = synthetic_corpus(1, 1, 365, 0.0, 4);
  const auto chosen = select_buildings(corpus, std::nullopt, 0);

  SUBCASE("linear model on noiseless data") {
    const auto r = evaluate_transfer(corpus, chosen, config({{"forecaster", "linear"}}), {});
    REQUIRE(r.scores.size() == 2);
    for (const auto& s : r.scores) {
      CHECK(s.nrmse < 1.0);
      CHECK(s.n_days == 180);
    }
  }

  SUBCASE("persistence forecasts match zero-shot scoring of the test windows") {
    const auto r = evaluate_transfer(corpus, chosen, KvConfig{}, {});
    REQUIRE(r.scores.size() == 2);
    const auto split = transfer_split(corpus.buildings[0].series.size());
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& b = corpus.buildings[i];
      std::vector<Window> test;
      for (auto off : split->test_offsets) test.push_back(make_window(b.series, b.record, off));
      const auto direct = score_windows(forecast::PersistenceEnsemble{}, test, b.record, {});
      CHECK(r.scores[i].nrmse == direct.nrmse);
      CHECK(*r.scores[i].rps == *direct.rps);
    }
  }

  SUBCASE("short buildings are skipped") {
    const auto short_corpus = synthetic_corpus(1, 1, 200, 0.1);
    const auto r = evaluate_transfer(short_corpus, select_buildings(short_corpus, std::nullopt, 0), KvConfig{}, {});
    CHECK(r.scores.empty());
    CHECK(r.skipped() == 2);
  }
}

TEST_CASE("building counts are conserved") {
  auto corpus = synthetic_corpus(2, 1, 14, 0.1);
  corpus.buildings.push_back({record("x-capped"), LoadSeries(hour_stamp(2018, 1, 1), std::vector<double>(240, 6000.0))});
  corpus.buildings.push_back({record("x-short"), LoadSeries(hour_stamp(2018, 1, 1), std::vector<double>(100, 1.0))});
  corpus.buildings.push_back({record("x-zero"), LoadSeries(hour_stamp(2018, 1, 1), std::vector<double>(240, 0.0))});
  corpus.without_data = {"y-missing"};
  const auto chosen = select_buildings(corpus, std::nullopt, 0);
  const auto r = evaluate_zero_shot(corpus, chosen, KvConfig{}, {});
  CHECK(r.input == 7);
  CHECK(r.scores.size() == 3);
  CHECK(r.excluded() == 1);
  CHECK(r.skipped() == 3);
  CHECK(r.scores.size() + r.skipped() + r.excluded() == r.input);

  EvalOptions no_cap;
  no_cap.cap = false;
  const auto uncapped = evaluate_zero_shot(corpus, chosen, KvConfig{}, no_cap);
  CHECK(uncapped.scores.size() == 4);
  CHECK(uncapped.excluded() == 0);
}

TEST_CASE("parallel map keeps input order and reports the first failure") {
  const auto corpus = synthetic_corpus(5, 5, 9, 0.1);
  const auto chosen = select_buildings(corpus, std::nullopt, 0);
  const auto fn = [](const store::CorpusBuilding& b) {
    return BuildingOutcome{b.record.id, Status::Skipped, std::to_string(b.series[7]), std::nullopt};
  };
  const auto one = parallel_map(chosen, 1, fn);
  const auto four = parallel_map(chosen, 4, fn);
  REQUIRE(one.size() == 10);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].building_id == chosen[i]->record.id);
    CHECK(four[i].building_id == one[i].building_id);
    CHECK(four[i].reason == one[i].reason);
  }
  const auto throwing = [&](const store::CorpusBuilding& b) -> BuildingOutcome {
    if (b.record.id == chosen[3]->record.id) fail(ErrorKind::Data, "third");
    if (b.record.id == chosen[7]->record.id) fail(ErrorKind::Data, "seventh");
    return fn(b);
  };
  try {
    parallel_map(chosen, 4, throwing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "third");
  }
}

TEST_CASE("subcommands end to end") {
  testing::TempDir dir("bench-e2e");
  const auto corpus = dir.str("corpus");
  run_command("synth", config({{"out", corpus}, {"n_residential", "3"}, {"n_commercial", "3"},
                               {"n_days", "365"}, {"seed", "5"}}));

  SUBCASE("thread count does not change output bytes") {
    for (const char* threads : {"1", "4"}) {
      run_command("eval-zero-shot", config({{"corpus", corpus}, {"out", dir.str(std::string("zs") + threads)},
                                            {"threads", threads}, {"bootstrap", "200"}}));
    }
    for (const char* f : {"buildings.csv", "profiles.csv", "aggregate.json", "not_scored.csv", "manifest.txt"}) {
      CHECK(slurp(dir.path() / "zs1" / f) == slurp(dir.path() / "zs4" / f));
    }
    const auto manifest = slurp(dir.path() / "zs1" / "manifest.txt");
    CHECK(manifest.find("buildings_input=6\n") != std::string::npos);
    CHECK(manifest.find("buildings_scored=6\n") != std::string::npos);
  }

  SUBCASE("transfer with a baseline run writes improvements") {
    const auto base = dir.str("base");
    run_command("eval-transfer", config({{"corpus", corpus}, {"out", base}, {"bootstrap", "100"}}));
    const auto lin = dir.str("lin");
    run_command("eval-transfer", config({{"corpus", corpus}, {"out", lin}, {"bootstrap", "100"},
                                         {"forecaster", "linear"}, {"baseline_run", base}}));
    CHECK(std::filesystem::exists(std::filesystem::path(lin) / "improvement.csv"));
    CHECK(slurp(std::filesystem::path(lin) / "aggregate.json").find("improvement_over_baseline") !=
          std::string::npos);
    try {
      run_command("eval-transfer", config({{"corpus", corpus}, {"out", dir.str("bad")},
                                           {"baseline_run", dir.str("does-not-exist")}}));
      FAIL("expected a usage error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Usage);
    }
  }

  SUBCASE("report re-aggregates a run") {
    const auto run = dir.str("run");
    run_command("eval-zero-shot", config({{"corpus", corpus}, {"out", run}, {"bootstrap", "100"}, {"sample", "2"}}));
    CHECK(parse_buildings_csv(slurp(std::filesystem::path(run) / "buildings.csv")).size() == 4);
    const auto rep = dir.str("rep");
    run_command("report", config({{"run", run}, {"out", rep}, {"bootstrap", "100"}}));
    CHECK(slurp(std::filesystem::path(rep) / "buildings.csv") == slurp(std::filesystem::path(run) / "buildings.csv"));
    run_command("compare", config({{"run_a", run}, {"run_b", run}, {"out", dir.str("cmp")}}));
    CHECK(slurp(dir.path() / "cmp" / "comparison.json").find("\"n_paired\": 4") != std::string::npos);
  }

  CHECK_THROWS_AS(run_command("nonsense", KvConfig{}), Error);
  CHECK_THROWS_AS(run_command("eval-zero-shot", config({{"out", dir.str("x")}})), Error);
}
