#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bgpoison/harness.hpp"

using namespace bgpoison;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSmall = R"({
  "topology": {"synthetic": {"tier1": 3, "tier2": 12, "stub": 60}},
  "world": {"monitors": 20},
  "dfoh": {"n_per_class": 40, "n_trees": 20},
  "beam": {"dim": 4, "epochs": 5, "changes_per_window": 60, "hijack_candidates": 40},
  "dfoh_attack": {"n_attackers": 3, "attacker_pool": "transit", "victims": {"sample": 5}, "budget": 3},
  "beam_attack": {"n_attackers": 3, "n_distinct": [1, 4], "epsilon": 0.5},
  "monitor_sweep": {"grid": [1, 10, 100], "trials": 10}
})";

ExperimentConfig small(std::uint64_t seed = 3) { return parse_config_text(kSmall, seed); }

// Fresh scratch directory, removed with the fixture.
class ScratchDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("bgpoison_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path dir(const std::string& name) const { return root_ / name; }

  fs::path root_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

std::size_t data_lines(const fs::path& p) {
  return detail::read_csv_rows(p).size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(Config, RequiresASeed) {
  EXPECT_THROW(parse_config_text("{}"), ConfigError);
  EXPECT_EQ(parse_config_text("{}", 9).seed, 9u);
  EXPECT_EQ(parse_config_text(R"({"seed": 4})").seed, 4u);
  EXPECT_EQ(parse_config_text(R"({"seed": 4})", 9).seed, 9u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "sed": 2})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "world": {"monitor": 5}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "dfoh_attack": {"victims": {"n": 5}}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "dfoh_attack": {"attacker_pool": "stub"}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "dfoh_attack": {"budget": -1}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "world": {"monitors": "many"}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "world": {"rov_fraction": 1.5}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "beam_attack": {"epsilon": 0}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "monitor_sweep": {"strategies": ["greedy"]}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "monitor_sweep": {"grid": [0, 5]}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "beam_attack": {"n_distinct": {"from": 5, "to": 2}}})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"seed": 1, "dfoh_attack": {"attackers": [0]}})"), ConfigError);
  EXPECT_THROW(parse_config_text("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ReadsEverySection) {
  const auto c = small();
  EXPECT_EQ(c.topology.synthetic.stub, 60u);
  EXPECT_EQ(c.world.monitors, 20u);
  EXPECT_EQ(c.dfoh.forest.n_trees, 20);
  EXPECT_EQ(c.beam.embedding.dim, 4);
  EXPECT_EQ(c.dfoh_attack.pool, AttackerPool::Transit);
  EXPECT_EQ(c.dfoh_attack.victims.sample, 5u);
  EXPECT_EQ(c.beam_attack.n_distinct, (std::vector<std::size_t>{1, 4}));
  EXPECT_EQ(parse_config_text("{}", 1).dfoh_attack.pool, AttackerPool::Any);
  const auto r = parse_config_text(R"({"seed": 1, "beam_attack": {"n_distinct": {"from": 2, "to": 5}}})");
  EXPECT_EQ(r.beam_attack.n_distinct, (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_TRUE(parse_config_text(R"({"seed": 1, "dfoh_attack": {"victims": "all"}})").dfoh_attack.victims.all);
}

TEST(Config, GridIsCanonicalized) {
  const auto a = parse_config_text(R"({"seed": 1, "monitor_sweep": {"grid": [100, 1, 10, 10]}})");
  EXPECT_EQ(a.monitor_sweep.grid, (std::vector<std::size_t>{1, 10, 100}));
  const auto b = parse_config_text(R"({"seed": 1, "monitor_sweep": {"grid": [1, 10, 100]}})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  const auto s1 = parse_config_text(R"({"seed": 1, "monitor_sweep": {"strategies": ["best_case", "random"]}})");
  const auto s2 = parse_config_text(R"({"seed": 1, "monitor_sweep": {"strategies": ["random", "best_case", "random"]}})");
  EXPECT_EQ(config_hash(s1), config_hash(s2));
}

TEST(Config, HashTracksSemanticFieldsOnly) {
  const auto base = parse_config_text(R"({"seed": 1})");
  EXPECT_EQ(config_hash(base), config_hash(parse_config_text(R"({"seed": 1, "out": "elsewhere"})")));
  EXPECT_EQ(config_hash(base), config_hash(parse_config_text(R"({"seed": 1, "dfoh_attack": {"budget": 5}})")));
  for (const char* changed : {R"({"seed": 2})", R"({"seed": 1, "dfoh_attack": {"budget": 4}})",
                              R"({"seed": 1, "dfoh_attack": {"attacker_pool": "transit"}})",
                              R"({"seed": 1, "beam": {"k": 2.5}})", R"({"seed": 1, "world": {"monitors": 61}})",
                              R"({"seed": 1, "monitor_sweep": {"grid": [1, 10]}})",
                              R"({"seed": 1, "dfoh": {"ablate": ["topological"]}})"}) {
    EXPECT_NE(config_hash(base), config_hash(parse_config_text(changed))) << changed;
  }
  EXPECT_EQ(config_hash(base).size(), 16u);
}

TEST(Config, CanonicalJsonRoundTrips) {
  const auto c = small();
  auto j = canonical_json(c);
  const auto again = parse_config(j);
  EXPECT_EQ(canonical_json(again), j);
  EXPECT_EQ(config_hash(again), config_hash(c));
}

// ---------------------------------------------------------------------------
// Runs and manifests
// ---------------------------------------------------------------------------

using Runs = ScratchDir;

TEST_F(Runs, ManifestRecordsTheRun) {
  const auto cfg = small();
  const auto b = run_gen_topology(cfg, dir("topo"));
  const auto m = manifest(dir("topo"));
  EXPECT_EQ(m["status"], "complete");
  EXPECT_EQ(m["command"], "gen-topology");
  EXPECT_EQ(m["seed"], cfg.seed);
  EXPECT_EQ(m["config_hash"], config_hash(cfg));
  EXPECT_GE(m["wall_seconds"].get<double>(), 0.0);
  EXPECT_EQ(m["files"].size(), b.files.size());
  for (const auto& f : b.files) EXPECT_TRUE(fs::exists(dir("topo") / f)) << f;
  // the generated topology reloads as the same world
  auto cfg2 = cfg;
  cfg2.topology.relationships_file = (dir("topo") / "relationships.txt").string();
  cfg2.topology.metadata_file = (dir("topo") / "metadata.json").string();
  const auto w1 = build_world(cfg);
  const auto w2 = build_world(cfg2);
  EXPECT_EQ(serialize_relationships(w1->graph), serialize_relationships(w2->graph));
  EXPECT_EQ(w1->monitors, w2->monitors);
}

TEST_F(Runs, ZeroAttackersGiveEmptyResultsAndAValidManifest) {
  auto cfg = small();
  cfg.dfoh_attack.n_attackers = 0;
  cfg.beam_attack.n_attackers = 0;
  run_dfoh_campaign(cfg, dir("d"));
  run_beam_campaign(cfg, dir("b"));
  EXPECT_EQ(manifest(dir("d"))["status"], "complete");
  EXPECT_EQ(manifest(dir("b"))["status"], "complete");
  EXPECT_EQ(data_lines(dir("d") / "dfoh_results.csv"), 0u);
  EXPECT_EQ(data_lines(dir("d") / "dfoh_poison_links.csv"), 0u);
  EXPECT_EQ(data_lines(dir("b") / "beam_results.csv"), 0u);
  EXPECT_EQ(slurp(dir("d") / "dfoh_results.csv"),
            "attacker,victim,evaded,links_used,suspicion_before,suspicion_after\n");
}

TEST_F(Runs, DfohCampaignIsDeterministicAcrossJobCounts) {
  const auto cfg = small();
  DfohCampaign c;
  const auto a = run_dfoh_campaign(cfg, dir("j1"), 1, &c);
  run_dfoh_campaign(cfg, dir("j4"), 4);
  for (const auto& f : a.files) EXPECT_EQ(slurp(dir("j1") / f), slurp(dir("j4") / f)) << f;
  EXPECT_EQ(c.attackers.size(), 3u);
  EXPECT_EQ(data_lines(dir("j1") / "dfoh_results.csv"), c.pairs.size());
  EXPECT_EQ(c.pairs.size(), 15u);
  EXPECT_TRUE(std::is_sorted(c.pairs.begin(), c.pairs.end(), [](const auto& x, const auto& y) {
    return std::pair{x.attacker, x.victim} < std::pair{y.attacker, y.victim};
  }));
  std::size_t traces = 0;
  for (const auto& p : c.pairs) {
    EXPECT_TRUE(p.error.empty()) << p.error;
    EXPECT_LE(p.result.links_used, cfg.dfoh_attack.budget);
    traces += p.result.traces.size();
  }
  EXPECT_EQ(data_lines(dir("j1") / "dfoh_poison_links.csv"), traces);
}

TEST_F(Runs, BeamCampaignIsDeterministicAcrossJobCounts) {
  const auto cfg = small();
  BeamCampaign c;
  const auto a = run_beam_campaign(cfg, dir("j1"), 1, &c);
  run_beam_campaign(cfg, dir("j4"), 4);
  for (const auto& f : a.files) EXPECT_EQ(slurp(dir("j1") / f), slurp(dir("j4") / f)) << f;
  EXPECT_EQ(c.rows.size(), 3u * 2u);
  for (const auto& r : c.rows) {
    EXPECT_LE(r.planned, r.n_distinct);
    EXPECT_TRUE(r.status == "ok" || r.status == "partial" || r.status == "infeasible" || r.status == "none_in_band");
    if (r.planned == 0) EXPECT_EQ(r.result.theta_after, r.result.theta_before);
  }
}

TEST_F(Runs, MonitorSweepNeedsPoisonTraces) {
  auto cfg = small();
  EXPECT_THROW(run_monitor_sweep(cfg, dir("none")), DependencyError);
  EXPECT_FALSE(fs::exists(dir("none") / "manifest.json"));
  cfg.monitor_sweep.traces = (dir("missing") / "links.csv").string();
  EXPECT_THROW(run_monitor_sweep(cfg, dir("none")), DependencyError);
}

TEST_F(Runs, MonitorSweepRowsAndDeterminism) {
  const auto cfg = small();
  fs::create_directories(dir("s1"));
  detail::write_text(dir("s1") / "dfoh_poison_links.csv",
                     "attacker,victim,index,from,forged_origin,sub_prefix,accepted,suspicion\n"
                     "1,2,0,16,40,10.0.0.0/24,1,0.1\n"
                     "1,3,0,17,41,10.0.1.0/24,1,0.2\n"
                     "4,5,0,20,55,10.0.2.0/24,0,0.9\n");
  fs::create_directories(dir("s4"));
  fs::copy_file(dir("s1") / "dfoh_poison_links.csv", dir("s4") / "dfoh_poison_links.csv");
  std::vector<MonitorRow> rows;
  run_monitor_sweep(cfg, dir("s1"), 1, &rows);
  run_monitor_sweep(cfg, dir("s4"), 4);
  EXPECT_EQ(slurp(dir("s1") / "monitors.csv"), slurp(dir("s4") / "monitors.csv"));
  ASSERT_EQ(rows.size(), 3u * 10u * 2u);
  EXPECT_EQ(data_lines(dir("s1") / "monitors.csv"), 60u);
  // random sets are nested in m within a trial; best-case is trial-independent
  std::map<std::pair<std::size_t, std::size_t>, double> random;
  std::map<std::size_t, double> best;
  for (const auto& r : rows) {
    EXPECT_GE(r.rate, 0.0);
    EXPECT_LE(r.rate, 1.0);
    if (r.strategy == MonitorStrategy::Random) {
      random[{r.trial, r.m}] = r.rate;
    } else {
      const auto [it, fresh] = best.emplace(r.m, r.rate);
      if (!fresh) EXPECT_EQ(it->second, r.rate);
    }
  }
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_LE(random.at({t, 1}), random.at({t, 10}));
    EXPECT_LE(random.at({t, 10}), random.at({t, 100}));
    EXPECT_LE(random.at({t, 100}), best.at(100) + 1e-12);
  }
}

TEST_F(Runs, ReportSummarisesWhatExists) {
  EXPECT_THROW(build_report(dir("empty")), DependencyError);
  const auto cfg = small();
  DfohCampaign c;
  run_dfoh_campaign(cfg, dir("r"), 1, &c);
  const auto rep = build_report(dir("r"));
  ASSERT_TRUE(rep.contains("dfoh"));
  EXPECT_FALSE(rep.contains("beam"));
  EXPECT_EQ(rep["dfoh"]["pairs"], c.pairs.size());
  std::size_t evaded = 0;
  for (const auto& p : c.pairs) evaded += p.result.evaded ? 1 : 0;
  EXPECT_DOUBLE_EQ(rep["dfoh"]["evasion_rate"].get<double>(),
                   static_cast<double>(evaded) / static_cast<double>(c.pairs.size()));
}

TEST_F(Runs, TrainingStagesWriteReloadableArtifacts) {
  const auto cfg = small();
  run_train_dfoh(cfg, dir("t"));
  run_train_beam(cfg, dir("t"));
  const auto w = build_world(cfg);
  const auto forest = train_defender(*w, cfg);
  EXPECT_EQ(slurp(dir("t") / "dfoh_forest.json"), forest->serialize());
  std::ifstream emb_in(dir("t") / "beam_embedding.txt");
  const auto emb = EmbeddingTable::read(emb_in);
  EXPECT_EQ(emb.serialize(), train_defender_embedding(*w, cfg).serialize());
  EXPECT_EQ(manifest(dir("t"))["command"], "train-beam");
}
