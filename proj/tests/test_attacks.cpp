#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "bgpoison/harness.hpp"
#include "oracles.hpp"

using namespace bgpoison;

namespace {

Asn A(std::uint32_t v) { return Asn{v}; }

const Prefix kParent = Prefix::parse("10.0.0.0/16");

ExperimentConfig small_config(std::uint64_t seed = 1) {
  return parse_config_text(R"({"topology": {"synthetic": {"tier1": 3, "tier2": 12, "stub": 60}},
                              "world": {"monitors": 20},
                              "dfoh": {"n_per_class": 40, "n_trees": 20}})",
                           seed);
}

// A forest that trusts exactly the links listed in the IRR.
Forest irr_forest() {
  Dataset d;
  d.n_features = feature::Count;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> legit(feature::Count, 0.0), forged(feature::Count, 0.0);
    legit[feature::InIrr] = 1.0;
    d.add(legit, 0);
    d.add(forged, 1);
  }
  ForestParams p;
  p.n_trees = 5;
  return Forest::train(d, p, 1);
}

struct TrainedWorld {
  ExperimentConfig cfg = small_config(7);
  std::unique_ptr<World> w = build_world(cfg);
  std::shared_ptr<const Forest> forest = train_defender(*w, cfg);
};

const TrainedWorld& trained() {
  static const TrainedWorld t;
  return t;
}

EmbeddingTable random_table(std::uint64_t seed, std::uint32_t n, int d) {
  Rng rng(seed);
  EmbeddingTable t(d, 1.0);
  for (std::uint32_t i = 1; i <= n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = uniform01(rng) * 4 - 2;
    t.add(A(i), v, uniform01(rng) * 3);
  }
  return t;
}

std::vector<RouteChange> random_changes(std::uint64_t seed, std::uint32_t n, std::size_t count, std::int64_t t0,
                                        std::int64_t span) {
  Rng rng(seed);
  std::vector<Asn> pool;
  for (std::uint32_t i = 1; i <= n; ++i) pool.push_back(A(i));
  std::vector<RouteChange> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto a = sample_without_replacement(pool, 1 + uniform_index(rng, 4), rng);
    auto b = sample_without_replacement(pool, 1 + uniform_index(rng, 4), rng);
    out.push_back({kParent, a, b, t0 + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(span)))});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.time < y.time; });
  return out;
}

PollutionPlan sample_plan(std::size_t n) {
  const auto emb = random_table(5, 40, 3);
  const std::vector<AsPath> legit{{A(1), A(2), A(3)}, {A(4), A(3)}};
  const double theta = 1.6;
  return plan_threshold_pollution(emb, theta, A(3), kParent, legit, n, 0.4);
}

}  // namespace

// ---------------------------------------------------------------------------
// DFOH poisoning planner
// ---------------------------------------------------------------------------

TEST(DfohPlanner, PlansRespectBudgetAndNeverAnnounceTheHijackLink) {
  const auto& t = trained();
  const auto attackers = pick_attackers(*t.w, {}, 4, 3, "test", AttackerPool::Transit);
  ASSERT_FALSE(attackers.empty());
  for (const auto h : attackers) {
    DfohPlanner planner(*t.forest, t.w->kb, *t.w->ctx);
    for (const auto v : pick_victims(*t.w, h, VictimSelection{false, 6}, 3)) {
      AttackSpec spec{h, v, t.w->prefix_of.at(h), 3};
      const auto plan = planner.plan(spec);
      EXPECT_LE(plan.poison_links.size(), 3u);
      std::set<Asn> seen;
      double prev = plan.suspicion_before;
      for (const auto& l : plan.poison_links) {
        EXPECT_EQ(l.from, h);
        EXPECT_NE(l.forged_origin, v);
        EXPECT_NE(l.forged_origin, h);
        EXPECT_TRUE(seen.insert(l.forged_origin).second);
        EXPECT_FALSE(t.w->kb.find(AsLink::between(h, l.forged_origin)));
        EXPECT_LT(l.predicted_suspicion, prev);
        prev = l.predicted_suspicion;
      }
      EXPECT_DOUBLE_EQ(plan.predicted_suspicion, prev);
      EXPECT_EQ(plan.predicted_evasion, plan.predicted_suspicion <= 0.5);
      EXPECT_EQ(plan.status == PlanStatus::NoPlan, plan.poison_links.empty() && plan.suspicion_before > 0.5);
    }
  }
}

TEST(DfohPlanner, CandidatesAreLinksTheSurrogateLeavesUnflagged) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 4, "test", AttackerPool::Transit).front();
  DfohPlanner planner(*t.forest, t.w->kb, *t.w->ctx);
  const auto& cands = planner.candidates(h);
  EXPECT_TRUE(std::is_sorted(cands.begin(), cands.end()));
  const auto base = t.w->corpus.paths_from(h);
  for (const auto b : t.w->kb.nodes()) {
    if (b == h || t.w->kb.find(AsLink::between(h, b))) {
      EXPECT_FALSE(std::binary_search(cands.begin(), cands.end(), b));
      continue;
    }
    const auto v = classify_or_max(*t.forest, t.w->kb, *t.w->ctx, h, b, forged_paths(base, b), 0.5);
    EXPECT_EQ(std::binary_search(cands.begin(), cands.end(), b), !v.flagged) << to_string(b);
  }
}

TEST(DfohPlanner, ZeroLinkPlanWhenTheHijackAlreadyEvades) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 5, "test", AttackerPool::Transit).front();
  const auto v = pick_victims(*t.w, h, VictimSelection{false, 1}, 5).front();
  const DfohContext ctx(t.w->graph, t.w->metadata, t.w->corpus, {AsLink::between(h, v)});
  const Forest forest = irr_forest();
  const auto plan = plan_dfoh_poisoning(forest, t.w->kb, ctx, AttackSpec{h, v, t.w->prefix_of.at(h), 5});
  EXPECT_TRUE(plan.poison_links.empty());
  EXPECT_TRUE(plan.predicted_evasion);
  EXPECT_EQ(plan.status, PlanStatus::Ok);
  EXPECT_LE(plan.suspicion_before, 0.5);
}

TEST(DfohPlanner, ZeroBudgetOrNoCandidatesMeansNoPlan) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 5, "test", AttackerPool::Transit).front();
  const auto v = pick_victims(*t.w, h, VictimSelection{false, 1}, 5).front();
  // empty IRR: the IRR forest flags every new link, so nothing is usable
  const DfohContext ctx(t.w->graph, t.w->metadata, t.w->corpus);
  const Forest forest = irr_forest();
  DfohPlanner planner(forest, t.w->kb, ctx);
  EXPECT_TRUE(planner.candidates(h).empty());
  for (const int budget : {0, 5}) {
    const auto plan = planner.plan(AttackSpec{h, v, t.w->prefix_of.at(h), budget});
    EXPECT_EQ(plan.status, PlanStatus::NoPlan);
    EXPECT_FALSE(plan.predicted_evasion);
    EXPECT_TRUE(plan.poison_links.empty());
  }
}

TEST(DfohPlanner, RejectsBadSpecs) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 5, "test", AttackerPool::Transit).front();
  DfohPlanner planner(*t.forest, t.w->kb, *t.w->ctx);
  EXPECT_THROW(planner.plan(AttackSpec{h, h, kParent, 5}), InvalidScenarioError);
  EXPECT_THROW(planner.plan(AttackSpec{h, A(999999), kParent, -1}), ConfigError);
  AttackSpec short_wait{h, A(999999), kParent, 5, true, 1};
  EXPECT_THROW(planner.plan(short_wait), ConfigError);
  PlannerConfig bad;
  bad.lookahead = 0;
  EXPECT_THROW(DfohPlanner(*t.forest, t.w->kb, *t.w->ctx, bad), ConfigError);
}

TEST(DfohPlanner, IsDeterministic) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 6, "test", AttackerPool::Transit).front();
  for (const auto v : pick_victims(*t.w, h, VictimSelection{false, 5}, 6)) {
    const AttackSpec spec{h, v, t.w->prefix_of.at(h), 5};
    const auto a = plan_dfoh_poisoning(*t.forest, t.w->kb, *t.w->ctx, spec);
    const auto b = plan_dfoh_poisoning(*t.forest, t.w->kb, *t.w->ctx, spec);
    ASSERT_EQ(a.poison_links.size(), b.poison_links.size());
    for (std::size_t i = 0; i < a.poison_links.size(); ++i) {
      EXPECT_EQ(a.poison_links[i].forged_origin, b.poison_links[i].forged_origin);
    }
    EXPECT_EQ(a.predicted_suspicion, b.predicted_suspicion);
  }
}

// ---------------------------------------------------------------------------
// DFOH attack execution
// ---------------------------------------------------------------------------

TEST(DfohExecutor, EmptyPlanLeavesTheDefenderUntouched) {
  const auto& t = trained();
  const auto h = pick_attackers(*t.w, {}, 1, 8, "test", AttackerPool::Transit).front();
  const auto v = pick_victims(*t.w, h, VictimSelection{false, 1}, 8).front();
  const DfohPipeline defender(t.w->kb, t.forest, *t.w->ctx);
  const AttackSpec spec{h, v, t.w->prefix_of.at(h), 5};
  const auto res = execute_dfoh_attack(t.w->sim(), defender, PoisonPlan{}, spec, t.w->prefix_of.at(v));
  EXPECT_EQ(res.links_used, 0);
  EXPECT_TRUE(res.traces.empty());
  EXPECT_EQ(res.mispredicted, 0);
  EXPECT_DOUBLE_EQ(res.suspicion_after, res.suspicion_before);
  EXPECT_EQ(res.evaded, res.suspicion_after <= 0.5);
  EXPECT_EQ(defender.kb().size(), t.w->kb.size());
}

TEST(DfohExecutor, TracesFollowThePlanOnFreshSubPrefixes) {
  const auto& t = trained();
  const auto attackers = pick_attackers(*t.w, {}, 3, 9, "test", AttackerPool::Transit);
  const DfohPipeline defender(t.w->kb, t.forest, *t.w->ctx);
  int executed = 0;
  for (const auto h : attackers) {
    DfohPlanner planner(*t.forest, t.w->kb, *t.w->ctx);
    for (const auto v : pick_victims(*t.w, h, VictimSelection{false, 4}, 9)) {
      const AttackSpec spec{h, v, t.w->prefix_of.at(h), 5};
      const auto plan = planner.plan(spec);
      if (plan.poison_links.empty()) continue;
      ++executed;
      const auto res = execute_dfoh_attack(t.w->sim(), defender, plan, spec, t.w->prefix_of.at(v));
      ASSERT_EQ(res.traces.size(), plan.poison_links.size());
      EXPECT_EQ(res.links_used, static_cast<int>(plan.poison_links.size()));
      std::set<Prefix> prefixes;
      int rejected = 0;
      for (std::size_t i = 0; i < res.traces.size(); ++i) {
        EXPECT_EQ(res.traces[i].forged_origin, plan.poison_links[i].forged_origin);
        EXPECT_TRUE(spec.parent_prefix.contains(res.traces[i].sub_prefix));
        EXPECT_NE(res.traces[i].sub_prefix, spec.parent_prefix);
        EXPECT_TRUE(prefixes.insert(res.traces[i].sub_prefix).second);
        rejected += res.traces[i].accepted ? 0 : 1;
      }
      EXPECT_EQ(res.mispredicted, rejected);
      EXPECT_GE(res.attacker_share, 0.0);
      EXPECT_LE(res.attacker_share, 1.0);
    }
  }
  EXPECT_GT(executed, 0);
}

TEST(HijackLinkPaths, KeepsOnlyPathsEndingInTheForgedLink) {
  const std::vector<AsPath> paths{{A(1), A(2), A(3)}, {A(4), A(3)}, {A(3)}, {A(5), A(2), A(3), A(6)}};
  const auto out = hijack_link_paths(paths, A(2), A(3));
  EXPECT_EQ(out, (std::vector<AsPath>{{A(1), A(2), A(3)}}));
}

// ---------------------------------------------------------------------------
// BEAM threshold estimation
// ---------------------------------------------------------------------------

TEST(BeamEstimate, MatchesTheDefendersOwnThreshold) {
  const auto emb = random_table(1, 30, 3);
  const ThresholdConfig cfg{1000, 3.0, false};
  const auto events = random_changes(2, 30, 200, 0, 1000);
  const double est = estimate_beam_threshold(events, emb, cfg, 1000);

  ThresholdState state(cfg);
  for (const auto& e : events) detect_change(emb, state, e);
  update_threshold(state, 1000);
  ASSERT_TRUE(state.theta);
  EXPECT_EQ(est, *state.theta);

  // first window: nothing is flagged, so every score counts
  std::vector<double> scores;
  for (const auto& e : events) scores.push_back(path_difference(emb, e));
  const auto [m, s] = oracle::mean_std(scores);
  EXPECT_NEAR(est, m + 3 * s, 1e-12);
}

TEST(BeamEstimate, FailsWithoutACompleteWindow) {
  const auto emb = random_table(1, 30, 3);
  const ThresholdConfig cfg{1000, 3.0, false};
  EXPECT_THROW(estimate_beam_threshold({}, emb, cfg, 1000), EstimationError);
  EXPECT_THROW(estimate_beam_threshold(random_changes(2, 30, 10, 0, 500), emb, cfg, 900), EstimationError);
}

// ---------------------------------------------------------------------------
// Threshold pollution planning
// ---------------------------------------------------------------------------

TEST(PollutionPlanner, EveryAnnouncementScoresInsideTheBand) {
  const auto emb = random_table(5, 40, 3);
  const std::vector<AsPath> legit{{A(1), A(2), A(3)}, {A(4), A(3)}};
  for (const double theta : {1.0, 1.6, 2.5}) {
    for (const double eps : {0.05, 0.2, 0.5}) {
      std::set<Prefix> used{kParent};
      PollutionPlan plan;
      try {
        plan = plan_threshold_pollution(emb, theta, A(3), kParent, legit, 50, eps, used);
      } catch (const InfeasiblePollutionError&) {
        continue;
      }
      std::set<Asn> origins;
      std::set<Prefix> prefixes;
      double prev = theta;
      for (const auto& a : plan.announcements) {
        EXPECT_GT(a.expected_score, theta * (1 - eps));
        EXPECT_LT(a.expected_score, theta);
        EXPECT_DOUBLE_EQ(a.expected_score, path_difference(emb, a.old_path, a.new_path));
        EXPECT_LE(a.expected_score, prev);
        prev = a.expected_score;
        EXPECT_EQ(a.new_path.back(), a.forged_origin);
        EXPECT_EQ(AsPath(a.new_path.begin(), a.new_path.end() - 1), a.old_path);
        EXPECT_EQ(std::count(a.old_path.begin(), a.old_path.end(), a.forged_origin), 0);
        EXPECT_TRUE(origins.insert(a.forged_origin).second);
        EXPECT_TRUE(kParent.contains(a.prefix));
        EXPECT_FALSE(used.count(a.prefix));
        EXPECT_TRUE(prefixes.insert(a.prefix).second);
      }
      EXPECT_EQ(plan.n_distinct, plan.announcements.size());
      EXPECT_EQ(plan.partial, plan.n_distinct < 50);
    }
  }
}

TEST(PollutionPlanner, MatchesAnExhaustiveScan) {
  const auto emb = random_table(8, 60, 4);
  const std::vector<AsPath> legit{{A(10), A(20), A(30)}, {A(40), A(30)}, {A(30)}};
  for (const double theta : {1.2, 1.8, 2.4}) {
    const double eps = 0.3;
    std::map<Asn, double> best;
    for (const auto& p : legit) {
      for (std::uint32_t b = 1; b <= 60; ++b) {
        if (std::count(p.begin(), p.end(), A(b))) continue;
        AsPath q = p;
        q.push_back(A(b));
        const double s = path_difference(emb, p, q);
        if (s > theta * (1 - eps) && s < theta) best[A(b)] = std::max(best[A(b)], s);
      }
    }
    std::vector<double> expect;
    for (const auto& [_, s] : best) expect.push_back(s);
    std::sort(expect.rbegin(), expect.rend());
    const std::size_t n = 5;
    if (expect.size() > n) expect.resize(n);
    PollutionPlan plan;
    try {
      plan = plan_threshold_pollution(emb, theta, A(30), kParent, legit, n, eps);
    } catch (const InfeasiblePollutionError&) {
      EXPECT_TRUE(best.empty());
      continue;
    }
    std::vector<double> got;
    for (const auto& a : plan.announcements) {
      got.push_back(a.expected_score);
      EXPECT_DOUBLE_EQ(a.expected_score, best.at(a.forged_origin));
    }
    EXPECT_EQ(got, expect) << "theta " << theta;
  }
}

TEST(PollutionPlanner, FindsPlantedOrigins) {
  // three planted ASes sit just below theta; everything else is far away
  EmbeddingTable emb(1, 0.0);
  emb.add(A(1), {0.0}, 0);
  emb.add(A(2), {0.0}, 0);
  for (std::uint32_t i = 3; i <= 20; ++i) {
    const bool planted = i == 5 || i == 9 || i == 14;
    emb.add(A(i), {planted ? 1.9 + 0.01 * i : 100.0}, 0);
  }
  // path [1, 2] -> [1, 2, b]: DTW = |x_b| / 3
  const double theta = 1.0;
  const auto plan = plan_threshold_pollution(emb, theta, A(2), kParent, {{A(1), A(2)}}, 10, 0.5);
  std::set<Asn> origins;
  for (const auto& a : plan.announcements) origins.insert(a.forged_origin);
  EXPECT_EQ(origins, (std::set<Asn>{A(5), A(9), A(14)}));
  EXPECT_TRUE(plan.partial);
  EXPECT_EQ(plan.announcements.front().forged_origin, A(14));
}

TEST(PollutionPlanner, EdgeCases) {
  const auto emb = random_table(5, 40, 3);
  const std::vector<AsPath> legit{{A(1), A(2), A(3)}};
  const auto zero = plan_threshold_pollution(emb, 1.5, A(3), kParent, legit, 0);
  EXPECT_TRUE(zero.announcements.empty());
  EXPECT_FALSE(zero.partial);
  EXPECT_THROW(plan_threshold_pollution(emb, 1e-9, A(3), kParent, legit, 3), InfeasiblePollutionError);
  EXPECT_THROW(plan_threshold_pollution(emb, 0.0, A(3), kParent, legit, 3), InfeasiblePollutionError);
  EXPECT_THROW(plan_threshold_pollution(emb, 1.5, A(3), kParent, {}, 3), InfeasiblePollutionError);
  EXPECT_THROW(plan_threshold_pollution(emb, 1.5, A(3), kParent, legit, 3, 1.0), ConfigError);
  EXPECT_THROW(plan_threshold_pollution(emb, 1.5, A(9), kParent, legit, 3), InvalidChangeError);
}

// ---------------------------------------------------------------------------
// Oscillation amplification
// ---------------------------------------------------------------------------

TEST(Oscillation, CalibrationReproducesTheTargetMoments) {
  const OscillationModel m;
  const auto [mean, sd] = OscillationModel::discretized_moments(m.mu(), m.sigma());
  EXPECT_NEAR(mean, 6.43, 1e-6);
  EXPECT_NEAR(sd, 17.79, 1e-6);
  const OscillationModel n(3.0, 2.0);
  const auto [mean2, sd2] = OscillationModel::discretized_moments(n.mu(), n.sigma());
  EXPECT_NEAR(mean2, 3.0, 1e-6);
  EXPECT_NEAR(sd2, 2.0, 1e-6);
}

TEST(Oscillation, StratifiedSamplesHaveTheTargetMean) {
  const OscillationModel m;
  const auto xs = m.sample_stratified(200000, 11);
  double sum = 0;
  for (const auto x : xs) {
    EXPECT_GE(x, 1);
    sum += static_cast<double>(x);
  }
  EXPECT_NEAR(sum / static_cast<double>(xs.size()), 6.43, 0.2);
}

TEST(Oscillation, RejectsImpossibleMoments) {
  EXPECT_THROW(OscillationModel(0.5, 1.0), ConfigError);
  EXPECT_THROW(OscillationModel(1.0, 1.0), ConfigError);
  EXPECT_THROW(OscillationModel(2.0, -1.0), ConfigError);
  EXPECT_NO_THROW(OscillationModel(1.0, 0.0));
}

TEST(Amplify, DegenerateModelReplicatesExactly) {
  const auto plan = sample_plan(4);
  ASSERT_FALSE(plan.announcements.empty());
  const OscillationModel m(3.0, 0.0);
  const auto out = amplify(plan, m, 1, 1000, 500);
  EXPECT_EQ(out.size(), 3 * plan.announcements.size());
  std::map<Prefix, int> copies;
  for (const auto& e : out) {
    ++copies[e.prefix];
    EXPECT_GE(e.time, 1000);
    EXPECT_LT(e.time, 1500);
  }
  for (const auto& a : plan.announcements) EXPECT_EQ(copies[a.prefix], 3);
  EXPECT_TRUE(std::is_sorted(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.time < y.time; }));
  EXPECT_THROW(amplify(plan, m, 1, 0, 0), std::invalid_argument);
}

TEST(Amplify, DeterministicAndNested) {
  const auto full = sample_plan(6);
  ASSERT_GE(full.announcements.size(), 3u);
  const OscillationModel m;
  EXPECT_EQ(amplify(full, m, 42, 0, 3600), amplify(full, m, 42, 0, 3600));
  for (std::size_t n = 1; n <= full.announcements.size(); ++n) {
    auto part = full;
    part.announcements.erase(part.announcements.begin() + static_cast<std::ptrdiff_t>(n), part.announcements.end());
    const auto small = amplify(part, m, 42, 0, 3600);
    std::set<Prefix> kept;
    for (const auto& a : part.announcements) kept.insert(a.prefix);
    std::vector<RouteChange> filtered;
    for (const auto& e : amplify(full, m, 42, 0, 3600)) {
      if (kept.count(e.prefix)) filtered.push_back(e);
    }
    EXPECT_EQ(small, filtered) << n;
  }
}

// ---------------------------------------------------------------------------
// Pollution evaluation
// ---------------------------------------------------------------------------

TEST(PollutionEvaluation, CountsCandidatesAtOrBelowEachThreshold) {
  const auto emb = random_table(3, 30, 3);
  const ThresholdConfig cfg{1000, 3.0, false};
  const auto warm = random_changes(4, 30, 100, 0, 1000);
  const auto base = random_changes(5, 30, 100, 1000, 1000);
  const auto hijacks = random_changes(6, 30, 80, 2000, 1);
  const auto empty = evaluate_pollution(emb, cfg, warm, base, {}, hijacks, 2000);
  EXPECT_EQ(empty.theta_before, empty.theta_after);
  EXPECT_EQ(empty.undetected_before, empty.undetected_after);

  const auto theta = estimate_beam_threshold([&] {
    auto all = warm;
    all.insert(all.end(), base.begin(), base.end());
    return all;
  }(), emb, cfg, 2000);
  const auto plan = plan_threshold_pollution(emb, theta, A(3), kParent, {{A(1), A(2), A(3)}}, 10, 0.5);
  const auto pollution = amplify(plan, OscillationModel(3.0, 0.0), 1, 1000, 1000);
  const auto r = evaluate_pollution(emb, cfg, warm, base, pollution, hijacks, 2000);
  EXPECT_EQ(r.theta_before, theta);
  for (const auto& [th, share] : {std::pair{r.theta_before, r.undetected_before}, {r.theta_after, r.undetected_after}}) {
    int below = 0;
    for (const auto& h : hijacks) below += path_difference(emb, h) <= th ? 1 : 0;
    EXPECT_DOUBLE_EQ(share, below / 80.0);
  }
}
