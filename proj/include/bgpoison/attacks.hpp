#pragma once

// Adversary models: knowledge-base poisoning against the DFOH-like detector
// and threshold pollution against the BEAM-like one.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bgpoison/beam.hpp"
#include "bgpoison/dfoh.hpp"
#include "bgpoison/routing.hpp"

namespace bgpoison {

// ---------------------------------------------------------------------------
// DFOH knowledge-base poisoning
// ---------------------------------------------------------------------------

struct AttackSpec {
  Asn attacker;  ///< H
  Asn victim;    ///< V
  Prefix parent_prefix;
  int budget = 5;
  bool allow_transit_augmentation = false;
  int wait_days = 30;
};

struct PlannerConfig {
  int lookahead = 8;
  double weight_country = 3.0;
  double weight_ixp = 2.0;
  double weight_degree = 1.0;
  double threshold = 0.5;
};

struct PoisonLink {
  Asn from;           ///< announcing AS (the attacker)
  Asn forged_origin;  ///< B
  double predicted_suspicion = 0;  ///< of (H, V) once this link is in the KB
};

enum class PlanStatus { Ok, NoPlan };

struct PoisonPlan {
  std::vector<PoisonLink> poison_links;
  /// Transit provider bought before poison link `augment_at` is announced.
  std::optional<Asn> new_provider;
  std::size_t augment_at = 0;
  bool predicted_evasion = false;
  double suspicion_before = 1.0;
  double predicted_suspicion = 1.0;
  PlanStatus status = PlanStatus::Ok;
};

/// Ranking score of a poison candidate B for victim V.
inline double candidate_score(const KnowledgeBase& kb, const DfohContext& ctx, const PlannerConfig& cfg, Asn b,
                              Asn victim) {
  double s = cfg.weight_degree * std::log1p(static_cast<double>(kb.degree(b)));
  const auto* mb = ctx.meta(b);
  const auto* mv = ctx.meta(victim);
  if (mb && mv) {
    if (mb->has_country() && mb->country == mv->country) s += cfg.weight_country;
    s += cfg.weight_ixp * static_cast<double>(detail::count_shared(mb->ixps, mv->ixps));
  }
  return s;
}

/// White-box planner working on a surrogate of the defender (same forest,
/// knowledge base and public data). Unflagged poison candidates are cached
/// per attacker, so one planner serves many victims.
class DfohPlanner {
 public:
  DfohPlanner(const Forest& surrogate, const KnowledgeBase& kb, const DfohContext& ctx, PlannerConfig cfg = {})
      : forest_(&surrogate), kb_(&kb), ctx_(&ctx), cfg_(cfg) {
    if (cfg_.lookahead < 1) throw ConfigError("lookahead must be positive");
  }

  /// ASes B whose link (H, B) the surrogate leaves unflagged: the false
  /// negatives the attack feeds on. Sorted by ASN.
  const std::vector<Asn>& candidates(Asn attacker) {
    const auto it = cache_.find(attacker);
    if (it != cache_.end()) return it->second;
    std::vector<Asn> out;
    const auto base = ctx_->corpus().paths_from(attacker);
    for (const auto b : kb_->nodes()) {
      if (b == attacker || kb_->find(AsLink::between(attacker, b))) continue;
      if (!verdict(*kb_, attacker, b, forged_paths(base, b)).flagged) out.push_back(b);
    }
    return cache_.emplace(attacker, std::move(out)).first->second;
  }

  /// Paths the defender is expected to see for the hijack when no explicit
  /// set is given: the attacker's observed paths with the victim appended.
  std::vector<AsPath> default_hijack_paths(Asn attacker, Asn victim) const {
    return forged_paths(ctx_->corpus().paths_from(attacker), victim);
  }

  PoisonPlan plan(const AttackSpec& spec, std::vector<AsPath> hijack_paths = {}) {
    if (spec.attacker == spec.victim) throw InvalidScenarioError("attacker and victim are the same AS");
    if (spec.budget < 0) throw ConfigError("budget must be non-negative");
    if (spec.allow_transit_augmentation && spec.wait_days < kb_->quarantine_days()) {
      throw ConfigError("wait_days must cover the " + std::to_string(kb_->quarantine_days()) + "-day quarantine");
    }
    const Asn h = spec.attacker;
    const Asn v = spec.victim;
    if (hijack_paths.empty()) hijack_paths = default_hijack_paths(h, v);
    KnowledgeBase work = *kb_;
    auto hijack_suspicion = [&](const KnowledgeBase& k) {
      if (k.contains(AsLink::between(h, v))) return 0.0;
      return verdict(k, h, v, hijack_paths).suspicion;
    };

    PoisonPlan plan;
    double current = hijack_suspicion(work);
    plan.suspicion_before = current;
    plan.predicted_suspicion = current;
    if (current <= cfg_.threshold) {
      plan.predicted_evasion = true;
      return plan;
    }
    if (spec.budget == 0) {
      plan.status = PlanStatus::NoPlan;
      return plan;
    }

    const auto base_paths = ctx_->corpus().paths_from(h);
    auto ranked = candidates(h);
    std::erase(ranked, v);
    rank(work, ranked, v);
    std::set<Asn> skipped;
    bool augmented = false;

    while (static_cast<int>(plan.poison_links.size()) < spec.budget && current > cfg_.threshold) {
      // lookahead window of candidates that the current KB still accepts
      std::vector<Asn> window;
      for (const auto b : ranked) {
        if (static_cast<int>(window.size()) >= cfg_.lookahead) break;
        if (skipped.count(b)) continue;
        if (work.find(AsLink::between(h, b)) || verdict(work, h, b, forged_paths(base_paths, b)).flagged) {
          skipped.insert(b);
          continue;
        }
        window.push_back(b);
      }
      std::optional<Asn> best;
      double best_s = current;
      for (const auto b : window) {
        work.record(h, b, work.day());
        const double s = hijack_suspicion(work);
        work.erase(AsLink::between(h, b));
        if (s < best_s) {
          best_s = s;
          best = b;
        }
      }
      if (!best) {
        if (!spec.allow_transit_augmentation || augmented) break;
        augmented = true;
        const auto t = pick_provider(work, h, v, hijack_suspicion);
        if (!t) break;
        plan.new_provider = *t;
        plan.augment_at = plan.poison_links.size();
        work.record(*t, h, work.day());
        current = hijack_suspicion(work);
        continue;
      }
      work.record(h, *best, work.day());
      skipped.insert(*best);
      current = best_s;
      plan.poison_links.push_back({h, *best, best_s});
    }
    plan.predicted_suspicion = current;
    plan.predicted_evasion = current <= cfg_.threshold;
    if (plan.poison_links.empty() && !plan.new_provider) plan.status = PlanStatus::NoPlan;
    return plan;
  }

  const PlannerConfig& config() const noexcept { return cfg_; }

 private:
  Verdict verdict(const KnowledgeBase& kb, Asn u, Asn v, const std::vector<AsPath>& paths) const {
    return classify_or_max(*forest_, kb, *ctx_, u, v, paths, cfg_.threshold);
  }

  void rank(const KnowledgeBase& kb, std::vector<Asn>& ranked, Asn victim) const {
    std::vector<std::pair<double, Asn>> scored;
    for (const auto b : ranked) scored.push_back({-candidate_score(kb, *ctx_, cfg_, b, victim), b});
    std::sort(scored.begin(), scored.end());
    ranked.clear();
    for (const auto& [_, b] : scored) ranked.push_back(b);
  }

  /// Transit AS (one with customers) not yet adjacent to H whose provider
  /// link lowers the hijack suspicion most among the top-ranked few.
  template <class Suspicion>
  std::optional<Asn> pick_provider(KnowledgeBase& work, Asn h, Asn v, Suspicion&& hijack_suspicion) const {
    const auto& rel = ctx_->relationships();
    std::vector<Asn> pool;
    for (const auto t : work.nodes()) {
      if (t == h || t == v || work.find(AsLink::between(h, t)) || rel.adjacent(h, t)) continue;
      if (!rel.contains(t) || rel.customers(t).empty()) continue;
      // no provider loops: H must not already be above T
      if (rel.contains(h) && customer_cone(rel, h).count(t)) continue;
      pool.push_back(t);
    }
    rank(work, pool, v);
    std::optional<Asn> best;
    double best_s = 2.0;
    for (std::size_t i = 0; i < pool.size() && static_cast<int>(i) < cfg_.lookahead; ++i) {
      work.record(pool[i], h, work.day());
      const double s = hijack_suspicion(work);
      work.erase(AsLink::between(h, pool[i]));
      if (s < best_s) {
        best_s = s;
        best = pool[i];
      }
    }
    return best;
  }

  const Forest* forest_;
  const KnowledgeBase* kb_;
  const DfohContext* ctx_;
  PlannerConfig cfg_;
  std::map<Asn, std::vector<Asn>> cache_;
};

inline PoisonPlan plan_dfoh_poisoning(const Forest& surrogate, const KnowledgeBase& kb, const DfohContext& ctx,
                                      const AttackSpec& spec, const PlannerConfig& cfg = {},
                                      std::vector<AsPath> hijack_paths = {}) {
  DfohPlanner planner(surrogate, kb, ctx, cfg);
  return planner.plan(spec, std::move(hijack_paths));
}

/// Routing world the attack runs in.
struct SimContext {
  const AsGraph* graph = nullptr;
  RoaTable roas;
  std::set<Asn> rov_ases;
  std::set<Asn> monitors;
  int day = 0;
  std::int64_t time = 0;
};

struct PoisonTrace {
  Asn from;
  Asn forged_origin;
  Prefix sub_prefix;
  bool accepted = false;  ///< left unflagged and absorbed into the knowledge base
  double suspicion = 0;
};

struct AttackResult {
  bool evaded = false;
  int links_used = 0;
  double suspicion_before = 1.0;
  double suspicion_after = 1.0;
  double attacker_share = 0;
  int mispredicted = 0;  ///< poison links the defender flagged
  std::vector<PoisonTrace> traces;
};

/// Paths of the hijacked prefix seen at monitors that carry the forged link.
inline std::vector<AsPath> hijack_link_paths(const std::vector<AsPath>& monitor_paths, Asn attacker, Asn victim) {
  std::vector<AsPath> out;
  for (const auto& p : monitor_paths) {
    if (p.size() >= 2 && p[p.size() - 2] == attacker && p.back() == victim) out.push_back(p);
  }
  return out;
}

/// Announces each poison link on a fresh sub-prefix, runs one defender
/// cycle per announcement, then launches the Type-1 hijack and asks the
/// defender about (H, V). `defender` is taken by value: every attack runs on
/// its own copy.
inline AttackResult execute_dfoh_attack(const SimContext& sim, DfohPipeline defender, const PoisonPlan& plan,
                                        const AttackSpec& spec, const Prefix& victim_prefix) {
  if (!sim.graph) throw std::invalid_argument("simulation context without a graph");
  const Asn h = spec.attacker;
  const Asn v = spec.victim;
  AsGraph graph = *sim.graph;
  RoaTable roas = sim.roas;
  int day = sim.day;
  std::int64_t time = sim.time;
  const auto& corpus = defender.context().corpus();

  auto hijack_paths = [&](const AsGraph& g, const RoaTable& r, double* share) {
    const auto out = simulate_hijack(g, r, sim.rov_ases, v, h, HijackMode::Type1, victim_prefix, sim.monitors);
    if (share) *share = out.attacker_share;
    auto paths = hijack_link_paths(out.monitor_paths, h, v);
    if (paths.empty()) paths = forged_paths(corpus.paths_from(h), v);
    return paths;
  };

  AttackResult res;
  res.suspicion_before = defender.verdict(h, v, hijack_paths(graph, roas, nullptr)).suspicion;

  std::set<Prefix> used;
  const auto mode = roas.validate(spec.parent_prefix, h) == RovState::NotFound ? PoisonRoaMode::NoRoa
                                                                                 : PoisonRoaMode::CreateRoa;
  for (std::size_t i = 0; i <= plan.poison_links.size(); ++i) {
    if (plan.new_provider && plan.augment_at == i) {
      const Asn t = *plan.new_provider;
      graph = AsGraph::Builder::from(graph).add_provider_customer(t, h).build();
      defender.kb().declare_provider_link(t, h);
      const auto rib = propagate(graph, {{spec.parent_prefix, {h}, h}}, roas, sim.rov_ases);
      defender.process(observe(rib, sim.monitors, time), day);
      day += spec.wait_days;
      time += static_cast<std::int64_t>(spec.wait_days) * 86400;
      defender.kb().advance(day);
    }
    if (i == plan.poison_links.size()) break;
    const auto& link = plan.poison_links[i];
    const auto pa = craft_poison_announcement(link.from, link.forged_origin, spec.parent_prefix, mode, used);
    used.insert(pa.announcement.prefix);
    roas.merge(pa.roa_delta);
    const auto rib = propagate(graph, {pa.announcement}, roas, sim.rov_ases);
    const auto decisions = defender.process(observe(rib, sim.monitors, time), day);
    PoisonTrace trace{link.from, link.forged_origin, pa.announcement.prefix, false, 0.0};
    trace.accepted = defender.kb().contains(AsLink::between(link.from, link.forged_origin));
    for (const auto& d : decisions) {
      if (AsLink::between(d.upstream, d.downstream) == AsLink::between(link.from, link.forged_origin)) {
        trace.suspicion = d.verdict.suspicion;
      }
    }
    if (!trace.accepted) ++res.mispredicted;
    res.traces.push_back(trace);
    ++res.links_used;
    time += 300;  // one detector cycle
  }

  const auto final_paths = hijack_paths(graph, roas, &res.attacker_share);
  const auto verdict = defender.verdict(h, v, final_paths);
  res.suspicion_after = verdict.suspicion;
  res.evaded = !verdict.flagged;
  return res;
}

// ---------------------------------------------------------------------------
// BEAM threshold pollution
// ---------------------------------------------------------------------------

/// Feeds `events` (time-ordered) through the defender's own rule and returns
/// the threshold in force at `now`.
inline double estimate_beam_threshold(const std::vector<RouteChange>& events, const EmbeddingTable& emb,
                                      const ThresholdConfig& config, std::int64_t now) {
  if (events.empty()) throw EstimationError("no public route changes to estimate from");
  ThresholdState state(config);
  for (const auto& e : events) detect_change(emb, state, e);
  update_threshold(state, now);
  if (!state.theta) throw EstimationError("route changes do not cover a full window");
  return *state.theta;
}

struct PollutionAnnouncement {
  Asn forged_origin;
  Prefix prefix;
  AsPath old_path;
  AsPath new_path;
  double expected_score = 0;
};

struct PollutionPlan {
  std::vector<PollutionAnnouncement> announcements;
  std::size_t n_distinct = 0;
  double epsilon = 0.05;
  double theta = 0;
  bool partial = false;  ///< fewer feasible origins than requested
};

/// Chooses up to `n_distinct` distinct forged origins B whose change from a
/// legitimate path P of the attacker to P + [B] scores inside
/// (theta * (1 - epsilon), theta), highest scores first.
inline PollutionPlan plan_threshold_pollution(const EmbeddingTable& emb, double theta, Asn attacker,
                                              const Prefix& parent_prefix, const std::vector<AsPath>& legit_paths,
                                              std::size_t n_distinct, double epsilon = 0.05,
                                              std::set<Prefix> used = {}) {
  PollutionPlan plan;
  plan.n_distinct = 0;
  plan.epsilon = epsilon;
  plan.theta = theta;
  if (n_distinct == 0) return plan;
  if (!(theta > 0)) throw InfeasiblePollutionError("threshold must be positive");
  if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must be in (0, 1)");
  if (legit_paths.empty()) throw InfeasiblePollutionError("attacker has no legitimate path to modify");
  const double lo = theta * (1.0 - epsilon);
  struct Option {
    double score;
    std::size_t path;
  };
  std::map<Asn, Option> best;  // per forged origin
  bool any_below = false;
  for (std::size_t pi = 0; pi < legit_paths.size(); ++pi) {
    const auto& p = legit_paths[pi];
    if (p.empty() || p.back() != attacker) throw InvalidChangeError("legitimate path must end at the attacker");
    for (const auto b : emb.asns()) {
      if (std::find(p.begin(), p.end(), b) != p.end()) continue;
      AsPath q = p;
      q.push_back(b);
      const double s = path_difference(emb, p, q);
      if (s >= theta) continue;
      any_below = true;
      if (s <= lo) continue;
      const auto it = best.find(b);
      if (it == best.end() || s > it->second.score) best[b] = {s, pi};
    }
  }
  if (!any_below) throw InfeasiblePollutionError("no forged origin scores below the threshold");
  std::vector<std::pair<Asn, Option>> ranked(best.begin(), best.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second.score > b.second.score; });
  for (const auto& [b, opt] : ranked) {
    if (plan.announcements.size() >= n_distinct) break;
    const auto sub = fresh_subprefix(parent_prefix, used);
    used.insert(sub);
    AsPath q = legit_paths[opt.path];
    q.push_back(b);
    plan.announcements.push_back({b, sub, legit_paths[opt.path], std::move(q), opt.score});
  }
  plan.n_distinct = plan.announcements.size();
  plan.partial = plan.n_distinct < n_distinct;
  return plan;
}

/// Replication counts R = max(1, round(X)), X lognormal, with (mu, sigma)
/// fitted so that R itself has the requested mean and std.
class OscillationModel {
 public:
  OscillationModel() : OscillationModel(6.43, 17.79) {}

  OscillationModel(double mean, double std) : mean_(mean), std_(std) {
    if (!(mean >= 1.0)) throw ConfigError("oscillation mean must be at least 1");
    if (!(std >= 0.0)) throw ConfigError("oscillation std must be non-negative");
    if (std == 0.0) return;
    if (mean == 1.0) throw ConfigError("a mean of 1 leaves no room for a positive std");
    calibrate();
  }

  double mean() const noexcept { return mean_; }
  double std() const noexcept { return std_; }
  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }
  bool degenerate() const noexcept { return std_ == 0.0; }

  /// Multiplier at quantile u in (0, 1).
  std::int64_t quantile(double u) const {
    if (degenerate()) return std::max<std::int64_t>(1, std::llround(mean_));
    u = std::clamp(u, 1e-300, 1.0 - 1e-16);
    const double z = boost::math::quantile(boost::math::normal(), u);
    const double x = std::exp(std::min(mu_ + sigma_ * z, 40.0));
    return std::max<std::int64_t>(1, std::llround(x));
  }

  std::int64_t sample(Rng& rng) const { return quantile(open01(rng)); }

  /// n draws, one per stratum [i/n, (i+1)/n), in shuffled order. Each draw
  /// has the model's distribution; the strata tame the heavy tail.
  std::vector<std::int64_t> sample_stratified(std::size_t n, std::uint64_t seed) const {
    Rng rng(derive_seed(seed, "oscillation-strata"));
    std::vector<std::int64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = quantile((static_cast<double>(i) + open01(rng)) / static_cast<double>(n));
    }
    shuffle(out, rng);
    return out;
  }

  /// Exact mean and std of R under (mu, sigma).
  static std::pair<double, double> discretized_moments(double mu, double sigma) {
    const boost::math::normal n01;
    auto cdf = [&](double x) { return boost::math::cdf(n01, (std::log(x) - mu) / sigma); };
    constexpr int kTerms = 5000;
    double m1 = 0, m2 = 0, prev = 0;
    for (int k = 1; k <= kTerms; ++k) {
      const double c = cdf(k + 0.5);
      const double p = c - prev;
      prev = c;
      m1 += k * p;
      m2 += static_cast<double>(k) * k * p;
    }
    // tail beyond kTerms + 0.5 by lognormal partial moments
    const double a = std::log(kTerms + 0.5);
    m1 += std::exp(mu + sigma * sigma / 2) * boost::math::cdf(boost::math::complement(n01, (a - mu - sigma * sigma) / sigma));
    m2 += std::exp(2 * mu + 2 * sigma * sigma) *
          boost::math::cdf(boost::math::complement(n01, (a - mu - 2 * sigma * sigma) / sigma));
    return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
  }

 private:
  static double open01(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

  void calibrate() {
    // start from the continuous moment match, then Newton on (mu, log sigma)
    const double cv2 = (std_ / mean_) * (std_ / mean_);
    double s2 = std::log1p(cv2);
    double mu = std::log(mean_) - s2 / 2;
    double ls = 0.5 * std::log(s2);
    auto resid = [&](double m, double l) {
      const auto [a, b] = discretized_moments(m, std::exp(l));
      return std::pair{a / mean_ - 1.0, b / std_ - 1.0};
    };
    for (int it = 0; it < 100; ++it) {
      const auto [r1, r2] = resid(mu, ls);
      if (std::abs(r1) < 1e-12 && std::abs(r2) < 1e-12) break;
      const double h = 1e-6;
      const auto [a1, a2] = resid(mu + h, ls);
      const auto [b1, b2] = resid(mu, ls + h);
      const double j11 = (a1 - r1) / h, j21 = (a2 - r2) / h, j12 = (b1 - r1) / h, j22 = (b2 - r2) / h;
      const double det = j11 * j22 - j12 * j21;
      if (!std::isfinite(det) || det == 0) break;
      double dm = (j22 * r1 - j12 * r2) / det;
      double dl = (-j21 * r1 + j11 * r2) / det;
      const double step = std::max(std::abs(dm), std::abs(dl));
      if (step > 0.5) {
        dm *= 0.5 / step;
        dl *= 0.5 / step;
      }
      mu -= dm;
      ls -= dl;
    }
    const auto [r1, r2] = resid(mu, ls);
    if (!(std::abs(r1) < 1e-6 && std::abs(r2) < 1e-6)) {
      throw ConfigError("cannot fit a truncated lognormal to mean " + detail::format_double(mean_) + ", std " +
                        detail::format_double(std_));
    }
    mu_ = mu;
    sigma_ = std::exp(ls);
  }

  double mean_;
  double std_;
  double mu_ = 0;
  double sigma_ = 0;
};

/// Replicates each announcement r_i times (r_i drawn from its own seeded
/// stream, so a plan's first n events do not depend on later entries) and
/// spreads the copies uniformly over the window.
inline std::vector<RouteChange> amplify(const PollutionPlan& plan, const OscillationModel& model, std::uint64_t seed,
                                        std::int64_t window_start, std::int64_t window_seconds) {
  if (window_seconds <= 0) throw std::invalid_argument("window_seconds must be positive");
  std::vector<RouteChange> out;
  for (std::size_t i = 0; i < plan.announcements.size(); ++i) {
    const auto& a = plan.announcements[i];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto r = model.sample(rng);
    for (std::int64_t k = 0; k < r; ++k) {
      const auto t = window_start + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(window_seconds)));
      out.push_back({a.prefix, a.old_path, a.new_path, t});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.time < y.time; });
  return out;
}

struct PollutionResult {
  double theta_before = 0;
  double theta_after = 0;
  double undetected_before = 0;
  double undetected_after = 0;
};

/// Runs the defender over warm-up + baseline and warm-up + baseline +
/// pollution, takes each threshold at `boundary`, and reports the share of
/// hijack candidates scoring at or below it.
inline PollutionResult evaluate_pollution(const EmbeddingTable& emb, const ThresholdConfig& config,
                                          const std::vector<RouteChange>& warmup,
                                          const std::vector<RouteChange>& baseline,
                                          const std::vector<RouteChange>& pollution,
                                          const std::vector<RouteChange>& hijack_candidates, std::int64_t boundary) {
  auto run = [&](bool polluted) {
    std::vector<RouteChange> events = warmup;
    events.insert(events.end(), baseline.begin(), baseline.end());
    if (polluted) events.insert(events.end(), pollution.begin(), pollution.end());
    std::stable_sort(events.begin(), events.end(), [](const auto& x, const auto& y) { return x.time < y.time; });
    ThresholdState state(config);
    for (const auto& e : events) detect_change(emb, state, e);
    update_threshold(state, boundary);
    if (!state.theta) throw EstimationError("no threshold at the evaluation boundary");
    return *state.theta;
  };
  PollutionResult r;
  r.theta_before = run(false);
  r.theta_after = pollution.empty() ? r.theta_before : run(true);
  if (!hijack_candidates.empty()) {
    std::size_t below_before = 0, below_after = 0;
    for (const auto& c : hijack_candidates) {
      const double s = path_difference(emb, c);
      below_before += s <= r.theta_before ? 1 : 0;
      below_after += s <= r.theta_after ? 1 : 0;
    }
    const auto n = static_cast<double>(hijack_candidates.size());
    r.undetected_before = static_cast<double>(below_before) / n;
    r.undetected_after = static_cast<double>(below_after) / n;
  }
  return r;
}

}  // namespace bgpoison
