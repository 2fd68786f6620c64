#pragma once

// Experiment orchestration: strict JSON configs, the simulated world shared
// by every experiment, the three campaigns and their CSV/manifest outputs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bgpoison/attacks.hpp"
#include "bgpoison/beam.hpp"
#include "bgpoison/countermeasures.hpp"
#include "bgpoison/dfoh.hpp"
#include "bgpoison/routing.hpp"
#include "bgpoison/topology.hpp"

namespace bgpoison {

inline constexpr std::string_view kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TopologyConfig {
  std::string relationships_file;  ///< CAIDA-style file; synthetic when empty
  std::string metadata_file;       ///< PeeringDB-lite document, optional
  SyntheticParams synthetic;
};

struct WorldConfig {
  std::size_t monitors = 60;
  double rov_fraction = 0.2;
  double roa_fraction = 0.5;
  double irr_fraction = 0.3;
};

struct BeamSetup {
  EmbeddingParams embedding;
  ThresholdConfig threshold;
  std::size_t changes_per_window = 300;
  std::size_t hijack_candidates = 300;
};

struct VictimSelection {
  bool all = false;
  std::size_t sample = 50;
};

/// Population attackers are sampled from when none are listed.
enum class AttackerPool { Any, Transit };

inline std::string_view to_string(AttackerPool p) { return p == AttackerPool::Any ? "any" : "transit"; }

struct DfohAttackConfig {
  std::vector<Asn> attackers;  ///< explicit list; sampled when empty
  std::size_t n_attackers = 20;
  AttackerPool pool = AttackerPool::Any;
  VictimSelection victims;
  int budget = 5;
  bool allow_transit_augmentation = false;
  int wait_days = 30;
  PlannerConfig planner;
};

struct BeamAttackConfig {
  std::vector<Asn> attackers;
  std::size_t n_attackers = 5;
  std::vector<std::size_t> n_distinct = {10};
  double epsilon = 0.05;
  double oscillation_mean = 6.43;
  double oscillation_std = 17.79;
};

struct MonitorSweepConfig {
  std::vector<std::size_t> grid = {1, 10, 100};
  std::size_t trials = 10;
  std::vector<MonitorStrategy> strategies = {MonitorStrategy::Random, MonitorStrategy::BestCase};
  std::string traces;  ///< poison-link CSV; defaults to <out>/dfoh_poison_links.csv
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  TopologyConfig topology;
  WorldConfig world;
  DfohConfig dfoh;
  BeamSetup beam;
  DfohAttackConfig dfoh_attack;
  BeamAttackConfig beam_attack;
  MonitorSweepConfig monitor_sweep;
  std::string out = "results";
};

namespace detail {

/// Rejects keys outside `allowed` so typos fail loudly.
inline void expect_keys(const nlohmann::json& j, const std::string& where,
                        std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <class T>
void read_key(const nlohmann::json& j, const std::string& where, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0) {
          throw ConfigError("");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("");
    }
    out = it->template get<T>();
  } catch (const std::exception&) {
    throw ConfigError("invalid value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

inline std::vector<Asn> read_asns(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of ASNs");
  std::vector<Asn> out;
  for (const auto& x : j) {
    if (!x.is_number_unsigned() || x.get<std::uint64_t>() == 0 || x.get<std::uint64_t>() > 4294967295ULL) {
      throw ConfigError(where + " holds an invalid ASN");
    }
    out.push_back(Asn{static_cast<std::uint32_t>(x.get<std::uint64_t>())});
  }
  return out;
}

inline std::vector<std::size_t> read_sizes(const nlohmann::json& j, const std::string& where) {
  if (j.is_object()) {
    expect_keys(j, where, {"from", "to"});
    std::size_t from = 0, to = 0;
    if (!j.contains("from") || !j.contains("to")) throw ConfigError(where + " range needs 'from' and 'to'");
    read_key(j, where, "from", from);
    read_key(j, where, "to", to);
    if (from > to) throw ConfigError(where + " range is empty");
    std::vector<std::size_t> out;
    for (auto i = from; i <= to; ++i) out.push_back(i);
    return out;
  }
  if (!j.is_array()) throw ConfigError(where + " must be an array or a {from, to} range");
  std::vector<std::size_t> out;
  for (const auto& x : j) {
    if (!x.is_number_unsigned()) throw ConfigError(where + " must hold non-negative integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

inline nlohmann::json asns_json(const std::vector<Asn>& v) {
  auto out = nlohmann::json::array();
  for (const auto a : v) out.push_back(a.value());
  return out;
}

}  // namespace detail

/// Parses a config document. Unknown keys anywhere are errors. `seed`
/// overrides the document's seed; one of them must be present.
inline ExperimentConfig parse_config(const nlohmann::json& j, std::optional<std::uint64_t> seed = std::nullopt) {
  using detail::expect_keys;
  using detail::read_key;
  ExperimentConfig c;
  expect_keys(j, "", {"seed", "topology", "world", "dfoh", "beam", "dfoh_attack", "beam_attack", "monitor_sweep", "out"});
  if (!j.contains("seed") && !seed) throw ConfigError("a seed is required");
  read_key(j, "", "seed", c.seed);
  if (seed) c.seed = *seed;
  read_key(j, "", "out", c.out);

  if (const auto it = j.find("topology"); it != j.end()) {
    expect_keys(*it, "topology", {"relationships", "metadata", "synthetic"});
    read_key(*it, "topology", "relationships", c.topology.relationships_file);
    read_key(*it, "topology", "metadata", c.topology.metadata_file);
    if (const auto s = it->find("synthetic"); s != it->end()) {
      const std::string w = "topology.synthetic";
      auto& p = c.topology.synthetic;
      expect_keys(*s, w, {"tier1", "tier2", "stub", "countries", "tier2_min_providers", "tier2_max_providers",
                          "stub_min_providers", "stub_max_providers", "tier2_peer_degree", "stub_peer_probability",
                          "same_country_bias", "tier1_stub_weight", "ixps_per_country", "facilities_per_country",
                          "unknown_country_fraction"});
      read_key(*s, w, "tier1", p.tier1);
      read_key(*s, w, "tier2", p.tier2);
      read_key(*s, w, "stub", p.stub);
      read_key(*s, w, "countries", p.countries);
      read_key(*s, w, "tier2_min_providers", p.tier2_min_providers);
      read_key(*s, w, "tier2_max_providers", p.tier2_max_providers);
      read_key(*s, w, "stub_min_providers", p.stub_min_providers);
      read_key(*s, w, "stub_max_providers", p.stub_max_providers);
      read_key(*s, w, "tier2_peer_degree", p.tier2_peer_degree);
      read_key(*s, w, "stub_peer_probability", p.stub_peer_probability);
      read_key(*s, w, "same_country_bias", p.same_country_bias);
      read_key(*s, w, "tier1_stub_weight", p.tier1_stub_weight);
      read_key(*s, w, "ixps_per_country", p.ixps_per_country);
      read_key(*s, w, "facilities_per_country", p.facilities_per_country);
      read_key(*s, w, "unknown_country_fraction", p.unknown_country_fraction);
    }
  }
  if (const auto it = j.find("world"); it != j.end()) {
    expect_keys(*it, "world", {"monitors", "rov_fraction", "roa_fraction", "irr_fraction"});
    read_key(*it, "world", "monitors", c.world.monitors);
    read_key(*it, "world", "rov_fraction", c.world.rov_fraction);
    read_key(*it, "world", "roa_fraction", c.world.roa_fraction);
    read_key(*it, "world", "irr_fraction", c.world.irr_fraction);
  }
  if (const auto it = j.find("dfoh"); it != j.end()) {
    const std::string w = "dfoh";
    expect_keys(*it, w, {"window_days", "quarantine_days", "n_per_class", "n_trees", "max_depth",
                         "bootstrap_fraction", "min_samples_split", "threshold", "ablate"});
    read_key(*it, w, "window_days", c.dfoh.window_days);
    read_key(*it, w, "quarantine_days", c.dfoh.quarantine_days);
    read_key(*it, w, "n_per_class", c.dfoh.n_per_class);
    read_key(*it, w, "n_trees", c.dfoh.forest.n_trees);
    read_key(*it, w, "max_depth", c.dfoh.forest.max_depth);
    read_key(*it, w, "bootstrap_fraction", c.dfoh.forest.bootstrap_fraction);
    read_key(*it, w, "min_samples_split", c.dfoh.forest.min_samples_split);
    read_key(*it, w, "threshold", c.dfoh.threshold);
    if (const auto a = it->find("ablate"); a != it->end()) {
      if (!a->is_array()) throw ConfigError("dfoh.ablate must be an array of category names");
      for (const auto& x : *a) {
        if (!x.is_string()) throw ConfigError("dfoh.ablate must be an array of category names");
        c.dfoh.ablate.push_back(parse_feature_category(x.get<std::string>()));
      }
    }
  }
  if (const auto it = j.find("beam"); it != j.end()) {
    const std::string w = "beam";
    expect_keys(*it, w, {"dim", "learning_rate", "margin", "epochs", "negatives", "lambda", "radius",
                         "window_seconds", "k", "include_flagged", "changes_per_window", "hijack_candidates"});
    auto& e = c.beam.embedding;
    read_key(*it, w, "dim", e.dim);
    read_key(*it, w, "learning_rate", e.learning_rate);
    read_key(*it, w, "margin", e.margin);
    read_key(*it, w, "epochs", e.epochs);
    read_key(*it, w, "negatives", e.negatives);
    read_key(*it, w, "lambda", e.lambda);
    read_key(*it, w, "radius", e.radius);
    read_key(*it, w, "window_seconds", c.beam.threshold.window_seconds);
    read_key(*it, w, "k", c.beam.threshold.k);
    read_key(*it, w, "include_flagged", c.beam.threshold.include_flagged);
    read_key(*it, w, "changes_per_window", c.beam.changes_per_window);
    read_key(*it, w, "hijack_candidates", c.beam.hijack_candidates);
  }
  if (const auto it = j.find("dfoh_attack"); it != j.end()) {
    const std::string w = "dfoh_attack";
    expect_keys(*it, w, {"attackers", "n_attackers", "attacker_pool", "victims", "budget", "allow_transit_augmentation", "wait_days",
                         "lookahead", "weight_country", "weight_ixp", "weight_degree"});
    auto& a = c.dfoh_attack;
    if (it->contains("attackers")) a.attackers = detail::read_asns(it->at("attackers"), w + ".attackers");
    read_key(*it, w, "n_attackers", a.n_attackers);
    if (const auto p = it->find("attacker_pool"); p != it->end()) {
      const auto name = p->is_string() ? p->get<std::string>() : std::string{};
      if (name == "any") {
        a.pool = AttackerPool::Any;
      } else if (name == "transit") {
        a.pool = AttackerPool::Transit;
      } else {
        throw ConfigError("dfoh_attack.attacker_pool must be \"any\" or \"transit\"");
      }
    }
    if (const auto v = it->find("victims"); v != it->end()) {
      if (v->is_string() && v->get<std::string>() == "all") {
        a.victims.all = true;
      } else if (v->is_object()) {
        expect_keys(*v, w + ".victims", {"sample"});
        read_key(*v, w + ".victims", "sample", a.victims.sample);
      } else {
        throw ConfigError("dfoh_attack.victims must be \"all\" or {\"sample\": n}");
      }
    }
    read_key(*it, w, "budget", a.budget);
    read_key(*it, w, "allow_transit_augmentation", a.allow_transit_augmentation);
    read_key(*it, w, "wait_days", a.wait_days);
    read_key(*it, w, "lookahead", a.planner.lookahead);
    read_key(*it, w, "weight_country", a.planner.weight_country);
    read_key(*it, w, "weight_ixp", a.planner.weight_ixp);
    read_key(*it, w, "weight_degree", a.planner.weight_degree);
  }
  if (const auto it = j.find("beam_attack"); it != j.end()) {
    const std::string w = "beam_attack";
    expect_keys(*it, w, {"attackers", "n_attackers", "n_distinct", "epsilon", "oscillation_mean", "oscillation_std"});
    auto& a = c.beam_attack;
    if (it->contains("attackers")) a.attackers = detail::read_asns(it->at("attackers"), w + ".attackers");
    read_key(*it, w, "n_attackers", a.n_attackers);
    if (it->contains("n_distinct")) a.n_distinct = detail::read_sizes(it->at("n_distinct"), w + ".n_distinct");
    read_key(*it, w, "epsilon", a.epsilon);
    read_key(*it, w, "oscillation_mean", a.oscillation_mean);
    read_key(*it, w, "oscillation_std", a.oscillation_std);
  }
  if (const auto it = j.find("monitor_sweep"); it != j.end()) {
    const std::string w = "monitor_sweep";
    expect_keys(*it, w, {"grid", "trials", "strategies", "traces"});
    auto& m = c.monitor_sweep;
    if (it->contains("grid")) m.grid = detail::read_sizes(it->at("grid"), w + ".grid");
    read_key(*it, w, "trials", m.trials);
    read_key(*it, w, "traces", m.traces);
    if (const auto s = it->find("strategies"); s != it->end()) {
      if (!s->is_array()) throw ConfigError("monitor_sweep.strategies must be an array");
      m.strategies.clear();
      for (const auto& x : *s) {
        const auto name = x.is_string() ? x.get<std::string>() : std::string{};
        if (name == "random") {
          m.strategies.push_back(MonitorStrategy::Random);
        } else if (name == "best_case") {
          m.strategies.push_back(MonitorStrategy::BestCase);
        } else {
          throw ConfigError("unknown monitor strategy '" + name + "'");
        }
      }
    }
  }
  // canonical forms
  std::sort(c.monitor_sweep.grid.begin(), c.monitor_sweep.grid.end());
  c.monitor_sweep.grid.erase(std::unique(c.monitor_sweep.grid.begin(), c.monitor_sweep.grid.end()),
                             c.monitor_sweep.grid.end());
  std::sort(c.monitor_sweep.strategies.begin(), c.monitor_sweep.strategies.end());
  c.monitor_sweep.strategies.erase(std::unique(c.monitor_sweep.strategies.begin(), c.monitor_sweep.strategies.end()),
                                   c.monitor_sweep.strategies.end());
  std::sort(c.dfoh.ablate.begin(), c.dfoh.ablate.end());
  c.dfoh.ablate.erase(std::unique(c.dfoh.ablate.begin(), c.dfoh.ablate.end()), c.dfoh.ablate.end());

  // validation
  if (c.world.monitors == 0) throw ConfigError("world.monitors must be positive");
  for (const double f : {c.world.rov_fraction, c.world.roa_fraction, c.world.irr_fraction}) {
    if (!(f >= 0 && f <= 1)) throw ConfigError("world fractions must lie in [0, 1]");
  }
  if (c.dfoh.window_days < 0 || c.dfoh.quarantine_days < 0) throw ConfigError("dfoh days must be non-negative");
  if (c.dfoh.n_per_class == 0) throw ConfigError("dfoh.n_per_class must be positive");
  if (c.dfoh.forest.n_trees < 1 || c.dfoh.forest.max_depth < 0 || !(c.dfoh.forest.bootstrap_fraction > 0)) {
    throw ConfigError("invalid forest parameters");
  }
  if (!(c.dfoh.threshold >= 0 && c.dfoh.threshold <= 1)) throw ConfigError("dfoh.threshold must lie in [0, 1]");
  if (c.beam.embedding.dim < 2 || c.beam.embedding.epochs < 0 || c.beam.embedding.negatives < 0) {
    throw ConfigError("invalid embedding parameters");
  }
  if (c.beam.threshold.window_seconds <= 0 || c.beam.threshold.k < 0) throw ConfigError("invalid threshold parameters");
  if (c.dfoh_attack.budget < 0) throw ConfigError("dfoh_attack.budget must be non-negative");
  if (c.dfoh_attack.planner.lookahead < 1) throw ConfigError("dfoh_attack.lookahead must be positive");
  if (c.dfoh_attack.allow_transit_augmentation && c.dfoh_attack.wait_days < c.dfoh.quarantine_days) {
    throw ConfigError("dfoh_attack.wait_days must cover the quarantine");
  }
  if (!(c.beam_attack.epsilon > 0 && c.beam_attack.epsilon < 1)) throw ConfigError("beam_attack.epsilon must lie in (0, 1)");
  OscillationModel(c.beam_attack.oscillation_mean, c.beam_attack.oscillation_std);
  if (c.monitor_sweep.trials == 0) throw ConfigError("monitor_sweep.trials must be positive");
  if (std::find(c.monitor_sweep.grid.begin(), c.monitor_sweep.grid.end(), 0) != c.monitor_sweep.grid.end()) {
    throw ConfigError("monitor_sweep.grid values must be positive");
  }
  return c;
}

inline ExperimentConfig parse_config_text(std::string_view text, std::optional<std::uint64_t> seed = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, seed);
}

inline ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), seed);
}

/// Canonical document of every semantic field (everything but `out`).
inline nlohmann::json canonical_json(const ExperimentConfig& c) {
  const auto& s = c.topology.synthetic;
  nlohmann::json ablate = nlohmann::json::array();
  for (const auto a : c.dfoh.ablate) ablate.push_back(std::string(to_string(a)));
  nlohmann::json strategies = nlohmann::json::array();
  for (const auto m : c.monitor_sweep.strategies) strategies.push_back(std::string(to_string(m)));
  return {
      {"seed", c.seed},
      {"topology",
       {{"relationships", c.topology.relationships_file},
        {"metadata", c.topology.metadata_file},
        {"synthetic",
         {{"tier1", s.tier1}, {"tier2", s.tier2}, {"stub", s.stub}, {"countries", s.countries},
          {"tier2_min_providers", s.tier2_min_providers}, {"tier2_max_providers", s.tier2_max_providers},
          {"stub_min_providers", s.stub_min_providers}, {"stub_max_providers", s.stub_max_providers},
          {"tier2_peer_degree", s.tier2_peer_degree}, {"stub_peer_probability", s.stub_peer_probability},
          {"same_country_bias", s.same_country_bias}, {"tier1_stub_weight", s.tier1_stub_weight},
          {"ixps_per_country", s.ixps_per_country}, {"facilities_per_country", s.facilities_per_country},
          {"unknown_country_fraction", s.unknown_country_fraction}}}}},
      {"world",
       {{"monitors", c.world.monitors}, {"rov_fraction", c.world.rov_fraction},
        {"roa_fraction", c.world.roa_fraction}, {"irr_fraction", c.world.irr_fraction}}},
      {"dfoh",
       {{"window_days", c.dfoh.window_days}, {"quarantine_days", c.dfoh.quarantine_days},
        {"n_per_class", c.dfoh.n_per_class}, {"n_trees", c.dfoh.forest.n_trees},
        {"max_depth", c.dfoh.forest.max_depth}, {"bootstrap_fraction", c.dfoh.forest.bootstrap_fraction},
        {"min_samples_split", c.dfoh.forest.min_samples_split}, {"threshold", c.dfoh.threshold},
        {"ablate", ablate}}},
      {"beam",
       {{"dim", c.beam.embedding.dim}, {"learning_rate", c.beam.embedding.learning_rate},
        {"margin", c.beam.embedding.margin}, {"epochs", c.beam.embedding.epochs},
        {"negatives", c.beam.embedding.negatives}, {"lambda", c.beam.embedding.lambda},
        {"radius", c.beam.embedding.radius}, {"window_seconds", c.beam.threshold.window_seconds},
        {"k", c.beam.threshold.k}, {"include_flagged", c.beam.threshold.include_flagged},
        {"changes_per_window", c.beam.changes_per_window}, {"hijack_candidates", c.beam.hijack_candidates}}},
      {"dfoh_attack",
       {{"attackers", detail::asns_json(c.dfoh_attack.attackers)}, {"n_attackers", c.dfoh_attack.n_attackers},
        {"attacker_pool", std::string(to_string(c.dfoh_attack.pool))},
        {"victims", c.dfoh_attack.victims.all ? nlohmann::json("all")
                                              : nlohmann::json{{"sample", c.dfoh_attack.victims.sample}}},
        {"budget", c.dfoh_attack.budget}, {"allow_transit_augmentation", c.dfoh_attack.allow_transit_augmentation},
        {"wait_days", c.dfoh_attack.wait_days}, {"lookahead", c.dfoh_attack.planner.lookahead},
        {"weight_country", c.dfoh_attack.planner.weight_country}, {"weight_ixp", c.dfoh_attack.planner.weight_ixp},
        {"weight_degree", c.dfoh_attack.planner.weight_degree}}},
      {"beam_attack",
       {{"attackers", detail::asns_json(c.beam_attack.attackers)}, {"n_attackers", c.beam_attack.n_attackers},
        {"n_distinct", c.beam_attack.n_distinct}, {"epsilon", c.beam_attack.epsilon},
        {"oscillation_mean", c.beam_attack.oscillation_mean}, {"oscillation_std", c.beam_attack.oscillation_std}}},
      {"monitor_sweep",
       {{"grid", c.monitor_sweep.grid}, {"trials", c.monitor_sweep.trials}, {"strategies", strategies},
        {"traces", c.monitor_sweep.traces}}},
  };
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << fnv1a(canonical_json(c).dump());
  return ss.str();
}

// ---------------------------------------------------------------------------
// Simulated world
// ---------------------------------------------------------------------------

/// Everything the experiments share: the topology, its metadata, prefix
/// ownership, RPKI deployment, public monitors, the public route corpus and
/// the defender's initial knowledge base. Not copyable: the context points
/// into it.
struct World {
  AsGraph graph;
  MetadataTable metadata;
  std::map<Asn, Prefix> prefix_of;
  RoaTable roas;
  std::set<Asn> rov_ases;
  std::set<Asn> monitors;
  RibSnapshot rib;
  std::vector<RouteEvent> events;
  RouteCorpus corpus;
  std::set<AsLink> irr;
  KnowledgeBase kb;
  std::unique_ptr<DfohContext> ctx;

  World() = default;
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  SimContext sim() const {
    SimContext s;
    s.graph = &graph;
    s.roas = roas;
    s.rov_ases = rov_ases;
    s.monitors = monitors;
    return s;
  }
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// /20 per AS, numbered from 1.0.0.0 in ASN order.
inline Prefix origin_prefix(std::size_t index) {
  return Prefix((std::uint32_t{1} << 24) + (static_cast<std::uint32_t>(index) << 12), 20);
}

/// Monitors: the best-connected half of the requested count plus a uniform
/// sample of the rest.
inline std::set<Asn> choose_monitors(const AsGraph& g, std::size_t count, std::uint64_t seed) {
  const auto& nodes = g.nodes();
  count = std::min(count, nodes.size());
  std::vector<std::pair<std::size_t, Asn>> by_degree;
  for (const auto a : nodes) by_degree.push_back({g.neighbors(a).size(), a});
  std::sort(by_degree.begin(), by_degree.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  std::set<Asn> out;
  for (std::size_t i = 0; i < count / 2; ++i) out.insert(by_degree[i].second);
  std::vector<Asn> rest;
  for (const auto a : nodes) {
    if (!out.count(a)) rest.push_back(a);
  }
  Rng rng(derive_seed(seed, "monitors"));
  for (const auto a : sample_without_replacement(std::move(rest), count - out.size(), rng)) out.insert(a);
  return out;
}

inline std::unique_ptr<World> build_world(const ExperimentConfig& cfg) {
  auto w = std::make_unique<World>();
  if (!cfg.topology.relationships_file.empty()) {
    std::istringstream in(read_file(cfg.topology.relationships_file));
    w->graph = parse_relationships(in);
    if (!cfg.topology.metadata_file.empty()) w->metadata = parse_metadata(read_file(cfg.topology.metadata_file));
  } else {
    auto net = generate_synthetic_internet(cfg.topology.synthetic, derive_seed(cfg.seed, "topology"));
    w->graph = std::move(net.graph);
    w->metadata = std::move(net.metadata);
  }
  if (w->graph.size() == 0) throw InvalidScenarioError("empty topology");
  const auto& nodes = w->graph.nodes();
  Rng rng(derive_seed(cfg.seed, "rpki"));
  std::vector<Announcement> anns;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto p = origin_prefix(i);
    w->prefix_of.emplace(nodes[i], p);
    anns.push_back({p, {nodes[i]}, nodes[i]});
    if (bernoulli(rng, cfg.world.roa_fraction)) w->roas.add(p, nodes[i]);
    if (bernoulli(rng, cfg.world.rov_fraction)) w->rov_ases.insert(nodes[i]);
  }
  w->monitors = choose_monitors(w->graph, cfg.world.monitors, cfg.seed);
  w->rib = propagate(w->graph, anns, w->roas, w->rov_ases);
  w->events = observe(w->rib, w->monitors, 0);
  w->corpus = RouteCorpus::from_events(w->events);
  w->kb = KnowledgeBase(cfg.dfoh.window_days, 0, cfg.dfoh.quarantine_days);
  update_knowledge_base(w->kb, w->events, 0);
  Rng irr_rng(derive_seed(cfg.seed, "irr"));
  for (const auto& [link, _] : w->kb.links()) {
    if (bernoulli(irr_rng, cfg.world.irr_fraction)) w->irr.insert(link);
  }
  w->ctx = std::make_unique<DfohContext>(w->graph, w->metadata, w->corpus, w->irr);
  return w;
}

inline std::shared_ptr<const Forest> train_defender(const World& w, const ExperimentConfig& cfg, int jobs = 1) {
  return std::make_shared<const Forest>(train_classifier(w.kb, *w.ctx, cfg.dfoh, derive_seed(cfg.seed, "dfoh"), jobs));
}

inline EmbeddingTable train_defender_embedding(const World& w, const ExperimentConfig& cfg,
                                               EmbeddingReport* report = nullptr) {
  return train_embedding(w.graph, cfg.beam.embedding, derive_seed(cfg.seed, "beam"), report);
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

struct ResultBundle {
  std::filesystem::path dir;
  std::vector<std::string> files;  ///< written CSVs, relative to dir
  nlohmann::json manifest;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

/// Writes the manifest on construction and rewrites it with the wall time
/// and file list once the run completes.
class RunRecorder {
 public:
  RunRecorder(std::filesystem::path dir, std::string command, const ExperimentConfig& cfg)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_);
    manifest_ = {{"command", std::move(command)},
                 {"version", std::string(kVersion)},
                 {"seed", cfg.seed},
                 {"config_hash", config_hash(cfg)},
                 {"config", canonical_json(cfg)},
                 {"status", "running"},
                 {"files", nlohmann::json::array()}};
    flush();
  }

  void write(const std::string& name, const std::string& text) {
    detail::write_text(dir_ / name, text);
    files_.push_back(name);
  }

  ResultBundle finish() {
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_["status"] = "complete";
    manifest_["wall_seconds"] = secs;
    manifest_["files"] = files_;
    flush();
    return {dir_, files_, manifest_};
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void flush() const { detail::write_text(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point start_;
  nlohmann::json manifest_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// DFOH poisoning campaign
// ---------------------------------------------------------------------------

struct DfohPairResult {
  Asn attacker;
  Asn victim;
  PoisonPlan plan;
  AttackResult result;
  std::string error;  ///< non-empty when a stage failed
};

struct DfohCampaign {
  std::vector<Asn> attackers;
  std::vector<DfohPairResult> pairs;  ///< ordered by (attacker, victim)
};

inline std::vector<Asn> pick_attackers(const World& w, const std::vector<Asn>& explicit_list, std::size_t n,
                                       std::uint64_t seed, std::string_view label,
                                       AttackerPool pool_kind = AttackerPool::Any) {
  std::vector<Asn> out;
  if (!explicit_list.empty()) {
    for (const auto a : explicit_list) {
      if (!w.graph.contains(a)) throw ConfigError("attacker AS " + to_string(a) + " is not in the topology");
      out.push_back(a);
    }
  } else {
    std::vector<Asn> pool;
    for (const auto a : w.graph.nodes()) {
      if (!w.corpus.has_origin(a)) continue;
      if (pool_kind == AttackerPool::Transit && w.graph.customers(a).empty()) continue;
      pool.push_back(a);
    }
    Rng rng(derive_seed(seed, label));
    out = sample_without_replacement(std::move(pool), n, rng);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Victims of `attacker`: every AS not already adjacent to it in the
/// knowledge base (a known link is no forged link), sampled if configured.
inline std::vector<Asn> pick_victims(const World& w, Asn attacker, const VictimSelection& sel, std::uint64_t seed) {
  std::vector<Asn> pool;
  for (const auto v : w.graph.nodes()) {
    if (v != attacker && !w.kb.find(AsLink::between(attacker, v))) pool.push_back(v);
  }
  if (!sel.all) {
    Rng rng(derive_seed(derive_seed(seed, "victims"), attacker.value()));
    pool = sample_without_replacement(std::move(pool), sel.sample, rng);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Plans and executes the poisoning attack for every (attacker, victim)
/// pair. Attackers run in parallel on isolated pipeline copies.
inline DfohCampaign run_dfoh_pairs(const World& w, const std::shared_ptr<const Forest>& forest,
                                   const ExperimentConfig& cfg, int jobs = 1) {
  DfohCampaign c;
  const auto& ac = cfg.dfoh_attack;
  c.attackers = pick_attackers(w, ac.attackers, ac.n_attackers, cfg.seed, "dfoh-attackers", ac.pool);
  std::vector<std::vector<DfohPairResult>> per(c.attackers.size());
  const DfohPipeline defender(w.kb, forest, *w.ctx, cfg.dfoh.threshold);
  auto planner_cfg = ac.planner;
  planner_cfg.threshold = cfg.dfoh.threshold;
  const auto sim = w.sim();
  parallel_for(c.attackers.size(), static_cast<std::size_t>(std::max(1, jobs)), [&](std::size_t ai) {
    const Asn h = c.attackers[ai];
    DfohPlanner planner(*forest, w.kb, *w.ctx, planner_cfg);
    for (const auto v : pick_victims(w, h, ac.victims, cfg.seed)) {
      DfohPairResult r{h, v, {}, {}, {}};
      try {
        AttackSpec spec{h, v, w.prefix_of.at(h), ac.budget, ac.allow_transit_augmentation, ac.wait_days};
        const auto seen = simulate_hijack(w.graph, w.roas, w.rov_ases, v, h, HijackMode::Type1, w.prefix_of.at(v),
                                          w.monitors);
        auto paths = hijack_link_paths(seen.monitor_paths, h, v);
        r.plan = planner.plan(spec, paths);
        r.result = execute_dfoh_attack(sim, defender, r.plan, spec, w.prefix_of.at(v));
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      per[ai].push_back(std::move(r));
    }
  });
  for (auto& v : per) {
    for (auto& r : v) c.pairs.push_back(std::move(r));
  }
  return c;
}

namespace detail {

inline std::string dfoh_results_csv(const DfohCampaign& c) {
  std::ostringstream out;
  out << "attacker,victim,evaded,links_used,suspicion_before,suspicion_after\n";
  for (const auto& p : c.pairs) {
    out << p.attacker << ',' << p.victim << ',' << (p.result.evaded ? 1 : 0) << ',' << p.result.links_used << ','
        << fmt(p.result.suspicion_before) << ',' << fmt(p.result.suspicion_after) << '\n';
  }
  return out.str();
}

inline std::string dfoh_details_csv(const DfohCampaign& c) {
  std::ostringstream out;
  out << "attacker,victim,status,predicted_evasion,planned_links,predicted_suspicion,new_provider,mispredicted,"
         "attacker_share,error\n";
  for (const auto& p : c.pairs) {
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << p.attacker << ',' << p.victim << ',' << (p.error.empty() ? (p.plan.status == PlanStatus::Ok ? "ok" : "no_plan") : "error")
        << ',' << (p.plan.predicted_evasion ? 1 : 0) << ',' << p.plan.poison_links.size() << ','
        << fmt(p.plan.predicted_suspicion) << ',' << (p.plan.new_provider ? to_string(*p.plan.new_provider) : "")
        << ',' << p.result.mispredicted << ',' << fmt(p.result.attacker_share) << ',' << err << '\n';
  }
  return out.str();
}

inline std::string dfoh_poison_links_csv(const DfohCampaign& c) {
  std::ostringstream out;
  out << "attacker,victim,index,from,forged_origin,sub_prefix,accepted,suspicion\n";
  for (const auto& p : c.pairs) {
    for (std::size_t i = 0; i < p.result.traces.size(); ++i) {
      const auto& t = p.result.traces[i];
      out << p.attacker << ',' << p.victim << ',' << i << ',' << t.from << ',' << t.forged_origin << ','
          << t.sub_prefix << ',' << (t.accepted ? 1 : 0) << ',' << fmt(t.suspicion) << '\n';
    }
  }
  return out.str();
}

/// Per-attacker success rates, binned into tenths.
inline std::string dfoh_success_hist_csv(const DfohCampaign& c) {
  std::map<Asn, std::pair<std::size_t, std::size_t>> per;  // evaded, total
  for (const auto a : c.attackers) per.emplace(a, std::pair<std::size_t, std::size_t>{0, 0});
  for (const auto& p : c.pairs) {
    auto& e = per.at(p.attacker);
    e.first += p.result.evaded ? 1 : 0;
    ++e.second;
  }
  std::array<std::size_t, 10> bins{};
  std::ostringstream out;
  out << "attacker,victims,evaded,success_rate\n";
  for (const auto& [a, e] : per) {
    const double rate = e.second ? static_cast<double>(e.first) / static_cast<double>(e.second) : 0.0;
    out << a << ',' << e.second << ',' << e.first << ',' << fmt(rate) << '\n';
    if (e.second) ++bins[std::min<std::size_t>(9, static_cast<std::size_t>(rate * 10))];
  }
  out << "\nbin_low,bin_high,attackers\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    out << fmt(static_cast<double>(b) / 10) << ',' << fmt(static_cast<double>(b + 1) / 10) << ',' << bins[b] << '\n';
  }
  return out.str();
}

/// Poison links used by evading pairs.
inline std::string dfoh_links_hist_csv(const DfohCampaign& c, int budget) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(0, budget)) + 1, 0);
  for (const auto& p : c.pairs) {
    if (!p.result.evaded) continue;
    const auto k = static_cast<std::size_t>(p.result.links_used);
    if (k >= counts.size()) counts.resize(k + 1, 0);
    ++counts[k];
  }
  std::ostringstream out;
  out << "links_used,pairs\n";
  for (std::size_t k = 0; k < counts.size(); ++k) out << k << ',' << counts[k] << '\n';
  return out.str();
}

}  // namespace detail

inline ResultBundle run_dfoh_campaign(const ExperimentConfig& cfg, const std::filesystem::path& out, int jobs = 1,
                                      DfohCampaign* result = nullptr) {
  RunRecorder rec(out, "attack-dfoh", cfg);
  DfohCampaign c;
  if (cfg.dfoh_attack.n_attackers > 0 || !cfg.dfoh_attack.attackers.empty()) {
    const auto w = build_world(cfg);
    const auto forest = train_defender(*w, cfg, jobs);
    c = run_dfoh_pairs(*w, forest, cfg, jobs);
  }
  rec.write("dfoh_results.csv", detail::dfoh_results_csv(c));
  rec.write("dfoh_details.csv", detail::dfoh_details_csv(c));
  rec.write("dfoh_poison_links.csv", detail::dfoh_poison_links_csv(c));
  rec.write("dfoh_success_hist.csv", detail::dfoh_success_hist_csv(c));
  rec.write("dfoh_links_hist.csv", detail::dfoh_links_hist_csv(c, cfg.dfoh_attack.budget));
  if (result) *result = std::move(c);
  return rec.finish();
}

// ---------------------------------------------------------------------------
// BEAM pollution campaign
// ---------------------------------------------------------------------------

/// Public route-change stream and hijack candidates the BEAM experiment
/// runs on. Legitimate changes come from single-link failures; hijacks are
/// Type-1 forged-origin route changes seen at monitors.
struct BeamScenario {
  std::vector<RouteChange> warmup;    ///< window [0, W)
  std::vector<RouteChange> baseline;  ///< window [W, 2W)
  std::vector<RouteChange> hijacks;
  std::int64_t window = 3600;
  std::int64_t boundary() const { return 2 * window; }
};

inline std::vector<RouteChange> failure_changes(const World& w, std::size_t count, std::uint64_t seed) {
  std::vector<RouteChange> out;
  if (w.events.empty()) return out;
  Rng rng(seed);
  const std::size_t max_attempts = 50 * count + 100;
  for (std::size_t attempt = 0; out.size() < count && attempt < max_attempts; ++attempt) {
    const auto& e = w.events[uniform_index(rng, w.events.size())];
    const auto& p = e.announcement.as_path;
    if (p.size() < 2) continue;
    const auto i = uniform_index(rng, p.size() - 1);
    PropagationOptions opt;
    opt.failed_links.insert(AsLink::between(p[i], p[i + 1]));
    const Asn origin = p.back();
    const auto& prefix = e.announcement.prefix;
    const auto rib = propagate(w.graph, {{prefix, {origin}, origin}}, w.roas, w.rov_ases, opt);
    auto q = rib.path(e.monitor, prefix);
    if (q.empty() || q == p) continue;
    out.push_back({prefix, p, std::move(q), 0});
  }
  return out;
}

inline std::vector<RouteChange> hijack_changes(const World& w, std::size_t count, std::uint64_t seed) {
  std::vector<RouteChange> out;
  const auto& nodes = w.graph.nodes();
  if (nodes.size() < 2) return out;
  Rng rng(seed);
  const std::size_t max_attempts = 50 * count + 100;
  for (std::size_t attempt = 0; out.size() < count && attempt < max_attempts; ++attempt) {
    const Asn h = nodes[uniform_index(rng, nodes.size())];
    const Asn v = nodes[uniform_index(rng, nodes.size())];
    if (h == v || w.kb.find(AsLink::between(h, v))) continue;
    const auto& prefix = w.prefix_of.at(v);
    const auto hij = propagate(w.graph, hijack_announcements(v, h, HijackMode::Type1, prefix), w.roas, w.rov_ases);
    std::vector<std::pair<AsPath, AsPath>> switched;
    for (const auto m : w.monitors) {
      auto q = hij.path(m, prefix);
      if (q.size() < 2 || q[q.size() - 2] != h) continue;
      auto p = w.rib.path(m, prefix);
      if (p.empty()) continue;
      switched.push_back({std::move(p), std::move(q)});
    }
    if (switched.empty()) continue;
    auto& pick = switched[uniform_index(rng, switched.size())];
    out.push_back({prefix, std::move(pick.first), std::move(pick.second), 0});
  }
  return out;
}

inline BeamScenario build_beam_scenario(const World& w, const ExperimentConfig& cfg) {
  BeamScenario s;
  s.window = cfg.beam.threshold.window_seconds;
  const auto n = cfg.beam.changes_per_window;
  auto pool = failure_changes(w, 2 * n, derive_seed(cfg.seed, "beam-changes"));
  Rng rng(derive_seed(cfg.seed, "beam-times"));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto& c = pool[i];
    const bool warm = i % 2 == 0;
    c.time = (warm ? 0 : s.window) + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(s.window)));
    (warm ? s.warmup : s.baseline).push_back(std::move(c));
  }
  auto by_time = [](const RouteChange& a, const RouteChange& b) { return a.time < b.time; };
  std::stable_sort(s.warmup.begin(), s.warmup.end(), by_time);
  std::stable_sort(s.baseline.begin(), s.baseline.end(), by_time);
  s.hijacks = hijack_changes(w, cfg.beam.hijack_candidates, derive_seed(cfg.seed, "beam-hijacks"));
  for (auto& h : s.hijacks) h.time = s.boundary();
  return s;
}

struct BeamRow {
  Asn attacker;
  std::size_t n_distinct = 0;     ///< requested
  std::size_t planned = 0;        ///< distinct announcements found in band
  std::size_t events = 0;         ///< after amplification
  PollutionResult result;
  std::string status = "ok";      ///< ok | partial | infeasible
};

struct BeamCampaign {
  std::vector<Asn> attackers;
  std::vector<BeamRow> rows;  ///< ordered by (attacker, n_distinct)
  std::vector<std::pair<RouteChange, Detection>> baseline_log;
};

inline BeamCampaign run_beam_rows(const World& w, const EmbeddingTable& emb, const BeamScenario& s,
                                  const ExperimentConfig& cfg, int jobs = 1) {
  BeamCampaign c;
  const auto& bc = cfg.beam_attack;
  c.attackers = pick_attackers(w, bc.attackers, bc.n_attackers, cfg.seed, "beam-attackers");
  const OscillationModel model(bc.oscillation_mean, bc.oscillation_std);
  std::vector<std::size_t> sweep = bc.n_distinct;
  const std::size_t max_n = sweep.empty() ? 0 : *std::max_element(sweep.begin(), sweep.end());
  const auto cfg_t = cfg.beam.threshold;

  // the threshold in force during the evaluation window, as any observer
  // of the public stream can compute it
  std::vector<RouteChange> public_events = s.warmup;
  const double theta0 = public_events.empty() ? 0.0
                                              : estimate_beam_threshold(public_events, emb, cfg_t, s.window);

  std::vector<std::vector<BeamRow>> per(c.attackers.size());
  parallel_for(c.attackers.size(), static_cast<std::size_t>(std::max(1, jobs)), [&](std::size_t ai) {
    const Asn a = c.attackers[ai];
    std::optional<PollutionPlan> full;
    try {
      full = plan_threshold_pollution(emb, theta0, a, w.prefix_of.at(a), w.corpus.paths_from(a), max_n, bc.epsilon);
    } catch (const InfeasiblePollutionError&) {
    }
    const auto no_pollution = evaluate_pollution(emb, cfg_t, s.warmup, s.baseline, {}, s.hijacks, s.boundary());
    for (const auto n : sweep) {
      BeamRow row{a, n, 0, 0, no_pollution, "ok"};
      if (!full && n > 0) {
        row.status = "infeasible";
      } else if (n > 0 && full->announcements.empty()) {
        row.status = "none_in_band";
      } else if (n > 0) {
        PollutionPlan plan = *full;
        if (plan.announcements.size() > n) plan.announcements.erase(plan.announcements.begin() + static_cast<std::ptrdiff_t>(n), plan.announcements.end());
        plan.n_distinct = plan.announcements.size();
        plan.partial = plan.n_distinct < n;
        row.planned = plan.n_distinct;
        if (plan.partial) row.status = "partial";
        const auto events = amplify(plan, model, derive_seed(derive_seed(cfg.seed, "amplify"), a.value()), s.window,
                                    s.window);
        row.events = events.size();
        row.result = evaluate_pollution(emb, cfg_t, s.warmup, s.baseline, events, s.hijacks, s.boundary());
      }
      per[ai].push_back(row);
    }
  });
  for (auto& v : per) {
    for (auto& r : v) c.rows.push_back(std::move(r));
  }
  // defender's own score log over the unpolluted stream
  ThresholdState st(cfg_t);
  for (const auto* part : {&s.warmup, &s.baseline}) {
    for (const auto& ch : *part) c.baseline_log.push_back({ch, detect_change(emb, st, ch)});
  }
  return c;
}

namespace detail {

inline std::string beam_results_csv(const BeamCampaign& c) {
  std::ostringstream out;
  out << "attacker,n_distinct,theta_before,theta_after,undetected_before,undetected_after\n";
  for (const auto& r : c.rows) {
    out << r.attacker << ',' << r.n_distinct << ',' << fmt(r.result.theta_before) << ',' << fmt(r.result.theta_after)
        << ',' << fmt(r.result.undetected_before) << ',' << fmt(r.result.undetected_after) << '\n';
  }
  return out.str();
}

inline std::string beam_details_csv(const BeamCampaign& c) {
  std::ostringstream out;
  out << "attacker,n_distinct,planned,events,status\n";
  for (const auto& r : c.rows) {
    out << r.attacker << ',' << r.n_distinct << ',' << r.planned << ',' << r.events << ',' << r.status << '\n';
  }
  return out.str();
}

inline std::string score_log_csv(const std::vector<std::pair<RouteChange, Detection>>& log) {
  std::ostringstream out;
  write_score_log_header(out);
  for (const auto& [c, d] : log) write_score_log_row(out, c, d);
  return out.str();
}

}  // namespace detail

inline ResultBundle run_beam_campaign(const ExperimentConfig& cfg, const std::filesystem::path& out, int jobs = 1,
                                      BeamCampaign* result = nullptr) {
  RunRecorder rec(out, "attack-beam", cfg);
  BeamCampaign c;
  if (cfg.beam_attack.n_attackers > 0 || !cfg.beam_attack.attackers.empty()) {
    const auto w = build_world(cfg);
    const auto emb = train_defender_embedding(*w, cfg);
    const auto s = build_beam_scenario(*w, cfg);
    c = run_beam_rows(*w, emb, s, cfg, jobs);
  }
  rec.write("beam_results.csv", detail::beam_results_csv(c));
  rec.write("beam_details.csv", detail::beam_details_csv(c));
  rec.write("beam_score_log.csv", detail::score_log_csv(c.baseline_log));
  if (result) *result = std::move(c);
  return rec.finish();
}

// ---------------------------------------------------------------------------
// Private-monitor sweep
// ---------------------------------------------------------------------------

struct MonitorRow {
  MonitorStrategy strategy;
  std::size_t m = 0;
  std::size_t trial = 0;
  double rate = 0;
};

/// Reads poison links from a dfoh_poison_links.csv file.
inline std::vector<PoisonEdge> read_poison_links(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("poison traces not found at " + path.string() + "; run attack-dfoh first");
  std::string line;
  std::size_t lineno = 0;
  std::vector<PoisonEdge> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || detail::trim(line).empty()) continue;
    const auto f = detail::split(detail::trim(line), ',');
    if (f.size() != 8) throw ParseError(lineno, "expected 8 poison-link fields");
    out.push_back({parse_asn(f[3]), parse_asn(f[4])});
  }
  return out;
}

/// Detection rate per (strategy, m, trial). Random sets for one trial are
/// nested in m; best-case sets are deterministic and repeat across trials.
inline std::vector<MonitorRow> run_monitor_rows(const AsGraph& graph, const std::vector<PoisonEdge>& links,
                                                const ExperimentConfig& cfg, int jobs = 1) {
  if (links.empty()) throw DependencyError("the poisoning campaign produced no poison links");
  const auto& sc = cfg.monitor_sweep;
  std::vector<std::size_t> grid = sc.grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<MonitorRow> rows;
  for (const auto strategy : sc.strategies) {
    std::vector<std::vector<MonitorRow>> per(sc.trials);
    std::map<std::size_t, double> best;
    if (strategy == MonitorStrategy::BestCase) {
      for (const auto m : grid) best[m] = detection_rate(links, select_monitors_best_case(links, m));
    }
    parallel_for(sc.trials, static_cast<std::size_t>(std::max(1, jobs)), [&](std::size_t t) {
      for (const auto m : grid) {
        double r;
        if (strategy == MonitorStrategy::BestCase) {
          r = best.at(m);
        } else {
          r = detection_rate(links, select_monitors_random(graph, m, derive_seed(derive_seed(cfg.seed, "sweep"), t)));
        }
        per[t].push_back({strategy, m, t, r});
      }
    });
    // canonical order: m ascending, then trial
    for (const auto m : grid) {
      for (std::size_t t = 0; t < sc.trials; ++t) {
        for (const auto& r : per[t]) {
          if (r.m == m) rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

namespace detail {

inline std::string monitors_csv(const std::vector<MonitorRow>& rows) {
  std::ostringstream out;
  out << "strategy,m,trial,detection_rate\n";
  for (const auto& r : rows) out << to_string(r.strategy) << ',' << r.m << ',' << r.trial << ',' << fmt(r.rate) << '\n';
  return out.str();
}

}  // namespace detail

inline ResultBundle run_monitor_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out, int jobs = 1,
                                      std::vector<MonitorRow>* result = nullptr) {
  const auto traces = cfg.monitor_sweep.traces.empty() ? out / "dfoh_poison_links.csv"
                                                       : std::filesystem::path(cfg.monitor_sweep.traces);
  const auto links = read_poison_links(traces);
  RunRecorder rec(out, "eval-monitors", cfg);
  AsGraph graph;
  if (!cfg.topology.relationships_file.empty()) {
    std::istringstream in(read_file(cfg.topology.relationships_file));
    graph = parse_relationships(in);
  } else {
    graph = generate_synthetic_topology(cfg.topology.synthetic, derive_seed(cfg.seed, "topology"));
  }
  auto rows = run_monitor_rows(graph, links, cfg, jobs);
  rec.write("monitors.csv", detail::monitors_csv(rows));
  if (result) *result = std::move(rows);
  return rec.finish();
}

// ---------------------------------------------------------------------------
// Standalone stages and the summary report
// ---------------------------------------------------------------------------

inline ResultBundle run_gen_topology(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  RunRecorder rec(out, "gen-topology", cfg);
  const auto w = build_world(cfg);
  rec.write("relationships.txt", serialize_relationships(w->graph));
  rec.write("metadata.json", serialize_metadata(w->metadata));
  std::ostringstream mon;
  mon << "monitor\n";
  for (const auto m : w->monitors) mon << m << '\n';
  rec.write("monitors_public.csv", mon.str());
  return rec.finish();
}

inline ResultBundle run_train_dfoh(const ExperimentConfig& cfg, const std::filesystem::path& out, int jobs = 1) {
  RunRecorder rec(out, "train-dfoh", cfg);
  const auto w = build_world(cfg);
  const auto forest = train_defender(*w, cfg, jobs);
  rec.write("dfoh_forest.json", forest->serialize());
  std::ostringstream kb;
  w->kb.write_snapshot(kb);
  rec.write("dfoh_kb.txt", kb.str());
  std::ostringstream imp;
  imp << "category,importance\n";
  for (const auto& [cat, v] : feature_importances(*forest)) imp << to_string(cat) << ',' << detail::fmt(v) << '\n';
  rec.write("dfoh_importances.csv", imp.str());
  return rec.finish();
}

inline ResultBundle run_train_beam(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  RunRecorder rec(out, "train-beam", cfg);
  const auto w = build_world(cfg);
  EmbeddingReport report;
  const auto emb = train_defender_embedding(*w, cfg, &report);
  rec.write("beam_embedding.txt", emb.serialize());
  const auto s = build_beam_scenario(*w, cfg);
  ThresholdState st(cfg.beam.threshold);
  std::vector<std::pair<RouteChange, Detection>> log;
  for (const auto* part : {&s.warmup, &s.baseline}) {
    for (const auto& ch : *part) log.push_back({ch, detect_change(emb, st, ch)});
  }
  rec.write("beam_score_log.csv", detail::score_log_csv(log));
  const nlohmann::json rep = {{"final_loss", report.final_loss}, {"hierarchy_satisfied", report.hierarchy_satisfied}};
  rec.write("beam_training.json", rep.dump(2) + "\n");
  return rec.finish();
}

namespace detail {

/// Rows of a headed CSV as field vectors (header dropped; stops at a blank line).
inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) break;
    auto f = split(trim(line), ',');
    rows.emplace_back(f.begin(), f.end());
  }
  return rows;
}

inline double to_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ParseError("invalid number '" + s + "'");
  }
}

}  // namespace detail

/// Summarises whichever campaign outputs exist in `dir` into report.json.
inline nlohmann::json build_report(const std::filesystem::path& dir) {
  nlohmann::json rep = nlohmann::json::object();
  if (const auto p = dir / "dfoh_results.csv"; std::filesystem::exists(p)) {
    std::vector<double> before, after;
    std::size_t evaded = 0, improved = 0, worsened = 0, zero = 0, short_ = 0;
    for (const auto& r : detail::read_csv_rows(p)) {
      if (r.size() != 6) throw ParseError("malformed dfoh_results row");
      const bool ev = r[2] == "1";
      const auto links = std::stoul(r[3]);
      const double b = detail::to_double(r[4]), a = detail::to_double(r[5]);
      before.push_back(b);
      after.push_back(a);
      evaded += ev;
      improved += a < b;
      worsened += a > b;
      if (ev && links == 0) ++zero;
      if (ev && links <= 2) ++short_;
    }
    const auto n = before.size();
    auto frac = [](std::size_t x, std::size_t d) { return d ? static_cast<double>(x) / static_cast<double>(d) : 0.0; };
    rep["dfoh"] = {{"pairs", n},
                   {"evasion_rate", frac(evaded, n)},
                   {"median_suspicion_before", n ? median(before) : 0.0},
                   {"median_suspicion_after", n ? median(after) : 0.0},
                   {"pairs_improved", improved},
                   {"pairs_worsened", worsened},
                   {"evading_with_zero_links", frac(zero, evaded)},
                   {"evading_with_at_most_two_links", frac(short_, evaded)}};
  }
  if (const auto p = dir / "beam_results.csv"; std::filesystem::exists(p)) {
    std::map<std::size_t, std::array<double, 5>> by_n;  // theta_b, theta_a, und_b, und_a, count
    for (const auto& r : detail::read_csv_rows(p)) {
      if (r.size() != 6) throw ParseError("malformed beam_results row");
      auto& e = by_n[std::stoul(r[1])];
      for (int i = 0; i < 4; ++i) e[i] += detail::to_double(r[2 + i]);
      e[4] += 1;
    }
    auto rows = nlohmann::json::array();
    for (const auto& [n, e] : by_n) {
      rows.push_back({{"n_distinct", n},
                      {"mean_theta_before", e[0] / e[4]},
                      {"mean_theta_after", e[1] / e[4]},
                      {"mean_undetected_before", e[2] / e[4]},
                      {"mean_undetected_after", e[3] / e[4]}});
    }
    rep["beam"] = rows;
  }
  if (const auto p = dir / "monitors.csv"; std::filesystem::exists(p)) {
    std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> acc;
    for (const auto& r : detail::read_csv_rows(p)) {
      if (r.size() != 4) throw ParseError("malformed monitors row");
      auto& e = acc[{r[0], std::stoul(r[1])}];
      e.first += detail::to_double(r[3]);
      e.second += 1;
    }
    auto rows = nlohmann::json::array();
    for (const auto& [k, e] : acc) rows.push_back({{"strategy", k.first}, {"m", k.second}, {"mean_detection_rate", e.first / e.second}});
    rep["monitors"] = rows;
  }
  if (rep.empty()) throw DependencyError("no campaign outputs found in " + dir.string());
  return rep;
}

}  // namespace bgpoison
