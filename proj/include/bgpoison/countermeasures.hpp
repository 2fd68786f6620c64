#pragma once

// Private-monitor countermeasure: where to place monitors and how many
// poison links they would have exposed.

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "bgpoison/core.hpp"
#include "bgpoison/random.hpp"
#include "bgpoison/topology.hpp"

namespace bgpoison {

enum class MonitorStrategy { Random, BestCase };

inline std::string_view to_string(MonitorStrategy s) { return s == MonitorStrategy::Random ? "random" : "best_case"; }

struct MonitorDeployment {
  std::set<Asn> monitors;
  MonitorStrategy strategy = MonitorStrategy::Random;
  std::size_t m = 0;
};

/// A poison link (announcing AS, forged origin).
struct PoisonEdge {
  Asn from;
  Asn forged_origin;

  friend auto operator<=>(const PoisonEdge&, const PoisonEdge&) = default;
};

/// Uniform sample of min(m, |pool|) ASes without replacement. The pool is
/// all graph nodes minus `excluded`.
inline MonitorDeployment select_monitors_random(const AsGraph& graph, std::size_t m, std::uint64_t seed,
                                                const std::set<Asn>& excluded = {}) {
  if (m < 1) throw std::invalid_argument("need at least one monitor");
  std::vector<Asn> pool;
  for (const auto a : graph.nodes()) {
    if (!excluded.count(a)) pool.push_back(a);
  }
  Rng rng(derive_seed(seed, "random-monitors"));
  const auto picked = sample_without_replacement(std::move(pool), m, rng);
  return {{picked.begin(), picked.end()}, MonitorStrategy::Random, m};
}

/// Greedy max coverage: repeatedly takes the AS that is an endpoint of the
/// most still-undetected links (ties to the lowest ASN), until m monitors are
/// placed or every endpoint is used.
inline MonitorDeployment select_monitors_best_case(const std::vector<PoisonEdge>& traces, std::size_t m,
                                                   const std::set<Asn>& excluded = {}) {
  if (traces.empty()) throw std::invalid_argument("best-case selection needs attack traces");
  MonitorDeployment d{{}, MonitorStrategy::BestCase, m};
  std::vector<char> covered(traces.size(), 0);
  std::map<Asn, std::vector<std::size_t>> incident;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    incident[traces[i].from].push_back(i);
    if (traces[i].forged_origin != traces[i].from) incident[traces[i].forged_origin].push_back(i);
  }
  for (const auto a : excluded) incident.erase(a);
  while (d.monitors.size() < m) {
    std::optional<Asn> best;
    std::size_t best_gain = 0;
    for (const auto& [asn, links] : incident) {
      std::size_t gain = 0;
      for (const auto i : links) gain += covered[i] ? 0 : 1;
      if (gain > best_gain) {  // map order gives the lowest ASN on ties
        best_gain = gain;
        best = asn;
      }
    }
    if (!best) {
      if (incident.empty()) break;
      best = incident.begin()->first;  // everything covered; pad with the lowest ASN
    }
    for (const auto i : incident[*best]) covered[i] = 1;
    d.monitors.insert(*best);
    incident.erase(*best);
  }
  return d;
}

/// Share of poison links with an endpoint inside the monitor set.
inline double detection_rate(const std::vector<PoisonEdge>& links, const std::set<Asn>& monitors) {
  if (links.empty()) throw UndefinedRateError("detection rate of an empty link list");
  std::size_t hit = 0;
  for (const auto& l : links) hit += monitors.count(l.from) || monitors.count(l.forged_origin) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(links.size());
}

inline double detection_rate(const std::vector<PoisonEdge>& links, const MonitorDeployment& d) {
  return detection_rate(links, d.monitors);
}

}  // namespace bgpoison
