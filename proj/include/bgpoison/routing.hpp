#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "core.hpp"
#include "topology.hpp"

namespace bgpoison {

/// A BGP route. `as_path` is receiver-first and origin-last; `sender` is the
/// neighbor the route was learned from, or the injecting AS itself.
struct Announcement {
  Prefix prefix;
  AsPath as_path;
  Asn sender;

  Asn origin() const { return as_path.back(); }

  friend bool operator==(const Announcement&, const Announcement&) = default;
};

enum class RovState { Valid, Invalid, NotFound };

/// Route origin authorizations. An entry authorizes its origins for exactly
/// its own prefix length (max-length equal to length).
class RoaTable {
 public:
  void add(const Prefix& prefix, Asn origin) { entries_[prefix].insert(origin); }

  void merge(const RoaTable& other) {
    for (const auto& [p, origins] : other.entries_) entries_[p].insert(origins.begin(), origins.end());
  }

  bool empty() const noexcept { return entries_.empty(); }
  const std::map<Prefix, std::set<Asn>>& entries() const noexcept { return entries_; }

  /// Origin validation: Valid when an entry for exactly this prefix lists the
  /// origin, Invalid when some entry covers the prefix but none matches, and
  /// NotFound otherwise.
  RovState validate(const Prefix& prefix, Asn origin) const {
    if (entries_.empty()) return RovState::NotFound;
    bool covered = false;
    for (int len = 0; len <= prefix.length(); ++len) {
      const auto shift = 32 - len;
      const std::uint32_t base = len == 0 ? 0u : (prefix.base() >> shift) << shift;
      const auto it = entries_.find(Prefix(base, len));
      if (it == entries_.end()) continue;
      covered = true;
      if (len == prefix.length() && it->second.count(origin)) return RovState::Valid;
    }
    return covered ? RovState::Invalid : RovState::NotFound;
  }

 private:
  std::map<Prefix, std::set<Asn>> entries_;
};

/// How an AS learned its selected route, in decreasing preference.
enum class LearnedFrom : std::uint8_t { Origin = 0, Customer = 1, Peer = 2, Provider = 3 };

struct PropagationOptions {
  /// Links treated as down for this computation.
  std::set<AsLink> failed_links;
};

/// Selected route per (AS, prefix). Paths are stored as next-hop pointers:
/// an AS's path is itself followed by its next hop's path, ending in the
/// path of an injected announcement.
class RibSnapshot {
 public:
  struct Entry {
    std::int32_t next_hop = -1;  ///< node index; -1 for injected routes
    std::int32_t source = -1;    ///< injected announcement index; -1 when no route
    std::uint16_t length = 0;    ///< AS path length including this AS
    LearnedFrom from = LearnedFrom::Origin;

    bool has_route() const noexcept { return source >= 0; }
  };

  struct PrefixRoutes {
    Prefix prefix;
    std::vector<Entry> entries;
    std::vector<Announcement> injected;
  };

  RibSnapshot() = default;
  explicit RibSnapshot(std::vector<Asn> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<Asn>& nodes() const noexcept { return nodes_; }
  const std::map<Prefix, PrefixRoutes>& tables() const noexcept { return tables_; }

  std::vector<Prefix> prefixes() const {
    std::vector<Prefix> out;
    for (const auto& [p, _] : tables_) out.push_back(p);
    return out;
  }

  std::optional<std::uint32_t> node_index(Asn asn) const {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), asn);
    if (it == nodes_.end() || *it != asn) return std::nullopt;
    return static_cast<std::uint32_t>(it - nodes_.begin());
  }

  const Entry* entry(Asn asn, const Prefix& prefix) const {
    const auto t = tables_.find(prefix);
    const auto i = node_index(asn);
    if (t == tables_.end() || !i) return nullptr;
    const auto& e = t->second.entries[*i];
    return e.has_route() ? &e : nullptr;
  }

  bool has_route(Asn asn, const Prefix& prefix) const { return entry(asn, prefix) != nullptr; }

  /// AS path of the selected route, empty when the AS has none.
  AsPath path(Asn asn, const Prefix& prefix) const {
    const auto t = tables_.find(prefix);
    const auto i = node_index(asn);
    if (t == tables_.end() || !i) return {};
    return path_at(t->second, *i);
  }

  std::optional<Announcement> best(Asn asn, const Prefix& prefix) const {
    const auto* e = entry(asn, prefix);
    if (!e) return std::nullopt;
    auto p = path(asn, prefix);
    const Asn sender = e->next_hop >= 0 ? nodes_[static_cast<std::size_t>(e->next_hop)] : p.front();
    return Announcement{prefix, std::move(p), sender};
  }

  std::optional<LearnedFrom> learned_from(Asn asn, const Prefix& prefix) const {
    const auto* e = entry(asn, prefix);
    if (!e) return std::nullopt;
    return e->from;
  }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tables_) {
      for (const auto& e : t.entries) n += e.has_route() ? 1 : 0;
    }
    return n;
  }

  /// Most specific prefix containing `target` for which `asn` holds a route.
  std::optional<Prefix> forwarding_prefix(Asn asn, const Prefix& target) const {
    std::optional<Prefix> best;
    for (const auto& [p, _] : tables_) {
      if (!p.contains(target)) continue;
      if (has_route(asn, p) && (!best || p.length() > best->length())) best = p;
    }
    return best;
  }

  AsPath path_at(const PrefixRoutes& t, std::uint32_t i) const {
    AsPath out;
    auto cur = static_cast<std::int32_t>(i);
    if (!t.entries[i].has_route()) return out;
    while (t.entries[static_cast<std::size_t>(cur)].next_hop >= 0) {
      out.push_back(nodes_[static_cast<std::size_t>(cur)]);
      cur = t.entries[static_cast<std::size_t>(cur)].next_hop;
    }
    const auto& inj = t.injected[static_cast<std::size_t>(t.entries[static_cast<std::size_t>(cur)].source)];
    out.insert(out.end(), inj.as_path.begin(), inj.as_path.end());
    return out;
  }

  PrefixRoutes& table(const Prefix& prefix) {
    auto [it, inserted] = tables_.try_emplace(prefix, PrefixRoutes{prefix, {}, {}});
    if (inserted) it->second.entries.assign(nodes_.size(), Entry{});
    return it->second;
  }

 private:
  std::vector<Asn> nodes_;
  std::map<Prefix, PrefixRoutes> tables_;
};

namespace detail {

struct PropagationContext {
  const AsGraph& graph;
  const std::vector<char>& rov;
  const PropagationOptions& options;
};

/// Route computation for one prefix under customer > peer > provider
/// preference, then shortest path, then lowest next-hop ASN. Customer
/// routes spread upwards first, then one peer hop, then downwards; this
/// yields the unique stable state of the Gao-Rexford policy.
inline void propagate_prefix(const PropagationContext& ctx, RibSnapshot::PrefixRoutes& t,
                             const std::vector<char>& invalid_source) {
  using Entry = RibSnapshot::Entry;
  const auto& g = ctx.graph;
  const auto n = static_cast<std::uint32_t>(g.size());
  auto& entries = t.entries;
  const bool any_failed = !ctx.options.failed_links.empty();

  auto link_up = [&](std::uint32_t a, std::uint32_t b) {
    return !any_failed || ctx.options.failed_links.count(AsLink::between(g.asn_at(a), g.asn_at(b))) == 0;
  };
  // Whether `x` may accept the route currently selected by `y`.
  auto acceptable = [&](std::uint32_t x, std::uint32_t y) {
    const auto& ey = entries[y];
    if (ctx.rov[x] && invalid_source[static_cast<std::size_t>(ey.source)]) return false;
    const auto xa = g.asn_at(x);
    auto cur = static_cast<std::int32_t>(y);
    while (entries[static_cast<std::size_t>(cur)].next_hop >= 0) {
      if (static_cast<std::uint32_t>(cur) == x) return false;
      cur = entries[static_cast<std::size_t>(cur)].next_hop;
    }
    if (static_cast<std::uint32_t>(cur) == x) return false;
    const auto& inj = t.injected[static_cast<std::size_t>(entries[static_cast<std::size_t>(cur)].source)].as_path;
    return std::find(inj.begin(), inj.end(), xa) == inj.end();
  };
  auto better = [](const Entry& cand, const Entry& cur) {
    if (!cur.has_route()) return true;
    if (cand.length != cur.length) return cand.length < cur.length;
    return cand.next_hop < cur.next_hop;
  };

  std::vector<std::vector<std::uint32_t>> buckets;
  auto push = [&](std::size_t len, std::uint32_t x) {
    if (buckets.size() <= len) buckets.resize(len + 1);
    buckets[len].push_back(x);
  };
  std::vector<char> final(n, 0);
  std::vector<Entry> tentative(n);

  // Up: customer-learned routes.
  for (std::uint32_t i = 0; i < n; ++i) {
    if (entries[i].has_route()) {
      final[i] = 1;
      push(entries[i].length, i);
    }
  }
  for (std::size_t len = 0; len < buckets.size(); ++len) {
    for (std::size_t k = 0; k < buckets[len].size(); ++k) {
      const auto y = buckets[len][k];
      if (!final[y]) {
        if (tentative[y].length != len) continue;
        entries[y] = tentative[y];
        final[y] = 1;
      } else if (entries[y].length != len) {
        continue;
      }
      for (const auto x : g.providers_of(y)) {
        if (final[x] || !link_up(x, y) || !acceptable(x, y)) continue;
        Entry cand{static_cast<std::int32_t>(y), entries[y].source, static_cast<std::uint16_t>(len + 1),
                   LearnedFrom::Customer};
        if (better(cand, tentative[x])) {
          tentative[x] = cand;
          push(len + 1, x);
        }
      }
    }
  }

  // Peer: one hop from ASes holding origin or customer routes.
  std::vector<Entry> peer_routes(n);
  for (std::uint32_t x = 0; x < n; ++x) {
    if (entries[x].has_route()) continue;
    for (const auto y : g.peers_of(x)) {
      const auto& ey = entries[y];
      if (!ey.has_route() || ey.from == LearnedFrom::Peer || ey.from == LearnedFrom::Provider) continue;
      if (!link_up(x, y) || !acceptable(x, y)) continue;
      Entry cand{static_cast<std::int32_t>(y), ey.source, static_cast<std::uint16_t>(ey.length + 1),
                 LearnedFrom::Peer};
      if (better(cand, peer_routes[x])) peer_routes[x] = cand;
    }
  }
  for (std::uint32_t x = 0; x < n; ++x) {
    if (peer_routes[x].has_route()) entries[x] = peer_routes[x];
  }

  // Down: provider-learned routes for everyone still without a route.
  buckets.clear();
  std::fill(final.begin(), final.end(), 0);
  std::fill(tentative.begin(), tentative.end(), Entry{});
  for (std::uint32_t i = 0; i < n; ++i) {
    if (entries[i].has_route()) {
      final[i] = 1;
      push(entries[i].length, i);
    }
  }
  for (std::size_t len = 0; len < buckets.size(); ++len) {
    for (std::size_t k = 0; k < buckets[len].size(); ++k) {
      const auto y = buckets[len][k];
      if (!final[y]) {
        if (tentative[y].length != len) continue;
        entries[y] = tentative[y];
        final[y] = 1;
      } else if (entries[y].length != len) {
        continue;
      }
      for (const auto x : g.customers_of(y)) {
        if (final[x] || !link_up(x, y) || !acceptable(x, y)) continue;
        Entry cand{static_cast<std::int32_t>(y), entries[y].source, static_cast<std::uint16_t>(len + 1),
                   LearnedFrom::Provider};
        if (better(cand, tentative[x])) {
          tentative[x] = cand;
          push(len + 1, x);
        }
      }
    }
  }
}

}  // namespace detail

/// Computes the selected route of every AS for every announced prefix.
///
/// Each announcement is injected at `sender` (which must be the first AS of
/// its path). ASes in `rov_ases` drop routes whose origin validates Invalid.
inline RibSnapshot propagate(const AsGraph& graph, const std::vector<Announcement>& announcements,
                             const RoaTable& roas, const std::set<Asn>& rov_ases,
                             const PropagationOptions& options = {}) {
  RibSnapshot snap(graph.nodes());
  std::vector<char> rov(graph.size(), 0);
  for (const auto asn : rov_ases) {
    if (const auto i = graph.find(asn)) rov[*i] = 1;
  }
  std::map<Prefix, std::vector<const Announcement*>> by_prefix;
  for (const auto& a : announcements) {
    if (a.as_path.empty()) throw std::invalid_argument("announcement with empty AS path");
    if (!graph.contains(a.origin())) {
      throw UnknownOriginError("origin AS " + to_string(a.origin()) + " not in graph");
    }
    if (!graph.contains(a.sender)) throw UnknownOriginError("sender AS " + to_string(a.sender) + " not in graph");
    if (a.as_path.front() != a.sender) {
      throw std::invalid_argument("announcement path must start at its sender " + to_string(a.sender));
    }
    std::set<Asn> seen(a.as_path.begin(), a.as_path.end());
    if (seen.size() != a.as_path.size()) throw std::invalid_argument("announcement path has a loop");
    by_prefix[a.prefix].push_back(&a);
  }
  const detail::PropagationContext ctx{graph, rov, options};
  for (const auto& [prefix, anns] : by_prefix) {
    auto& t = snap.table(prefix);
    std::vector<char> invalid;
    for (const auto* a : anns) {
      const auto s = graph.index(a->sender);
      if (t.entries[s].has_route()) {
        throw std::invalid_argument("AS " + to_string(a->sender) + " injects " + prefix.to_string() + " twice");
      }
      t.entries[s] = RibSnapshot::Entry{-1, static_cast<std::int32_t>(t.injected.size()),
                                        static_cast<std::uint16_t>(a->as_path.size()), LearnedFrom::Origin};
      t.injected.push_back(*a);
      invalid.push_back(roas.validate(prefix, a->origin()) == RovState::Invalid ? 1 : 0);
    }
    detail::propagate_prefix(ctx, t, invalid);
  }
  return snap;
}

// ---------------------------------------------------------------------------
// Observation
// ---------------------------------------------------------------------------

/// A route seen at a monitor. The path starts with the monitor itself.
struct RouteEvent {
  std::int64_t time = 0;
  Asn monitor;
  Announcement announcement;

  friend bool operator==(const RouteEvent&, const RouteEvent&) = default;
};

/// One event per (monitor, prefix) with a route, ordered by (monitor, prefix).
inline std::vector<RouteEvent> observe(const RibSnapshot& rib, const std::set<Asn>& monitors, std::int64_t time) {
  std::vector<RouteEvent> out;
  for (const auto m : monitors) {
    const auto idx = rib.node_index(m);
    if (!idx) continue;
    for (const auto& [prefix, t] : rib.tables()) {
      if (!t.entries[*idx].has_route()) continue;
      auto ann = rib.best(m, prefix);
      out.push_back(RouteEvent{time, m, std::move(*ann)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hijacks and poisoning announcements
// ---------------------------------------------------------------------------

enum class HijackMode { Type0, Type1 };

struct HijackOutcome {
  double attacker_share = 0;        ///< fraction of ASes whose route now leads to the attacker
  std::vector<AsPath> monitor_paths;  ///< contested-prefix paths at the monitors, by monitor
};

/// Fraction of ASes (other than attacker and victim) routed through the
/// attacker for addresses in `prefix`, among those that reach the prefix in
/// the baseline. Uses longest-prefix match over the hijack RIB.
inline double attacker_share(const RibSnapshot& baseline, const RibSnapshot& hijacked, Asn attacker, Asn victim,
                             const Prefix& prefix) {
  std::size_t reach = 0;
  std::size_t captured = 0;
  for (const auto asn : baseline.nodes()) {
    if (asn == attacker || asn == victim) continue;
    if (!baseline.forwarding_prefix(asn, prefix)) continue;
    ++reach;
    const auto fp = hijacked.forwarding_prefix(asn, prefix);
    if (!fp) continue;
    const auto path = hijacked.path(asn, *fp);
    if (std::find(path.begin(), path.end(), attacker) != path.end()) ++captured;
  }
  return reach == 0 ? 0.0 : static_cast<double>(captured) / static_cast<double>(reach);
}

inline std::vector<Announcement> hijack_announcements(Asn victim, Asn attacker, HijackMode mode, const Prefix& prefix) {
  std::vector<Announcement> anns{{prefix, {victim}, victim}};
  if (mode == HijackMode::Type0) {
    anns.push_back({prefix, {attacker}, attacker});
  } else {
    anns.push_back({prefix, {attacker, victim}, attacker});
  }
  return anns;
}

/// Injects the attacker's announcement next to the victim's legitimate one:
/// Type0 claims the prefix as the attacker's own, Type1 forges the victim
/// as origin behind the attacker.
inline HijackOutcome simulate_hijack(const AsGraph& graph, const RoaTable& roas, const std::set<Asn>& rov_ases,
                                     Asn victim, Asn attacker, HijackMode mode, const Prefix& prefix,
                                     const std::set<Asn>& monitors = {}) {
  if (victim == attacker) throw InvalidScenarioError("attacker and victim are the same AS");
  const auto baseline = propagate(graph, {{prefix, {victim}, victim}}, roas, rov_ases);
  const auto hijacked = propagate(graph, hijack_announcements(victim, attacker, mode, prefix), roas, rov_ases);
  HijackOutcome out;
  out.attacker_share = attacker_share(baseline, hijacked, attacker, victim, prefix);
  for (const auto m : monitors) {
    auto p = hijacked.path(m, prefix);
    if (!p.empty()) out.monitor_paths.push_back(std::move(p));
  }
  return out;
}

enum class PoisonRoaMode { NoRoa, CreateRoa };

struct PoisonAnnouncement {
  Announcement announcement;
  RoaTable roa_delta;
};

/// First sub-prefix of `parent` not in `used`, shortest lengths first.
inline Prefix fresh_subprefix(const Prefix& parent, const std::set<Prefix>& used = {}) {
  if (parent.length() >= 32) throw NoSubprefixError("no sub-prefix of " + parent.to_string());
  for (int len = parent.length() + 1; len <= 32; ++len) {
    const auto span_bits = len - parent.length();
    if (span_bits > 20) break;
    const std::uint32_t count = std::uint32_t{1} << span_bits;
    const auto step = len == 32 ? 1u : (std::uint32_t{1} << (32 - len));
    for (std::uint32_t k = 0; k < count; ++k) {
      const Prefix p(parent.base() + k * step, len);
      if (!used.count(p)) return p;
    }
  }
  throw NoSubprefixError("all sub-prefixes of " + parent.to_string() + " are in use");
}

/// Route for a fresh sub-prefix of the attacker's own prefix with the forged
/// origin appended behind the attacker, plus the ROA change that keeps it
/// from validating Invalid.
inline PoisonAnnouncement craft_poison_announcement(Asn attacker, Asn forged_origin, const Prefix& parent_prefix,
                                                    PoisonRoaMode mode = PoisonRoaMode::NoRoa,
                                                    const std::set<Prefix>& used = {}) {
  if (attacker == forged_origin) throw InvalidScenarioError("forged origin equals attacker");
  const auto sub = fresh_subprefix(parent_prefix, used);
  PoisonAnnouncement out{{sub, {attacker, forged_origin}, attacker}, {}};
  if (mode == PoisonRoaMode::CreateRoa) out.roa_delta.add(sub, forged_origin);
  return out;
}

// ---------------------------------------------------------------------------
// Route dump format: time|monitor_asn|prefix|asn asn asn
// ---------------------------------------------------------------------------

inline void write_route_dump(const std::vector<RouteEvent>& events, std::ostream& out) {
  for (const auto& e : events) {
    out << e.time << '|' << e.monitor << '|' << e.announcement.prefix << '|'
        << path_to_string(e.announcement.as_path) << '\n';
  }
}

inline std::vector<RouteEvent> read_route_dump(std::istream& in) {
  std::vector<RouteEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto f = detail::split(text, '|');
    if (f.size() != 4) throw ParseError(lineno, "expected 'time|monitor|prefix|path'");
    std::int64_t t = 0;
    if (!detail::parse_int(f[0], t)) throw ParseError(lineno, "invalid time");
    Asn monitor = parse_asn(f[1]);
    Prefix prefix = Prefix::parse(detail::trim(f[2]));
    AsPath path;
    std::istringstream ps{std::string(f[3])};
    std::string tok;
    while (ps >> tok) path.push_back(parse_asn(tok));
    if (path.empty()) throw ParseError(lineno, "empty AS path");
    std::set<Asn> uniq(path.begin(), path.end());
    if (uniq.size() != path.size()) throw ParseError(lineno, "AS path has a loop");
    const Asn sender = path.size() > 1 ? path[1] : path[0];
    out.push_back(RouteEvent{t, monitor, Announcement{prefix, std::move(path), sender}});
  }
  return out;
}

}  // namespace bgpoison
