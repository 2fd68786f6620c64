#pragma once

// DFOH-like forged-origin link detector: a sliding-window knowledge base of
// observed AS links, four categories of link features and a bagged forest.

#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bgpoison/core.hpp"
#include "bgpoison/forest.hpp"
#include "bgpoison/random.hpp"
#include "bgpoison/routing.hpp"
#include "bgpoison/topology.hpp"

namespace bgpoison {

// ---------------------------------------------------------------------------
// Knowledge base
// ---------------------------------------------------------------------------

struct KbEntry {
  int first_seen = 0;
  int last_seen = 0;
  /// bit 0: low seen upstream of high in a path; bit 1: the reverse.
  std::uint8_t dirs = 0;
  std::optional<int> quarantine_release;

  friend bool operator==(const KbEntry&, const KbEntry&) = default;
};

/// Direction bit for a link seen with `upstream` nearer the monitor.
inline std::uint8_t direction_bit(Asn upstream, Asn downstream) { return upstream < downstream ? 1 : 2; }

class KnowledgeBase {
 public:
  explicit KnowledgeBase(int window_days = 300, int day = 0, int quarantine_days = 30)
      : window_(window_days), day_(day), quarantine_days_(quarantine_days) {
    if (window_days < 0) throw std::invalid_argument("window_days must be non-negative");
  }

  int day() const noexcept { return day_; }
  int window_days() const noexcept { return window_; }
  int quarantine_days() const noexcept { return quarantine_days_; }
  const std::map<AsLink, KbEntry>& links() const noexcept { return links_; }
  std::size_t size() const noexcept { return links_.size(); }

  const KbEntry* find(const AsLink& link) const {
    const auto it = links_.find(link);
    return it == links_.end() ? nullptr : &it->second;
  }

  /// Known and usable: present and not in quarantine.
  bool contains(const AsLink& link) const {
    const auto* e = find(link);
    return e && !e->quarantine_release;
  }

  bool quarantined(const AsLink& link) const {
    const auto* e = find(link);
    return e && e->quarantine_release.has_value();
  }

  /// Active neighbors, sorted.
  const std::vector<Asn>& neighbors(Asn asn) const {
    static const std::vector<Asn> none;
    const auto it = adj_.find(asn);
    return it == adj_.end() ? none : it->second;
  }

  std::size_t degree(Asn asn) const { return neighbors(asn).size(); }
  bool has_node(Asn asn) const { return adj_.count(asn) > 0; }

  std::vector<Asn> nodes() const {
    std::vector<Asn> out;
    out.reserve(adj_.size());
    for (const auto& [a, _] : adj_) out.push_back(a);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// The next insertion of this link enters quarantine.
  void declare_provider_link(Asn a, Asn b) { declared_.insert(AsLink::between(a, b)); }
  bool declared(const AsLink& link) const { return declared_.count(link) > 0; }

  /// Records a sighting of `upstream -> downstream` on `day`, inserting the
  /// link when unknown.
  void record(Asn upstream, Asn downstream, int day) {
    const auto link = AsLink::between(upstream, downstream);
    auto it = links_.find(link);
    if (it == links_.end()) {
      KbEntry e{day, day, 0, std::nullopt};
      if (declared_.erase(link)) e.quarantine_release = day + quarantine_days_;
      it = links_.emplace(link, e).first;
      if (!it->second.quarantine_release) attach(link);
    }
    it->second.last_seen = std::max(it->second.last_seen, day);
    it->second.dirs |= direction_bit(upstream, downstream);
  }

  /// Inserts or replaces a link record verbatim.
  void put(const AsLink& link, const KbEntry& entry) {
    if (entry.last_seen < entry.first_seen) throw std::invalid_argument("last_seen before first_seen");
    erase(link);
    links_.emplace(link, entry);
    if (!entry.quarantine_release) attach(link);
  }

  bool erase(const AsLink& link) {
    const auto it = links_.find(link);
    if (it == links_.end()) return false;
    if (!it->second.quarantine_release) detach(link);
    links_.erase(it);
    return true;
  }

  /// Moves the clock forward: evicts links last seen before day - window and
  /// releases quarantines that have expired.
  void advance(int day) {
    if (day < day_) throw std::invalid_argument("knowledge base cannot move backwards in time");
    day_ = day;
    for (auto it = links_.begin(); it != links_.end();) {
      auto& e = it->second;
      if (e.last_seen < day - window_) {
        if (!e.quarantine_release) detach(it->first);
        it = links_.erase(it);
        continue;
      }
      if (e.quarantine_release && *e.quarantine_release <= day) {
        e.quarantine_release.reset();
        attach(it->first);
      }
      ++it;
    }
  }

  void write_snapshot(std::ostream& out) const {
    out << "# window_days=" << window_ << ",day=" << day_ << '\n';
    for (const auto& [l, e] : links_) {
      out << l.low << ',' << l.high << ',' << e.first_seen << ',' << e.last_seen << ',' << int{e.dirs} << ','
          << (e.quarantine_release ? *e.quarantine_release : -1) << '\n';
    }
  }

  std::string snapshot() const {
    std::ostringstream ss;
    write_snapshot(ss);
    return ss.str();
  }

  static KnowledgeBase read_snapshot(std::istream& in, int quarantine_days = 30) {
    KnowledgeBase kb(300, 0, quarantine_days);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto text = detail::trim(line);
      if (text.empty()) continue;
      if (text.front() == '#') {
        for (const auto kv : detail::split(text.substr(1), ',')) {
          const auto parts = detail::split(detail::trim(kv), '=');
          if (parts.size() != 2) continue;
          int v = 0;
          if (!detail::parse_int(parts[1], v)) throw ParseError(lineno, "invalid header value");
          if (detail::trim(parts[0]) == "window_days") kb.window_ = v;
          if (detail::trim(parts[0]) == "day") kb.day_ = v;
        }
        continue;
      }
      const auto f = detail::split(text, ',');
      if (f.size() != 6) throw ParseError(lineno, "expected 'asn,asn,first_seen,last_seen,dir_flags,quarantine_release'");
      const Asn a = parse_asn(f[0]);
      const Asn b = parse_asn(f[1]);
      if (a == b) throw ParseError(lineno, "self-link");
      KbEntry e;
      int dirs = 0, release = 0;
      if (!detail::parse_int(f[2], e.first_seen) || !detail::parse_int(f[3], e.last_seen) ||
          !detail::parse_int(f[4], dirs) || !detail::parse_int(f[5], release) || dirs < 0 || dirs > 3 ||
          e.last_seen < e.first_seen) {
        throw ParseError(lineno, "invalid link record");
      }
      e.dirs = static_cast<std::uint8_t>(dirs);
      if (release >= 0) e.quarantine_release = release;
      kb.put(AsLink::between(a, b), e);
    }
    return kb;
  }

  friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
    return a.window_ == b.window_ && a.day_ == b.day_ && a.links_ == b.links_;
  }

 private:
  void attach(const AsLink& l) {
    auto add = [](std::vector<Asn>& v, Asn x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); };
    add(adj_[l.low], l.high);
    add(adj_[l.high], l.low);
  }

  void detach(const AsLink& l) {
    auto drop = [&](Asn a, Asn x) {
      auto& v = adj_[a];
      const auto it = std::lower_bound(v.begin(), v.end(), x);
      if (it != v.end() && *it == x) v.erase(it);
      if (v.empty()) adj_.erase(a);
    };
    drop(l.low, l.high);
    drop(l.high, l.low);
  }

  int window_;
  int day_;
  int quarantine_days_;
  std::map<AsLink, KbEntry> links_;
  std::unordered_map<Asn, std::vector<Asn>> adj_;
  std::set<AsLink> declared_;
};

/// Links of the event's path that the knowledge base does not (yet) use.
inline std::vector<AsLink> detect_new_links(const KnowledgeBase& kb, const RouteEvent& event, int /*day*/ = 0) {
  std::vector<AsLink> out;
  const auto& p = event.announcement.as_path;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const auto l = AsLink::between(p[i], p[i + 1]);
    if (!kb.contains(l) && std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

/// Refreshes every link of the events' paths at `day`, inserting unknown
/// ones unless listed in `rejected`, then evicts stale links.
inline void update_knowledge_base(KnowledgeBase& kb, const std::vector<RouteEvent>& events, int day,
                                  const std::set<AsLink>& rejected = {}) {
  kb.advance(day);
  for (const auto& e : events) {
    const auto& p = e.announcement.as_path;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      const auto l = AsLink::between(p[i], p[i + 1]);
      if (rejected.count(l) && !kb.find(l)) continue;
      kb.record(p[i], p[i + 1], day);
    }
  }
}

// ---------------------------------------------------------------------------
// Observed route corpus
// ---------------------------------------------------------------------------

/// Distinct monitor paths indexed by origin and by link.
class RouteCorpus {
 public:
  RouteCorpus() = default;

  static RouteCorpus from_events(const std::vector<RouteEvent>& events) {
    RouteCorpus c;
    std::set<AsPath> seen;
    for (const auto& e : events) {
      if (seen.insert(e.announcement.as_path).second) c.add(e.announcement.as_path);
    }
    return c;
  }

  void add(const AsPath& path) {
    if (path.empty()) throw std::invalid_argument("empty path");
    const auto id = static_cast<std::uint32_t>(paths_.size());
    paths_.push_back(path);
    by_origin_[path.back()].push_back(id);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) by_link_[AsLink::between(path[i], path[i + 1])].push_back(id);
  }

  const std::vector<AsPath>& paths() const noexcept { return paths_; }

  /// Observed paths whose origin is `asn`.
  std::vector<AsPath> paths_from(Asn asn) const {
    std::vector<AsPath> out;
    const auto it = by_origin_.find(asn);
    if (it == by_origin_.end()) return out;
    for (const auto id : it->second) out.push_back(paths_[id]);
    return out;
  }

  bool has_origin(Asn asn) const { return by_origin_.count(asn) > 0; }

  const std::vector<std::uint32_t>& paths_through(const AsLink& link) const {
    static const std::vector<std::uint32_t> none;
    const auto it = by_link_.find(link);
    return it == by_link_.end() ? none : it->second;
  }

 private:
  std::vector<AsPath> paths_;
  std::unordered_map<Asn, std::vector<std::uint32_t>> by_origin_;
  std::unordered_map<AsLink, std::vector<std::uint32_t>> by_link_;
};

/// `path` extended with `origin` unless that would create a loop.
inline std::optional<AsPath> extend_path(const AsPath& path, Asn origin) {
  if (std::find(path.begin(), path.end(), origin) != path.end()) return std::nullopt;
  AsPath out = path;
  out.push_back(origin);
  return out;
}

/// Every path of `base` extended with `origin`, skipping loops.
inline std::vector<AsPath> forged_paths(const std::vector<AsPath>& base, Asn origin) {
  std::vector<AsPath> out;
  for (const auto& p : base) {
    if (auto e = extend_path(p, origin)) out.push_back(std::move(*e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

enum class FeatureCategory { Topological, Peering, AsPath, Bidirectionality };

inline constexpr std::array<FeatureCategory, 4> kFeatureCategories = {
    FeatureCategory::Topological, FeatureCategory::Peering, FeatureCategory::AsPath,
    FeatureCategory::Bidirectionality};

inline std::string_view to_string(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::Topological: return "topological";
    case FeatureCategory::Peering: return "peering";
    case FeatureCategory::AsPath: return "aspath";
    case FeatureCategory::Bidirectionality: return "bidirectionality";
  }
  return "?";
}

inline FeatureCategory parse_feature_category(std::string_view s) {
  for (const auto c : kFeatureCategories) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError("unknown feature category '" + std::string(s) + "'");
}

namespace feature {
enum Index : std::size_t {
  DegU,
  DegV,
  CommonNeighbors,
  Jaccard,
  AdamicAdar,
  PrefAttachment,
  SharedIxps,
  SharedFacilities,
  SameCountry,
  NeighborCountryOverlap,
  ValleyFree,
  MaxDegreeGap,
  ConeRatio,
  SeenBothDirections,
  InIrr,
  Count
};
}  // namespace feature

inline constexpr std::array<std::string_view, feature::Count> kFeatureNames = {
    "deg_u",      "deg_v",          "common_neighbors",         "jaccard",         "adamic_adar",
    "pref_attachment", "shared_ixps", "shared_facilities",      "same_country",    "neighbor_country_overlap",
    "valley_free_flag", "max_degree_gap", "cone_ratio",         "seen_both_directions", "in_irr"};

inline constexpr FeatureCategory category_of(std::size_t f) {
  if (f <= feature::PrefAttachment) return FeatureCategory::Topological;
  if (f <= feature::NeighborCountryOverlap) return FeatureCategory::Peering;
  if (f <= feature::ConeRatio) return FeatureCategory::AsPath;
  return FeatureCategory::Bidirectionality;
}

struct FeatureVector {
  std::array<double, feature::Count> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::vector<double> to_vector() const { return {values.begin(), values.end()}; }
};

/// Public inputs shared by defender and attacker. Holds references; the
/// referenced objects must outlive the context.
class DfohContext {
 public:
  DfohContext(const AsGraph& relationships, const MetadataTable& metadata, const RouteCorpus& corpus,
              std::set<AsLink> irr = {})
      : rel_(&relationships), md_(&metadata), corpus_(&corpus), irr_(std::move(irr)),
        cone_(customer_cone_sizes(relationships)) {}

  const AsGraph& relationships() const { return *rel_; }
  const MetadataTable& metadata() const { return *md_; }
  const RouteCorpus& corpus() const { return *corpus_; }
  const std::set<AsLink>& irr() const { return irr_; }

  const AsMetadata* meta(Asn asn) const {
    const auto it = md_->find(asn);
    return it == md_->end() ? nullptr : &it->second;
  }

  std::size_t cone_size(Asn asn) const {
    const auto i = rel_->find(asn);
    return i ? cone_[*i] : 1;
  }

  Hop hop(Asn from, Asn to) const {
    const auto a = rel_->find(from);
    const auto b = rel_->find(to);
    if (!a || !b) return Hop::Unknown;
    const auto r = rel_->role_of(*a, *b);
    if (!r) return Hop::Unknown;
    return *r == NeighborRole::Provider ? Hop::Up : (*r == NeighborRole::Peer ? Hop::Peer : Hop::Down);
  }

 private:
  const AsGraph* rel_;
  const MetadataTable* md_;
  const RouteCorpus* corpus_;
  std::set<AsLink> irr_;
  std::vector<std::uint32_t> cone_;
};

namespace detail {

/// KB neighborhood of `x` with the candidate partner removed.
inline std::vector<Asn> neighbors_without(const KnowledgeBase& kb, Asn x, Asn partner) {
  std::vector<Asn> n = kb.neighbors(x);
  const auto it = std::lower_bound(n.begin(), n.end(), partner);
  if (it != n.end() && *it == partner) n.erase(it);
  return n;
}

inline double country_share(const DfohContext& ctx, const std::vector<Asn>& nbrs, const std::string& country) {
  if (nbrs.empty() || country.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto n : nbrs) {
    const auto* m = ctx.meta(n);
    if (m && m->country == country) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(nbrs.size());
}

/// Link-level features; leaves the per-path ones at zero.
inline FeatureVector link_features(const KnowledgeBase& kb, const DfohContext& ctx, Asn u, Asn v) {
  if (u == v) throw std::invalid_argument("self-link");
  for (const auto x : {u, v}) {
    if (!kb.has_node(x) && !ctx.meta(x) && !ctx.relationships().contains(x)) {
      throw InsufficientDataError("no data for AS " + to_string(x));
    }
  }
  FeatureVector f;
  const auto nu = neighbors_without(kb, u, v);
  const auto nv = neighbors_without(kb, v, u);
  std::vector<Asn> common;
  std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
  const double uni = static_cast<double>(nu.size() + nv.size() - common.size());
  f[feature::DegU] = static_cast<double>(nu.size());
  f[feature::DegV] = static_cast<double>(nv.size());
  f[feature::CommonNeighbors] = static_cast<double>(common.size());
  f[feature::Jaccard] = uni > 0 ? static_cast<double>(common.size()) / uni : 0.0;
  double aa = 0;
  for (const auto w : common) aa += 1.0 / std::log(static_cast<double>(kb.degree(w)));
  f[feature::AdamicAdar] = aa;
  f[feature::PrefAttachment] = static_cast<double>(nu.size() * nv.size());

  const auto* mu = ctx.meta(u);
  const auto* mv = ctx.meta(v);
  if (mu && mv) {
    f[feature::SharedIxps] = static_cast<double>(count_shared(mu->ixps, mv->ixps));
    f[feature::SharedFacilities] = static_cast<double>(count_shared(mu->facilities, mv->facilities));
    f[feature::SameCountry] = mu->has_country() && mu->country == mv->country ? 1.0 : 0.0;
  }
  f[feature::NeighborCountryOverlap] = 0.5 * country_share(ctx, nu, mv ? mv->country : std::string{}) +
                                       0.5 * country_share(ctx, nv, mu ? mu->country : std::string{});
  const double cu = static_cast<double>(ctx.cone_size(u));
  const double cv = static_cast<double>(ctx.cone_size(v));
  f[feature::ConeRatio] = std::min(cu, cv) / std::max(cu, cv);
  f[feature::InIrr] = ctx.irr().count(AsLink::between(u, v)) ? 1.0 : 0.0;
  return f;
}

/// Position of the link in `path` (index of its first endpoint), if present.
inline std::optional<std::size_t> link_position(const AsPath& path, Asn u, Asn v) {
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if ((path[i] == u && path[i + 1] == v) || (path[i] == v && path[i + 1] == u)) return i;
  }
  return std::nullopt;
}

/// Prefix of `path` ending at the link's downstream endpoint.
inline AsPath truncate_at_link(const AsPath& path, Asn u, Asn v) {
  const auto pos = link_position(path, u, v);
  if (!pos) return path;
  return AsPath(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(*pos + 2));
}

inline bool path_valley_free(const DfohContext& ctx, const AsPath& path) {
  std::vector<Hop> hops;
  hops.reserve(path.size());
  for (std::size_t i = 0; i + 1 < path.size(); ++i) hops.push_back(ctx.hop(path[i], path[i + 1]));
  return valley_free_hops(hops);
}

inline double max_degree_gap(const KnowledgeBase& kb, const AsPath& path, Asn u, Asn v) {
  const bool present = kb.contains(AsLink::between(u, v));
  auto deg = [&](Asn x) {
    double d = static_cast<double>(kb.degree(x));
    if (present && (x == u || x == v)) d -= 1;
    return d;
  };
  double gap = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    gap = std::max(gap, std::abs(std::log1p(deg(path[i])) - std::log1p(deg(path[i + 1]))));
  }
  return gap;
}

inline bool seen_both(const KnowledgeBase& kb, const std::vector<AsPath>& paths, Asn u, Asn v) {
  std::uint8_t dirs = 0;
  if (const auto* e = kb.find(AsLink::between(u, v))) dirs = e->dirs;
  for (const auto& p : paths) {
    if (const auto pos = link_position(p, u, v)) dirs |= direction_bit(p[*pos], p[*pos + 1]);
  }
  return dirs == 3;
}

inline void fill_path_features(FeatureVector& f, const KnowledgeBase& kb, const DfohContext& ctx,
                               const AsPath& path, Asn u, Asn v) {
  const auto cut = truncate_at_link(path, u, v);
  f[feature::ValleyFree] = path_valley_free(ctx, cut) ? 1.0 : 0.0;
  f[feature::MaxDegreeGap] = max_degree_gap(kb, cut, u, v);
}

}  // namespace detail

/// Features of the candidate link `u -> v` (u upstream, v on the origin
/// side). Topological features ignore the link itself, so a known link
/// scores as if it were new. Path features aggregate over `observed_paths`:
/// the valley-free flag is the valley-free fraction and the degree gap the
/// maximum.
inline FeatureVector compute_features(const KnowledgeBase& kb, const DfohContext& ctx, Asn u, Asn v,
                                      const std::vector<AsPath>& observed_paths) {
  auto f = detail::link_features(kb, ctx, u, v);
  if (!observed_paths.empty()) {
    double vf = 0, gap = 0;
    for (const auto& p : observed_paths) {
      const auto cut = detail::truncate_at_link(p, u, v);
      vf += detail::path_valley_free(ctx, cut) ? 1.0 : 0.0;
      gap = std::max(gap, detail::max_degree_gap(kb, cut, u, v));
    }
    f[feature::ValleyFree] = vf / static_cast<double>(observed_paths.size());
    f[feature::MaxDegreeGap] = gap;
  }
  f[feature::SeenBothDirections] = detail::seen_both(kb, observed_paths, u, v) ? 1.0 : 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Training and classification
// ---------------------------------------------------------------------------

struct DfohConfig {
  int window_days = 300;
  int quarantine_days = 30;
  ForestParams forest;
  std::size_t n_per_class = 500;
  std::vector<FeatureCategory> ablate;
  double threshold = 0.5;
};

inline std::vector<bool> feature_mask(const std::vector<FeatureCategory>& ablate) {
  std::vector<bool> mask(feature::Count, true);
  for (std::size_t i = 0; i < feature::Count; ++i) {
    if (std::find(ablate.begin(), ablate.end(), category_of(i)) != ablate.end()) mask[i] = false;
  }
  return mask;
}

/// Degree-quartile x country bucket of every KB node.
inline std::map<std::pair<int, std::string>, std::vector<Asn>> sampling_clusters(const KnowledgeBase& kb,
                                                                                  const DfohContext& ctx) {
  const auto nodes = kb.nodes();
  std::vector<std::size_t> degs;
  for (const auto n : nodes) degs.push_back(kb.degree(n));
  std::sort(degs.begin(), degs.end());
  auto quartile = [&](std::size_t d) {
    int q = 0;
    for (int k = 1; k <= 3; ++k) {
      if (!degs.empty() && d > degs[degs.size() * static_cast<std::size_t>(k) / 4 - (k == 4 ? 1 : 0)]) q = k;
    }
    return q;
  };
  std::map<std::pair<int, std::string>, std::vector<Asn>> out;
  for (const auto n : nodes) {
    const auto* m = ctx.meta(n);
    out[{quartile(kb.degree(n)), m ? m->country : std::string{}}].push_back(n);
  }
  return out;
}

/// Balanced training set. Positives are KB links scored as if new on one of
/// their observed paths (cut at the link); negatives are forged links
/// (u, v) scored on one of u's observed paths extended with v. Both draw u
/// from a uniformly chosen cluster.
inline Dataset build_training_set(const KnowledgeBase& kb, const DfohContext& ctx, std::size_t n_per_class,
                                  std::uint64_t seed) {
  if (n_per_class == 0) throw TrainingError("n_per_class must be positive");
  if (kb.size() < 2 * n_per_class) {
    throw TrainingError("knowledge base has " + std::to_string(kb.size()) + " links; need at least " +
                        std::to_string(2 * n_per_class));
  }
  const auto clusters = sampling_clusters(kb, ctx);
  std::vector<const std::vector<Asn>*> buckets;
  for (const auto& [_, members] : clusters) buckets.push_back(&members);
  const auto all_nodes = kb.nodes();
  Rng rng(derive_seed(seed, "dfoh-training"));
  Dataset data;
  data.n_features = feature::Count;

  auto add = [&](Asn u, Asn v, const std::vector<AsPath>& paths, const AsPath& chosen, int label) {
    auto f = detail::link_features(kb, ctx, u, v);
    detail::fill_path_features(f, kb, ctx, chosen, u, v);
    f[feature::SeenBothDirections] = detail::seen_both(KnowledgeBase{}, paths, u, v) ? 1.0 : 0.0;
    data.add(f.to_vector(), label);
  };

  const std::size_t max_attempts = 200 * n_per_class;
  std::set<AsLink> used;
  std::size_t attempts = 0, positives = 0;
  while (positives < n_per_class && attempts++ < max_attempts) {
    const auto& bucket = *buckets[uniform_index(rng, buckets.size())];
    const Asn u = bucket[uniform_index(rng, bucket.size())];
    const auto& nbrs = kb.neighbors(u);
    if (nbrs.empty()) continue;
    const Asn v = nbrs[uniform_index(rng, nbrs.size())];
    const auto link = AsLink::between(u, v);
    const auto& ids = ctx.corpus().paths_through(link);
    if (ids.empty() || !used.insert(link).second) continue;
    std::vector<AsPath> paths;
    for (const auto id : ids) paths.push_back(ctx.corpus().paths()[id]);
    const auto& chosen = paths[uniform_index(rng, paths.size())];
    const auto pos = *detail::link_position(chosen, u, v);
    // the KB still holds the link; the as-if-new rule drops it from
    // neighborhoods, and bidirectionality uses the observed paths only
    add(chosen[pos], chosen[pos + 1], paths, chosen, 0);
    ++positives;
  }
  attempts = 0;
  std::size_t negatives = 0;
  std::set<std::pair<Asn, Asn>> used_neg;
  while (negatives < n_per_class && attempts++ < max_attempts) {
    const auto& bucket = *buckets[uniform_index(rng, buckets.size())];
    const Asn u = bucket[uniform_index(rng, bucket.size())];
    const Asn v = all_nodes[uniform_index(rng, all_nodes.size())];
    if (u == v || kb.find(AsLink::between(u, v)) || !used_neg.insert({u, v}).second) continue;
    const auto paths = forged_paths(ctx.corpus().paths_from(u), v);
    if (paths.empty()) continue;
    add(u, v, paths, paths[uniform_index(rng, paths.size())], 1);
    ++negatives;
  }
  if (positives < n_per_class || negatives < n_per_class) {
    throw TrainingError("could not sample " + std::to_string(n_per_class) + " links per class");
  }
  return data;
}

inline Forest train_classifier(const KnowledgeBase& kb, const DfohContext& ctx, const DfohConfig& config,
                               std::uint64_t seed, int jobs = 1) {
  const auto data = build_training_set(kb, ctx, config.n_per_class, seed);
  auto params = config.forest;
  params.feature_mask = feature_mask(config.ablate);
  return Forest::train(data, params, derive_seed(seed, "dfoh-forest"), jobs);
}

struct PathVerdict {
  AsPath path;
  double probability = 0;
};

struct Verdict {
  double suspicion = 0;
  bool flagged = false;
  std::vector<PathVerdict> per_path;
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty set");
  std::sort(xs.begin(), xs.end());
  const auto n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

inline Verdict aggregate_verdict(std::vector<PathVerdict> per_path, double threshold = 0.5) {
  std::vector<double> probs;
  for (const auto& p : per_path) probs.push_back(p.probability);
  Verdict v;
  v.suspicion = median(std::move(probs));
  v.flagged = v.suspicion > threshold;
  v.per_path = std::move(per_path);
  return v;
}

/// Scores `u -> v` once per observed path and aggregates by median. With no
/// paths the bare link [u, v] is scored.
inline Verdict classify_link(const Forest& forest, const KnowledgeBase& kb, const DfohContext& ctx, Asn u, Asn v,
                             const std::vector<AsPath>& observed_paths, double threshold = 0.5) {
  const std::vector<AsPath> fallback{{u, v}};
  const auto& paths = observed_paths.empty() ? fallback : observed_paths;
  auto base = detail::link_features(kb, ctx, u, v);
  base[feature::SeenBothDirections] = detail::seen_both(kb, paths, u, v) ? 1.0 : 0.0;
  std::vector<PathVerdict> per_path;
  per_path.reserve(paths.size());
  for (const auto& p : paths) {
    auto f = base;
    detail::fill_path_features(f, kb, ctx, p, u, v);
    per_path.push_back({p, forest.predict_proba(f.values.data())});
  }
  return aggregate_verdict(std::move(per_path), threshold);
}

/// Like classify_link, but missing data counts as maximal suspicion.
inline Verdict classify_or_max(const Forest& forest, const KnowledgeBase& kb, const DfohContext& ctx, Asn u, Asn v,
                               const std::vector<AsPath>& observed_paths, double threshold = 0.5) {
  try {
    return classify_link(forest, kb, ctx, u, v, observed_paths, threshold);
  } catch (const InsufficientDataError&) {
    return Verdict{1.0, true, {}};
  }
}

/// Per-category share of the forest's impurity importance. A forest that
/// never split spreads the mass evenly over the non-ablated categories.
inline std::map<FeatureCategory, double> feature_importances(const Forest& forest) {
  std::map<FeatureCategory, double> out;
  for (const auto c : kFeatureCategories) out[c] = 0.0;
  const auto& imp = forest.importances();
  const auto& mask = forest.params().feature_mask;
  double total = 0;
  for (std::size_t i = 0; i < imp.size(); ++i) {
    out[category_of(i)] += imp[i];
    total += imp[i];
  }
  if (total > 0) {
    for (auto& [_, v] : out) v /= total;
    return out;
  }
  std::set<FeatureCategory> active;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) active.insert(category_of(i));
  }
  for (const auto c : active) out[c] = 1.0 / static_cast<double>(active.size());
  return out;
}

// ---------------------------------------------------------------------------
// Defender pipeline
// ---------------------------------------------------------------------------

struct LinkDecision {
  Asn upstream;
  Asn downstream;
  Verdict verdict;
};

/// Detect -> classify -> update cycle over batches of route events.
class DfohPipeline {
 public:
  DfohPipeline(KnowledgeBase kb, std::shared_ptr<const Forest> forest, const DfohContext& ctx,
               double threshold = 0.5)
      : kb_(std::move(kb)), forest_(std::move(forest)), ctx_(&ctx), threshold_(threshold) {
    if (!forest_) throw std::invalid_argument("pipeline without a forest");
  }
  DfohPipeline(KnowledgeBase kb, Forest forest, const DfohContext& ctx, double threshold = 0.5)
      : DfohPipeline(std::move(kb), std::make_shared<const Forest>(std::move(forest)), ctx, threshold) {}

  const KnowledgeBase& kb() const noexcept { return kb_; }
  KnowledgeBase& kb() noexcept { return kb_; }
  const Forest& forest() const noexcept { return *forest_; }
  const DfohContext& context() const noexcept { return *ctx_; }
  double threshold() const noexcept { return threshold_; }

  /// Verdict on `u -> v` against the current knowledge base. A link the
  /// knowledge base already uses is not new and scores zero.
  Verdict verdict(Asn u, Asn v, const std::vector<AsPath>& paths) const {
    if (kb_.contains(AsLink::between(u, v))) return Verdict{0.0, false, {}};
    return classify_or_max(*forest_, kb_, *ctx_, u, v, paths, threshold_);
  }

  /// Classifies every new link in `events` against the knowledge base as it
  /// was before the batch, then folds the batch in, leaving flagged links out.
  std::vector<LinkDecision> process(const std::vector<RouteEvent>& events, int day) {
    kb_.advance(day);
    struct Fresh {
      Asn upstream;
      Asn downstream;
      std::vector<AsPath> paths;
    };
    std::map<AsLink, Fresh> fresh;
    for (const auto& e : events) {
      const auto& p = e.announcement.as_path;
      for (const auto& l : detect_new_links(kb_, e, day)) {
        auto it = fresh.find(l);
        if (it == fresh.end()) {
          const auto pos = *detail::link_position(p, l.low, l.high);
          it = fresh.emplace(l, Fresh{p[pos], p[pos + 1], {}}).first;
        }
        it->second.paths.push_back(p);
      }
    }
    std::vector<LinkDecision> out;
    std::set<AsLink> rejected;
    for (const auto& [link, info] : fresh) {
      auto verdict = classify_or_max(*forest_, kb_, *ctx_, info.upstream, info.downstream, info.paths, threshold_);
      // declared provider links go to quarantine whatever the verdict
      if (verdict.flagged && !kb_.declared(link)) rejected.insert(link);
      out.push_back({info.upstream, info.downstream, std::move(verdict)});
    }
    update_knowledge_base(kb_, events, day, rejected);
    return out;
  }

 private:
  KnowledgeBase kb_;
  std::shared_ptr<const Forest> forest_;
  const DfohContext* ctx_;
  double threshold_;
};

}  // namespace bgpoison
