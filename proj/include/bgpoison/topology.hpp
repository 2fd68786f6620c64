#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "core.hpp"
#include "random.hpp"

namespace bgpoison {

enum class Relationship { ProviderToCustomer, PeerToPeer };

/// Role a neighbor plays relative to a given AS.
enum class NeighborRole { Customer, Peer, Provider };

/// A relationship edge. Provider-to-customer edges are stored as
/// (provider, customer); peer edges as (low, high).
struct Edge {
  Asn from;
  Asn to;
  Relationship kind;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable AS-level topology with typed business relationships.
///
/// Nodes are densely indexed in ascending ASN order, so comparing indices is
/// the same as comparing ASNs. Adjacency lists are sorted.
class AsGraph {
 public:
  class Builder;

  AsGraph() = default;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::vector<Asn>& nodes() const noexcept { return nodes_; }

  bool contains(Asn asn) const { return index_.count(asn) != 0; }

  std::optional<std::uint32_t> find(Asn asn) const {
    const auto it = index_.find(asn);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t index(Asn asn) const {
    const auto it = index_.find(asn);
    if (it == index_.end()) throw NotFoundError("AS " + to_string(asn) + " not in graph");
    return it->second;
  }

  Asn asn_at(std::uint32_t i) const { return nodes_.at(i); }

  std::span<const std::uint32_t> providers_of(std::uint32_t i) const { return providers_[i]; }
  std::span<const std::uint32_t> customers_of(std::uint32_t i) const { return customers_[i]; }
  std::span<const std::uint32_t> peers_of(std::uint32_t i) const { return peers_[i]; }

  std::size_t degree_of(std::uint32_t i) const {
    return providers_[i].size() + customers_[i].size() + peers_[i].size();
  }

  std::vector<Asn> providers(Asn asn) const { return to_asns(providers_[index(asn)]); }
  std::vector<Asn> customers(Asn asn) const { return to_asns(customers_[index(asn)]); }
  std::vector<Asn> peers(Asn asn) const { return to_asns(peers_[index(asn)]); }

  std::vector<Asn> neighbors(Asn asn) const {
    const auto i = index(asn);
    std::vector<Asn> out = to_asns(providers_[i]);
    for (const auto j : customers_[i]) out.push_back(nodes_[j]);
    for (const auto j : peers_[i]) out.push_back(nodes_[j]);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t degree(Asn asn) const { return degree_of(index(asn)); }

  /// Role of `neighbor` as seen from `of`, by index.
  std::optional<NeighborRole> role_of(std::uint32_t of, std::uint32_t neighbor) const {
    if (std::binary_search(customers_[of].begin(), customers_[of].end(), neighbor)) return NeighborRole::Customer;
    if (std::binary_search(peers_[of].begin(), peers_[of].end(), neighbor)) return NeighborRole::Peer;
    if (std::binary_search(providers_[of].begin(), providers_[of].end(), neighbor)) return NeighborRole::Provider;
    return std::nullopt;
  }

  /// Role of `neighbor` as seen from `of`; nullopt when not adjacent or
  /// either AS is unknown.
  std::optional<NeighborRole> role(Asn of, Asn neighbor) const {
    const auto a = find(of);
    const auto b = find(neighbor);
    if (!a || !b) return std::nullopt;
    return role_of(*a, *b);
  }

  bool adjacent(Asn a, Asn b) const { return role(a, b).has_value(); }

  std::size_t edge_count() const noexcept { return edge_count_; }

  /// All edges in canonical order: provider-to-customer first by
  /// (provider, customer), then peerings by (low, high).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      for (const auto c : customers_[i]) out.push_back({nodes_[i], nodes_[c], Relationship::ProviderToCustomer});
    }
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      for (const auto p : peers_[i]) {
        if (p > i) out.push_back({nodes_[i], nodes_[p], Relationship::PeerToPeer});
      }
    }
    return out;
  }

 private:
  std::vector<Asn> to_asns(const std::vector<std::uint32_t>& idx) const {
    std::vector<Asn> out;
    out.reserve(idx.size());
    for (const auto i : idx) out.push_back(nodes_[i]);
    return out;
  }

  std::vector<Asn> nodes_;
  std::unordered_map<Asn, std::uint32_t> index_;
  std::vector<std::vector<std::uint32_t>> providers_;
  std::vector<std::vector<std::uint32_t>> customers_;
  std::vector<std::vector<std::uint32_t>> peers_;
  std::size_t edge_count_ = 0;
};

/// Accumulates nodes and relationships, rejecting conflicts, then freezes
/// them into an AsGraph.
class AsGraph::Builder {
 public:
  Builder() = default;

  static Builder from(const AsGraph& graph) {
    Builder b;
    for (const auto asn : graph.nodes()) b.add_as(asn);
    for (const auto& e : graph.edges()) b.add(e.from, e.to, e.kind);
    return b;
  }

  Builder& add_as(Asn asn) {
    nodes_.insert(asn);
    return *this;
  }

  /// Adds `from -> to` with the given kind. Identical repeats are no-ops;
  /// a different relationship for the same pair throws ConflictError.
  Builder& add(Asn from, Asn to, Relationship kind) {
    if (from == to) throw std::invalid_argument("self-loop at AS " + to_string(from));
    const auto key = AsLink::between(from, to);
    Stored s{from, kind};
    if (kind == Relationship::PeerToPeer) s.provider = key.low;
    const auto [it, inserted] = edges_.emplace(key, s);
    if (!inserted && !(it->second == s)) {
      throw ConflictError("conflicting relationship for pair (" + to_string(from) + "," + to_string(to) + ")");
    }
    nodes_.insert(from);
    nodes_.insert(to);
    return *this;
  }

  Builder& add_provider_customer(Asn provider, Asn customer) {
    return add(provider, customer, Relationship::ProviderToCustomer);
  }

  Builder& add_peering(Asn a, Asn b) { return add(a, b, Relationship::PeerToPeer); }

  bool has_edge(Asn a, Asn b) const { return a != b && edges_.count(AsLink::between(a, b)) != 0; }

  AsGraph build() const {
    AsGraph g;
    g.nodes_.assign(nodes_.begin(), nodes_.end());
    const auto n = g.nodes_.size();
    g.index_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) g.index_.emplace(g.nodes_[i], i);
    g.providers_.assign(n, {});
    g.customers_.assign(n, {});
    g.peers_.assign(n, {});
    for (const auto& [link, s] : edges_) {
      const auto a = g.index_.at(link.low);
      const auto b = g.index_.at(link.high);
      if (s.kind == Relationship::PeerToPeer) {
        g.peers_[a].push_back(b);
        g.peers_[b].push_back(a);
      } else {
        const auto p = g.index_.at(s.provider);
        const auto c = p == a ? b : a;
        g.customers_[p].push_back(c);
        g.providers_[c].push_back(p);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(g.providers_[i].begin(), g.providers_[i].end());
      std::sort(g.customers_[i].begin(), g.customers_[i].end());
      std::sort(g.peers_[i].begin(), g.peers_[i].end());
    }
    g.edge_count_ = edges_.size();
    return g;
  }

 private:
  struct Stored {
    Asn provider;
    Relationship kind;
    bool operator==(const Stored&) const = default;
  };

  std::set<Asn> nodes_;
  std::map<AsLink, Stored> edges_;
};

// ---------------------------------------------------------------------------
// Relationship files (CAIDA serial-1 subset)
// ---------------------------------------------------------------------------

/// Parses `asn|asn|rel` lines, rel in {-1, 0}; `#` starts a comment line.
inline AsGraph parse_relationships(std::istream& in) {
  AsGraph::Builder b;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto fields = detail::split(text, '|');
    if (fields.size() != 3) throw ParseError(lineno, "expected 'asn|asn|rel', got '" + std::string(text) + "'");
    std::uint32_t a = 0;
    std::uint32_t c = 0;
    int rel = 0;
    if (!detail::parse_int(fields[0], a) || a == 0 || !detail::parse_int(fields[1], c) || c == 0) {
      throw ParseError(lineno, "invalid ASN in '" + std::string(text) + "'");
    }
    if (!detail::parse_int(fields[2], rel)) throw ParseError(lineno, "invalid relationship code");
    if (rel != -1 && rel != 0) {
      throw ParseError(lineno, "unsupported relationship code " + std::to_string(rel));
    }
    if (a == c) throw ParseError(lineno, "self-loop at AS " + std::to_string(a));
    b.add(Asn{a}, Asn{c}, rel == -1 ? Relationship::ProviderToCustomer : Relationship::PeerToPeer);
  }
  return b.build();
}

inline AsGraph parse_relationships(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_relationships(in);
}

inline void write_relationships(const AsGraph& graph, std::ostream& out) {
  out << "# provider|customer|-1, peer|peer|0\n";
  for (const auto& e : graph.edges()) {
    out << e.from << '|' << e.to << '|' << (e.kind == Relationship::ProviderToCustomer ? "-1" : "0") << '\n';
  }
}

inline std::string serialize_relationships(const AsGraph& graph) {
  std::ostringstream os;
  write_relationships(graph, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

/// `asn` plus every AS reachable by following provider-to-customer edges.
inline std::set<Asn> customer_cone(const AsGraph& graph, Asn asn) {
  const auto start = graph.index(asn);
  std::vector<char> seen(graph.size(), 0);
  std::vector<std::uint32_t> stack{start};
  seen[start] = 1;
  std::set<Asn> cone;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    cone.insert(graph.asn_at(i));
    for (const auto c : graph.customers_of(i)) {
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  return cone;
}

/// Customer cone size of every node, indexed like the graph.
inline std::vector<std::uint32_t> customer_cone_sizes(const AsGraph& graph) {
  const auto n = static_cast<std::uint32_t>(graph.size());
  std::vector<std::uint32_t> sizes(n, 0);
  std::vector<std::uint32_t> mark(n, ~0u);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < n; ++s) {
    std::uint32_t count = 0;
    stack.assign(1, s);
    mark[s] = s;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      ++count;
      for (const auto c : graph.customers_of(i)) {
        if (mark[c] != s) {
          mark[c] = s;
          stack.push_back(c);
        }
      }
    }
    sizes[s] = count;
  }
  return sizes;
}

/// Direction of one hop walking a path in list order.
enum class Hop { Up, Peer, Down, Unknown };

/// Valley-free check over hop labels: Up* Peer? Down*. Unknown hops match
/// whichever label keeps the path valley-free.
inline bool valley_free_hops(std::span<const Hop> hops) {
  // Reachable automaton states: climbing (only up hops so far) and
  // descending (after the peer hop or the first down hop).
  bool climbing = true;
  bool descending = false;
  for (const auto h : hops) {
    const bool any = h == Hop::Unknown;
    const bool next_climbing = climbing && (h == Hop::Up || any);
    const bool next_descending = (climbing && h != Hop::Up) || (descending && (h == Hop::Down || any));
    climbing = next_climbing;
    descending = next_descending;
    if (!climbing && !descending) return false;
  }
  return true;
}

inline Hop hop_between(const AsGraph& graph, Asn from, Asn to) {
  const auto r = graph.role(from, to);
  if (!r) return Hop::Unknown;
  switch (*r) {
    case NeighborRole::Provider: return Hop::Up;
    case NeighborRole::Peer: return Hop::Peer;
    case NeighborRole::Customer: return Hop::Down;
  }
  return Hop::Unknown;
}

/// True iff the path reads as zero or more customer-to-provider hops, at most
/// one peer hop, then zero or more provider-to-customer hops.
inline bool is_valley_free(const AsGraph& graph, const AsPath& path) {
  std::vector<Hop> hops;
  hops.reserve(path.size());
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto h = hop_between(graph, path[i], path[i + 1]);
    if (h == Hop::Unknown) {
      throw InvalidPathError("no edge between " + to_string(path[i]) + " and " + to_string(path[i + 1]));
    }
    hops.push_back(h);
  }
  return valley_free_hops(hops);
}

// ---------------------------------------------------------------------------
// AS metadata (PeeringDB-lite)
// ---------------------------------------------------------------------------

struct AsMetadata {
  Asn asn;
  std::string country;         ///< two uppercase letters, empty when unknown
  std::vector<int> ixps;       ///< sorted, unique
  std::vector<int> facilities; ///< sorted, unique

  bool has_country() const noexcept { return !country.empty(); }

  friend bool operator==(const AsMetadata&, const AsMetadata&) = default;
};

using MetadataTable = std::map<Asn, AsMetadata>;

namespace detail {

inline std::string normalize_country(std::string_view code) {
  if (code.size() != 2 || !std::isalpha(static_cast<unsigned char>(code[0])) ||
      !std::isalpha(static_cast<unsigned char>(code[1]))) {
    return {};
  }
  std::string out(code);
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

inline std::vector<int> int_set(const nlohmann::json& v, const std::string& what) {
  if (!v.is_array()) throw ParseError(what + " must be an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw ParseError(what + " must be an array of integers");
    out.push_back(x.get<int>());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::size_t count_shared(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace detail

/// Parses a JSON object mapping ASN strings to
/// `{"country": "US", "ixps": [...], "facilities": [...]}`. Unknown fields
/// are ignored.
inline MetadataTable parse_metadata(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("metadata: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("metadata document must be a JSON object");
  MetadataTable table;
  for (const auto& [key, entry] : doc.items()) {
    const auto asn = parse_asn(key);
    if (!entry.is_object()) throw ParseError("metadata entry for " + key + " must be an object");
    AsMetadata md{asn, {}, {}, {}};
    if (const auto it = entry.find("country"); it != entry.end() && it->is_string()) {
      md.country = detail::normalize_country(it->get<std::string>());
    }
    if (const auto it = entry.find("ixps"); it != entry.end()) md.ixps = detail::int_set(*it, key + ".ixps");
    if (const auto it = entry.find("facilities"); it != entry.end()) {
      md.facilities = detail::int_set(*it, key + ".facilities");
    }
    table.emplace(asn, std::move(md));
  }
  return table;
}

inline std::string serialize_metadata(const MetadataTable& table) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [asn, md] : table) {
    nlohmann::ordered_json e;
    if (md.has_country()) e["country"] = md.country;
    e["ixps"] = md.ixps;
    e["facilities"] = md.facilities;
    doc[to_string(asn)] = std::move(e);
  }
  return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Synthetic topologies
// ---------------------------------------------------------------------------

struct SyntheticParams {
  int tier1 = 3;
  int tier2 = 10;
  int stub = 50;
  int countries = 8;
  int tier2_min_providers = 1;
  int tier2_max_providers = 3;
  int stub_min_providers = 1;
  int stub_max_providers = 2;
  double tier2_peer_degree = 2.0;     ///< expected peering sessions started per tier-2 AS
  double stub_peer_probability = 0.05;
  double same_country_bias = 4.0;     ///< attachment weight multiplier for same-country targets
  double tier1_stub_weight = 0.2;     ///< attachment weight multiplier for tier-1 providers of stubs
  int ixps_per_country = 2;
  int facilities_per_country = 3;
  double unknown_country_fraction = 0.0;

  friend bool operator==(const SyntheticParams&, const SyntheticParams&) = default;
};

struct SyntheticInternet {
  AsGraph graph;
  MetadataTable metadata;
  std::map<Asn, int> tier;  ///< 1, 2 or 3 (stub)
};

namespace detail {

inline std::string country_code(int i) {
  static constexpr std::string_view kCodes[] = {"US", "DE", "GB", "FR", "NL", "JP", "BR", "RU", "IN", "ZA",
                                                "AU", "CN", "CA", "IT", "ES", "SE", "PL", "AR", "KE", "SG"};
  if (i < static_cast<int>(std::size(kCodes))) return std::string(kCodes[i]);
  std::string s = "AA";
  s[0] = static_cast<char>('A' + (i / 26) % 26);
  s[1] = static_cast<char>('A' + i % 26);
  return s;
}

inline void validate(const SyntheticParams& p) {
  if (p.tier1 < 1) throw GenerationError("tier1 must be at least 1");
  if (p.tier2 < 0 || p.stub < 0) throw GenerationError("tier sizes must be non-negative");
  if (p.countries < 1) throw GenerationError("countries must be at least 1");
  if (p.tier2_min_providers < 1 || p.stub_min_providers < 1) {
    throw GenerationError("every non-tier-1 AS needs at least one provider");
  }
  if (p.tier2_min_providers > p.tier2_max_providers || p.stub_min_providers > p.stub_max_providers) {
    throw GenerationError("min providers exceeds max providers");
  }
  if (p.tier2 > 0 && p.tier2_min_providers > p.tier1) {
    throw GenerationError("first tier-2 AS cannot find " + std::to_string(p.tier2_min_providers) +
                          " providers among " + std::to_string(p.tier1) + " tier-1 ASes");
  }
  if (p.stub > 0 && p.stub_min_providers > p.tier1 + p.tier2) {
    throw GenerationError("stubs cannot find " + std::to_string(p.stub_min_providers) + " providers");
  }
  if (p.tier2_peer_degree < 0 || p.stub_peer_probability < 0 || p.stub_peer_probability > 1 ||
      p.same_country_bias <= 0 || p.tier1_stub_weight < 0 || p.unknown_country_fraction < 0 ||
      p.unknown_country_fraction > 1 || p.ixps_per_country < 0 || p.facilities_per_country < 0) {
    throw GenerationError("invalid attachment parameters");
  }
}

}  // namespace detail

/// Three-tier hierarchy: a tier-1 peering clique, tier-2 transit ASes that
/// buy from tier-1 or earlier tier-2 ASes, and stubs. Providers are chosen by
/// preferential attachment on customer count, biased towards the same
/// country. Provider edges only point from earlier to later ASes, so the
/// customer-provider hierarchy is acyclic.
inline SyntheticInternet generate_synthetic_internet(const SyntheticParams& p, std::uint64_t seed) {
  detail::validate(p);
  Rng rng(derive_seed(seed, "synthetic-topology"));
  const int n = p.tier1 + p.tier2 + p.stub;
  std::vector<int> country(n);
  std::vector<int> tier(n);
  for (int i = 0; i < n; ++i) {
    tier[i] = i < p.tier1 ? 1 : (i < p.tier1 + p.tier2 ? 2 : 3);
    country[i] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(p.countries)));
  }
  auto asn = [](int i) { return Asn{static_cast<std::uint32_t>(i + 1)}; };

  AsGraph::Builder b;
  for (int i = 0; i < n; ++i) b.add_as(asn(i));
  std::vector<int> customers(n, 0);
  std::vector<int> degree(n, 0);
  std::set<std::pair<int, int>> linked;
  auto link = [&](int x, int y, Relationship kind) {
    b.add(asn(x), asn(y), kind);
    linked.emplace(std::min(x, y), std::max(x, y));
    ++degree[x];
    ++degree[y];
    if (kind == Relationship::ProviderToCustomer) ++customers[x];
  };
  auto is_linked = [&](int x, int y) { return linked.count({std::min(x, y), std::max(x, y)}) != 0; };

  for (int i = 0; i < p.tier1; ++i) {
    for (int j = i + 1; j < p.tier1; ++j) link(i, j, Relationship::PeerToPeer);
  }

  auto pick_providers = [&](int self, int pool_end, int min_k, int max_k, bool stub) {
    std::vector<int> pool;
    for (int c = 0; c < pool_end; ++c) pool.push_back(c);
    const int hi = std::min<int>(max_k, static_cast<int>(pool.size()));
    const int k = min_k + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - min_k + 1)));
    for (int t = 0; t < k; ++t) {
      std::vector<double> w;
      w.reserve(pool.size());
      for (const int c : pool) {
        double weight = 1.0 + customers[c];
        if (country[c] == country[self]) weight *= p.same_country_bias;
        if (stub && tier[c] == 1) weight *= p.tier1_stub_weight;
        w.push_back(weight);
      }
      const auto pick = weighted_index(rng, w);
      link(pool[pick], self, Relationship::ProviderToCustomer);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  };

  const int t2_begin = p.tier1;
  const int t2_end = p.tier1 + p.tier2;
  for (int i = t2_begin; i < t2_end; ++i) pick_providers(i, i, p.tier2_min_providers, p.tier2_max_providers, false);

  if (p.tier2 > 1) {
    for (int i = t2_begin; i < t2_end; ++i) {
      int sessions = static_cast<int>(std::floor(p.tier2_peer_degree));
      if (bernoulli(rng, p.tier2_peer_degree - sessions)) ++sessions;
      for (int s = 0; s < sessions; ++s) {
        std::vector<int> cand;
        std::vector<double> w;
        for (int j = t2_begin; j < t2_end; ++j) {
          if (j == i || is_linked(i, j)) continue;
          cand.push_back(j);
          w.push_back((1.0 + degree[j]) * (country[j] == country[i] ? p.same_country_bias : 1.0));
        }
        if (cand.empty()) break;
        link(i, cand[weighted_index(rng, w)], Relationship::PeerToPeer);
      }
    }
  }

  for (int i = t2_end; i < n; ++i) pick_providers(i, t2_end, p.stub_min_providers, p.stub_max_providers, true);

  for (int i = t2_end; i < n; ++i) {
    if (!bernoulli(rng, p.stub_peer_probability)) continue;
    std::vector<int> cand;
    for (int j = t2_end; j < n; ++j) {
      if (j != i && country[j] == country[i] && !is_linked(i, j)) cand.push_back(j);
    }
    if (!cand.empty()) link(i, cand[uniform_index(rng, cand.size())], Relationship::PeerToPeer);
  }

  SyntheticInternet out;
  out.graph = b.build();

  // PeeringDB-like records: IXPs and facilities live in one country each.
  auto ixp_id = [&](int c, int k) { return c * 100 + k + 1; };
  auto fac_id = [&](int c, int k) { return c * 100 + 50 + k + 1; };
  Rng mrng(derive_seed(seed, "synthetic-metadata"));
  for (int i = 0; i < n; ++i) {
    AsMetadata md{asn(i), {}, {}, {}};
    if (!bernoulli(mrng, p.unknown_country_fraction)) md.country = detail::country_code(country[i]);
    std::set<int> ixps;
    std::set<int> facs;
    auto join_country = [&](int c, double p_ixp, double p_fac) {
      for (int k = 0; k < p.ixps_per_country; ++k) {
        if (bernoulli(mrng, p_ixp)) ixps.insert(ixp_id(c, k));
      }
      for (int k = 0; k < p.facilities_per_country; ++k) {
        if (bernoulli(mrng, p_fac)) facs.insert(fac_id(c, k));
      }
    };
    if (tier[i] == 1) {
      join_country(country[i], 1.0, 1.0);
      for (int extra = 0; extra < 3; ++extra) {
        join_country(static_cast<int>(uniform_index(mrng, static_cast<std::size_t>(p.countries))), 0.8, 0.6);
      }
    } else if (tier[i] == 2) {
      join_country(country[i], 0.7, 0.6);
      if (bernoulli(mrng, 0.3)) {
        join_country(static_cast<int>(uniform_index(mrng, static_cast<std::size_t>(p.countries))), 0.5, 0.3);
      }
    } else {
      join_country(country[i], 0.25, 0.3);
    }
    md.ixps.assign(ixps.begin(), ixps.end());
    md.facilities.assign(facs.begin(), facs.end());
    out.metadata.emplace(md.asn, std::move(md));
    out.tier.emplace(asn(i), tier[i]);
  }
  return out;
}

inline AsGraph generate_synthetic_topology(const SyntheticParams& p, std::uint64_t seed) {
  return generate_synthetic_internet(p, seed).graph;
}

/// Number of connected components, ignoring edge direction.
inline std::size_t connected_components(const AsGraph& graph) {
  const auto n = static_cast<std::uint32_t>(graph.size());
  std::vector<char> seen(n, 0);
  std::size_t components = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      auto visit = [&](std::span<const std::uint32_t> adj) {
        for (const auto j : adj) {
          if (!seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      };
      visit(graph.providers_of(i));
      visit(graph.customers_of(i));
      visit(graph.peers_of(i));
    }
  }
  return components;
}

}  // namespace bgpoison
