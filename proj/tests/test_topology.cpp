#include <gtest/gtest.h>

#include <queue>
#include <regex>

#include "bgpoison/topology.hpp"
#include "oracles.hpp"

using namespace bgpoison;

namespace {

Asn A(std::uint32_t v) { return Asn{v}; }

SyntheticParams small_params() {
  SyntheticParams p;
  p.tier1 = 3;
  p.tier2 = 10;
  p.stub = 50;
  return p;
}

}  // namespace

TEST(Asn, RejectsZero) {
  EXPECT_THROW(Asn{0}, std::invalid_argument);
  EXPECT_EQ(Asn{4294967295u}.value(), 4294967295u);
  EXPECT_THROW(parse_asn("0"), ParseError);
  EXPECT_THROW(parse_asn("4294967296"), ParseError);
}

TEST(Prefix, ParseAndContainment) {
  const auto p = Prefix::parse("10.0.0.0/16");
  EXPECT_EQ(p.to_string(), "10.0.0.0/16");
  EXPECT_TRUE(p.contains(Prefix::parse("10.0.128.0/17")));
  EXPECT_FALSE(Prefix::parse("10.0.128.0/17").contains(p));
  EXPECT_TRUE(p.contains(p));
  EXPECT_THROW(Prefix::parse("10.0.0.1/16"), ParseError);
  EXPECT_THROW(Prefix::parse("10.0.0.0/33"), ParseError);
  EXPECT_THROW(Prefix::parse("10.0.0/8"), ParseError);
  const auto h = p.halves();
  EXPECT_EQ(h[0].to_string(), "10.0.0.0/17");
  EXPECT_EQ(h[1].to_string(), "10.0.128.0/17");
  EXPECT_THROW(Prefix::parse("1.2.3.4/32").halves(), NoSubprefixError);
}

TEST(ParseRelationships, ProviderAndPeer) {
  const auto g = parse_relationships("1|2|-1\n2|3|0");
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.role(A(1), A(2)), NeighborRole::Customer);
  EXPECT_EQ(g.role(A(2), A(1)), NeighborRole::Provider);
  EXPECT_EQ(g.role(A(2), A(3)), NeighborRole::Peer);
  EXPECT_EQ(g.role(A(3), A(2)), NeighborRole::Peer);
  EXPECT_FALSE(g.role(A(1), A(3)).has_value());
  const auto edges = g.edges();
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0], (Edge{A(1), A(2), Relationship::ProviderToCustomer}));
  EXPECT_EQ(edges[1], (Edge{A(2), A(3), Relationship::PeerToPeer}));
}

TEST(ParseRelationships, EmptyInput) {
  const auto g = parse_relationships("");
  EXPECT_EQ(g.size(), 0u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(ParseRelationships, CommentsAndIdempotentDuplicates) {
  const auto g = parse_relationships("# source: test\n1|2|-1\n1|2|-1\n\n3|2|0\n2|3|0\n");
  EXPECT_EQ(g.edge_count(), 2u);
}

TEST(ParseRelationships, ConflictNamesPair) {
  try {
    parse_relationships("1|2|-1\n1|2|0");
    FAIL() << "expected conflict";
  } catch (const ConflictError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_relationships("1|2|-1\n2|1|-1"), ConflictError);
}

TEST(ParseRelationships, MalformedLinesReportLineNumber) {
  try {
    parse_relationships("1|2|-1\n# ok\n1|x|0\n");
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_relationships("1|2"), ParseError);
  EXPECT_THROW(parse_relationships("1|2|1"), ParseError);   // sibling code
  EXPECT_THROW(parse_relationships("1|2|-1|bgp"), ParseError);
  EXPECT_THROW(parse_relationships("4|4|0"), ParseError);
  EXPECT_THROW(parse_relationships("0|4|0"), ParseError);
}

TEST(ParseRelationships, SerializationRoundTrip) {
  const auto g = generate_synthetic_topology(small_params(), 3);
  const auto text = serialize_relationships(g);
  const auto h = parse_relationships(text);
  EXPECT_EQ(serialize_relationships(h), text);
}

TEST(Synthetic, ThreeTierProperties) {
  const auto net = generate_synthetic_internet(small_params(), 7);
  const auto& g = net.graph;
  EXPECT_EQ(g.size(), 63u);
  EXPECT_EQ(connected_components(g), 1u);
  // tier-1 peer clique
  std::vector<Asn> t1;
  for (const auto& [asn, tier] : net.tier) {
    if (tier == 1) t1.push_back(asn);
  }
  ASSERT_EQ(t1.size(), 3u);
  for (const auto a : t1) {
    EXPECT_TRUE(g.providers(a).empty());
    for (const auto b : t1) {
      if (a != b) EXPECT_EQ(g.role(a, b), NeighborRole::Peer);
    }
  }
  for (const auto& [asn, tier] : net.tier) {
    if (tier != 1) EXPECT_GE(g.providers(asn).size(), 1u) << asn;
  }
  EXPECT_EQ(net.metadata.size(), 63u);
}

TEST(Synthetic, DegenerateSingleNode) {
  SyntheticParams p;
  p.tier1 = 1;
  p.tier2 = 0;
  p.stub = 0;
  const auto g = generate_synthetic_topology(p, 1);
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Synthetic, SeedsDifferAndRepeat) {
  const auto a = generate_synthetic_topology(small_params(), 7);
  const auto b = generate_synthetic_topology(small_params(), 8);
  const auto c = generate_synthetic_topology(small_params(), 7);
  EXPECT_NE(a.edges(), b.edges());
  EXPECT_EQ(serialize_relationships(a), serialize_relationships(c));
  EXPECT_EQ(serialize_metadata(generate_synthetic_internet(small_params(), 7).metadata),
            serialize_metadata(generate_synthetic_internet(small_params(), 7).metadata));
}

TEST(Synthetic, ImpossibleParametersRejected) {
  SyntheticParams p = small_params();
  p.tier1 = 0;
  EXPECT_THROW(generate_synthetic_topology(p, 1), GenerationError);
  p = small_params();
  p.tier2_min_providers = 4;  // first tier-2 AS only sees three tier-1 ASes
  p.tier2_max_providers = 4;
  EXPECT_THROW(generate_synthetic_topology(p, 1), GenerationError);
  p = small_params();
  p.tier2 = 0;
  p.stub_min_providers = 5;
  p.stub_max_providers = 5;
  EXPECT_THROW(generate_synthetic_topology(p, 1), GenerationError);
}

TEST(Synthetic, PeerEdgesSymmetric) {
  const auto g = generate_synthetic_topology(small_params(), 11);
  for (const auto& e : g.edges()) {
    if (e.kind == Relationship::PeerToPeer) {
      EXPECT_EQ(g.role(e.from, e.to), NeighborRole::Peer);
      EXPECT_EQ(g.role(e.to, e.from), NeighborRole::Peer);
    }
  }
}

TEST(CustomerCone, ChainAndStub) {
  const auto g = parse_relationships("1|2|-1\n2|3|-1\n");
  EXPECT_EQ(customer_cone(g, A(1)), (std::set<Asn>{A(1), A(2), A(3)}));
  EXPECT_EQ(customer_cone(g, A(3)), (std::set<Asn>{A(3)}));
  EXPECT_THROW(customer_cone(g, A(9)), NotFoundError);
}

TEST(CustomerCone, TerminatesOnCycles) {
  const auto g = parse_relationships("1|2|-1\n2|3|-1\n3|1|-1\n");
  EXPECT_EQ(customer_cone(g, A(2)).size(), 3u);
}

TEST(CustomerCone, MatchesExpansionOracle) {
  const auto g = generate_synthetic_topology(small_params(), 7);
  const auto sizes = customer_cone_sizes(g);
  for (const auto asn : g.nodes()) {
    const auto cone = customer_cone(g, asn);
    EXPECT_EQ(cone, oracle::cone_by_expansion(g, asn)) << asn;
    EXPECT_EQ(sizes[g.index(asn)], cone.size());
  }
}

TEST(CustomerCone, NestedUnderProviders) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = generate_synthetic_topology(small_params(), seed);
    for (const auto asn : g.nodes()) {
      const auto cone = customer_cone(g, asn);
      for (const auto p : g.providers(asn)) {
        const auto pc = customer_cone(g, p);
        EXPECT_TRUE(std::includes(pc.begin(), pc.end(), cone.begin(), cone.end()));
      }
    }
  }
}

TEST(ValleyFree, CanonicalShapes) {
  // 1,2 tier-1 peers; 3 customer of 1; 4 customer of 2; 5 customer of 3; 6 customer of 4
  const auto g = parse_relationships("1|2|0\n1|3|-1\n2|4|-1\n3|5|-1\n4|6|-1\n");
  EXPECT_TRUE(is_valley_free(g, {A(5), A(3), A(1), A(2), A(4), A(6)}));
  EXPECT_TRUE(is_valley_free(g, {A(5), A(3), A(1)}));
  EXPECT_FALSE(is_valley_free(g, {A(3), A(5), A(3)}));
  EXPECT_FALSE(is_valley_free(g, {A(1), A(3), A(1)}));
  EXPECT_THROW(is_valley_free(g, {A(5), A(6)}), InvalidPathError);
  EXPECT_TRUE(is_valley_free(g, {A(5)}));
}

TEST(ValleyFree, UpOnlyReversedIsDownOnly) {
  const auto g = generate_synthetic_topology(small_params(), 5);
  for (const auto start : g.nodes()) {
    AsPath path{start};
    while (true) {
      const auto provs = g.providers(path.back());
      if (provs.empty()) break;
      path.push_back(provs.front());
    }
    AsPath rev(path.rbegin(), path.rend());
    EXPECT_TRUE(is_valley_free(g, path));
    EXPECT_TRUE(is_valley_free(g, rev));
  }
}

TEST(ValleyFree, ExhaustiveThreeHopTruthTable) {
  // Six ASes: a chain of providers 1>2>3, a second chain 4>5>6, peers 1-4,
  // 2-5, 3-6 and a few cross links so every hop label appears.
  const auto g = parse_relationships(
      "1|2|-1\n2|3|-1\n4|5|-1\n5|6|-1\n1|4|0\n2|5|0\n3|6|0\n1|5|-1\n4|3|-1\n");
  const std::regex pattern("^U*P?D*$");
  int checked = 0;
  for (const auto a : g.nodes()) {
    for (const auto b : g.neighbors(a)) {
      for (const auto c : g.neighbors(b)) {
        for (const auto d : g.neighbors(c)) {
          const AsPath path{a, b, c, d};
          std::string labels;
          for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            const auto r = *g.role(path[i], path[i + 1]);
            labels += r == NeighborRole::Provider ? 'U' : (r == NeighborRole::Peer ? 'P' : 'D');
          }
          EXPECT_EQ(is_valley_free(g, path), std::regex_match(labels, pattern)) << labels;
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(ValleyFree, UnknownHopIsWildcard) {
  const std::vector<Hop> ok{Hop::Up, Hop::Unknown, Hop::Down};
  const std::vector<Hop> bad{Hop::Down, Hop::Unknown, Hop::Up};
  const std::vector<Hop> peer_then_unknown{Hop::Peer, Hop::Unknown};
  EXPECT_TRUE(valley_free_hops(ok));
  EXPECT_FALSE(valley_free_hops(bad));
  EXPECT_TRUE(valley_free_hops(peer_then_unknown));
}

TEST(Metadata, ParsesEntries) {
  const auto t = parse_metadata(R"({"15169": {"country":"US","ixps":[1,2],"facilities":[9]}})");
  ASSERT_EQ(t.size(), 1u);
  const auto& md = t.at(Asn{15169});
  EXPECT_EQ(md.country, "US");
  EXPECT_EQ(md.ixps, (std::vector<int>{1, 2}));
  EXPECT_EQ(md.facilities, (std::vector<int>{9}));
}

TEST(Metadata, EmptyAndDefaults) {
  EXPECT_TRUE(parse_metadata("{}").empty());
  const auto t = parse_metadata(R"({"7": {"country":"de", "name": "x"}, "8": {}})");
  EXPECT_EQ(t.at(Asn{7}).country, "DE");
  EXPECT_TRUE(t.at(Asn{7}).ixps.empty());
  EXPECT_FALSE(t.at(Asn{8}).has_country());
}

TEST(Metadata, InvalidDocuments) {
  EXPECT_THROW(parse_metadata("{"), ParseError);
  EXPECT_THROW(parse_metadata("[]"), ParseError);
  EXPECT_THROW(parse_metadata(R"({"abc": {}})"), ParseError);
  EXPECT_THROW(parse_metadata(R"({"5": {"ixps": "1"}})"), ParseError);
}

TEST(Metadata, SerializeRoundTrip) {
  const auto net = generate_synthetic_internet(small_params(), 2);
  EXPECT_EQ(parse_metadata(serialize_metadata(net.metadata)), net.metadata);
}
