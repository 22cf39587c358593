#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"
#include "hikeys/topology.hpp"

using namespace hikeys;
using namespace hikeys::topology;

namespace {

AdjacencyGraph graph_of(std::initializer_list<std::pair<NodeId, NodeId>> edges, std::initializer_list<NodeId> nodes = {}) {
  AdjacencyGraph g;
  for (NodeId n : nodes) g.add_node(n);
  for (auto [a, b] : edges) g.add_edge(a, b);
  return g;
}

}  // namespace

TEST(Adjacency, RangeRule) {
  const std::vector<NodeSite> near{{1, {0, 0}, 250}, {2, {10, 0}, 250}};
  EXPECT_EQ(build_adjacency(near).edge_count(), 1u);
  const std::vector<NodeSite> far{{1, {0, 0}, 250}, {2, {400, 0}, 250}};
  EXPECT_EQ(build_adjacency(far).edge_count(), 0u);
  const std::vector<NodeSite> asym{{1, {0, 0}, 300}, {2, {260, 0}, 250}};
  EXPECT_EQ(build_adjacency(asym).edge_count(), 0u);
  const std::vector<NodeSite> one{{1, {0, 0}, 250}};
  EXPECT_EQ(build_adjacency(one).edge_count(), 0u);
}

TEST(Adjacency, Errors) {
  const std::vector<NodeSite> dup{{1, {0, 0}, 250}, {1, {1, 0}, 250}};
  EXPECT_THROW(build_adjacency(dup), ArgumentError);
  const std::vector<NodeSite> zero{{1, {0, 0}, 0}};
  EXPECT_THROW(build_adjacency(zero), ArgumentError);
}

TEST(Election, Star) {
  const auto g = graph_of({{3, 1}, {3, 2}, {3, 4}, {3, 5}, {3, 6}});
  EXPECT_EQ(elect_cluster_heads(g), std::set<NodeId>{3});
  const auto h = form_clusters(g, {3});
  ASSERT_EQ(h.clusters.size(), 1u);
  EXPECT_EQ(h.clusters.at(1).members.size(), 6u);
}

TEST(Election, TwoTrianglesByExhaustiveRule) {
  const auto g = graph_of({{1, 2}, {2, 3}, {1, 3}, {4, 5}, {5, 6}, {4, 6}});
  // Every degree is 2; the smallest uncovered id wins each round.
  EXPECT_EQ(elect_cluster_heads(g), (std::set<NodeId>{1, 4}));
}

TEST(Election, IsolatedNode) {
  EXPECT_EQ(elect_cluster_heads(graph_of({}, {8})), std::set<NodeId>{8});
}

TEST(Election, InsertionOrderIndependent) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId a = 1; a <= 20; ++a)
      for (NodeId b = a + 1; b <= 20; ++b)
        if (rng() % 6 == 0) edges.push_back({a, b});
    AdjacencyGraph g1, g2;
    for (NodeId n = 1; n <= 20; ++n) g1.add_node(n);
    for (auto [a, b] : edges) g1.add_edge(a, b);
    std::shuffle(edges.begin(), edges.end(), rng);
    for (NodeId n = 20; n >= 1; --n) g2.add_node(n);
    for (auto [a, b] : edges) g2.add_edge(b, a);
    EXPECT_EQ(elect_cluster_heads(g1), elect_cluster_heads(g2));
  }
}

TEST(Clusters, GatewayJoinsSmallestHead) {
  const auto g = graph_of({{2, 5}, {9, 5}, {2, 20}, {9, 21}});
  const auto h = form_clusters(g, {2, 9});
  const auto c = h.cluster_of(5);
  ASSERT_TRUE(c);
  EXPECT_EQ(h.clusters.at(*c).head, 2u);
  EXPECT_TRUE(h.clusters.at(*c).gateways.count(5));
  ASSERT_EQ(h.links.size(), 1u);
  EXPECT_EQ(h.links[0].gateway, 5u);
  EXPECT_EQ(h.clusters.at(h.links[0].foreign).head, 9u);
  EXPECT_EQ(h.clusters.at(*h.cluster_of(20)).gateways.count(20), 0u);
}

TEST(Clusters, PathAroundHead) {
  const auto g = graph_of({{1, 2}, {2, 3}});
  const auto h = form_clusters(g, {2});
  ASSERT_EQ(h.clusters.size(), 1u);
  EXPECT_EQ(h.clusters.at(1).members, (std::set<NodeId>{1, 2, 3}));
  EXPECT_TRUE(h.clusters.at(1).gateways.empty());
}

TEST(Clusters, NoAdjacentHeadBecomesSingleton) {
  const auto g = graph_of({{1, 2}}, {7});
  const auto h = form_clusters(g, {1});
  EXPECT_EQ(h.clusters.size(), 2u);
  EXPECT_TRUE(h.is_head(7));
}

TEST(Groups, CountsAndChain) {
  ClusterOverlay full;
  std::map<ClusterId, NodeId> heads;
  for (ClusterId a = 1; a <= 16; ++a) {
    heads[a] = a;
    for (ClusterId b = 1; b <= 16; ++b)
      if (a != b) full[a].insert(b);
  }
  const auto parts = partition_groups(full, heads, 8);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size(), 8u);
  EXPECT_EQ(parts[1].size(), 8u);

  EXPECT_EQ(partition_groups({{1, {}}}, {{1, 1}}, 8).size(), 1u);

  ClusterOverlay chain;
  std::map<ClusterId, NodeId> chain_heads;
  for (ClusterId c = 1; c <= 5; ++c) {
    chain_heads[c] = c;
    chain[c];
    if (c > 1) chain[c].insert(c - 1);
    if (c < 5) chain[c].insert(c + 1);
  }
  const auto chained = partition_groups(chain, chain_heads, 2);
  ASSERT_EQ(chained.size(), 3u);
  EXPECT_EQ(chained[0], (std::vector<ClusterId>{1, 2}));
  EXPECT_EQ(chained[1], (std::vector<ClusterId>{3, 4}));
  EXPECT_EQ(chained[2], (std::vector<ClusterId>{5}));
}

TEST(Leaders, SmallestIds) {
  Hierarchy h;
  h.clusters[1] = {1, 12, {12}, {}};
  h.clusters[2] = {2, 3, {3}, {}};
  h.clusters[3] = {3, 40, {40}, {}};
  h.clusters[4] = {4, 7, {7}, {}};
  h.groups[1] = {1, 0, {1, 2, 3}};
  h.groups[2] = {2, 0, {4}};
  elect_leaders(h);
  EXPECT_EQ(h.groups.at(1).leader, 3u);
  EXPECT_EQ(h.groups.at(2).leader, 7u);
  EXPECT_EQ(h.network_leader, 3u);

  Hierarchy single;
  single.clusters[1] = {1, 5, {5}, {}};
  single.groups[1] = {1, 0, {1}};
  elect_leaders(single);
  EXPECT_EQ(single.network_leader, 5u);
}

// Random connected fields of 15..60 nodes.
TEST(Initialize, InvariantsOverRandomFields) {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 100; ++seed) {
    rng.seed(seed);
    std::vector<NodeSite> sites;
    const std::size_t n = 15 + rng() % 46;
    std::uniform_real_distribution<double> pos(0.0, 500.0);
    for (NodeId id = 1; id <= n; ++id) sites.push_back({id, {pos(rng), pos(rng)}, 150.0});
    const auto init = initialize(sites, 1 + rng() % 8);
    if (!init.graph.connected()) continue;
    ++checked;
    EXPECT_TRUE(check_hierarchy(init.hierarchy, &init.graph).empty()) << "seed " << seed;
    std::size_t covered = 0;
    for (const auto& [cid, c] : init.hierarchy.clusters) {
      covered += c.members.size();
      for (NodeId m : c.members)
        if (m != c.head) EXPECT_TRUE(init.graph.adjacent(m, c.head));
      for (NodeId gw : c.gateways) {
        std::size_t heads = 0;
        for (NodeId nb : init.graph.neighbors(gw)) heads += init.hierarchy.is_head(nb);
        EXPECT_GE(heads, 2u);
      }
    }
    EXPECT_EQ(covered, n);
  }
}

TEST(Generator, PresetsRealizeHierarchy) {
  for (scenario::HierarchyPreset p : {scenario::HierarchyPreset{2, 8, 16}, {4, 4, 16}, {8, 4, 8}, {16, 4, 4},
                                      {32, 2, 4}, {1, 1, 1}, {1, 2, 4}}) {
    generator::GeneratorOptions opts;
    opts.preset = p;
    opts.seed = 3;
    const auto layout = generator::generate_layout(opts);
    const auto init = initialize(layout.sites, p.clusters_per_group);
    const std::size_t k = p.groups * p.clusters_per_group;
    EXPECT_EQ(layout.sites.size(), k * p.cluster_size - (k - 1));
    EXPECT_EQ(init.hierarchy.clusters.size(), k);
    EXPECT_EQ(init.hierarchy.groups.size(), p.groups);
    for (const auto& [cid, c] : init.hierarchy.clusters)
      EXPECT_EQ(init.hierarchy.key_holders(cid).size(), p.cluster_size);
    EXPECT_TRUE(check_hierarchy(init.hierarchy, &init.graph).empty());
  }
}

TEST(Generator, SingleNodeAndInfeasibleArea) {
  generator::GeneratorOptions opts;
  opts.preset = {1, 1, 1};
  EXPECT_EQ(generator::generate_layout(opts).sites.size(), 1u);
  opts.preset = {8, 8, 8};
  opts.area = 20.0;
  EXPECT_THROW(generator::generate_layout(opts), ScenarioError);
}
