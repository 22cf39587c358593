#include <gtest/gtest.h>

#include <set>

#include "hikeys/costmodel.hpp"
#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"
#include "hikeys/protocol.hpp"
#include "hikeys/simnet.hpp"

using namespace hikeys;
using namespace hikeys::protocol;

namespace {

std::vector<topology::NodeSite> layout_of(const scenario::HierarchyPreset& p, std::uint64_t seed) {
  generator::GeneratorOptions opts;
  opts.preset = p;
  opts.seed = seed;
  return generator::generate_layout(opts).sites;
}

ProtocolConfig config_for(const scenario::HierarchyPreset& p, std::size_t w) {
  ProtocolConfig c;
  c.random_width = w;
  c.max_clusters_per_group = p.clusters_per_group;
  c.seed = 17;
  return c;
}

struct Net {
  explicit Net(scenario::HierarchyPreset p, std::uint64_t seed = 1, std::size_t w = 16)
      : preset(p), sites(layout_of(p, seed)), sim(sites, {}), engine(config_for(p, w), provider, sim) {
    const auto init = topology::initialize(sites, p.clusters_per_group);
    engine.bootstrap(init.hierarchy, sites);
  }

  const topology::Hierarchy& h() const { return engine.hierarchy(); }

  NodeId plain_member(ClusterId c) const {
    for (NodeId m : h().clusters.at(c).members)
      if (m != h().clusters.at(c).head && !h().is_gateway(m)) return m;
    return 0;
  }

  std::size_t count(MessageKind kind, std::uint64_t flow_id = 0) const {
    std::size_t n = 0;
    for (const auto& e : sim.transcript())
      n += e.message.kind == kind && (flow_id == 0 || e.message.flow_id == flow_id);
    return n;
  }

  void expect_quiescent() const {
    EXPECT_TRUE(engine.check_convergence().empty()) << engine.check_convergence().front();
    EXPECT_TRUE(topology::check_hierarchy(h()).empty());
  }

  scenario::HierarchyPreset preset;
  std::vector<topology::NodeSite> sites;
  simnet::Simulator sim;
  crypto::DeterministicProvider provider;
  Engine engine;
};

void expect_one_round(const FlowRecord& rec) {
  EXPECT_EQ(rec.rounds, 1u);
  for (const auto& l : rec.levels) EXPECT_EQ(l.depth, 1u);
}

std::string sha1_of_concat(const std::vector<BitString>& parts) {
  BitString joined;
  for (const auto& p : parts) joined.append(p);
  return keycore::hash_contribution(joined, HashId::Sha1).to_string();
}

}  // namespace

TEST(Agreement, SingleNodeCluster) {
  Net net({1, 1, 1});
  EXPECT_EQ(net.count(MessageKind::Contribution), 0u);
  const auto& st = net.engine.state(1);
  const auto* gk = st.find_key(KeyKind::ClusterKey, 1);
  ASSERT_NE(gk, nullptr);
  EXPECT_EQ(gk->key.to_string(), sha1_of_concat({st.own_hr}));
}

TEST(Agreement, FourNodesMatchOracle) {
  Net net({1, 1, 4});
  const auto& members = net.h().clusters.at(1).members;
  ASSERT_EQ(members.size(), 4u);
  EXPECT_EQ(net.count(MessageKind::Contribution), 4u * 3u);
  std::vector<BitString> hrs;
  for (NodeId m : members) hrs.push_back(net.engine.state(m).own_hr);  // set iterates by id
  const std::string oracle = sha1_of_concat(hrs);
  for (NodeId m : members) EXPECT_EQ(net.engine.state(m).find_key(KeyKind::ClusterKey, 1)->key.to_string(), oracle);
  net.expect_quiescent();
}

TEST(Agreement, OverlayWrapCounts) {
  Net net({2, 4, 4});
  std::map<std::pair<KeyKind, std::uint32_t>, std::size_t> wraps;
  for (const auto& e : net.sim.transcript()) {
    if (e.message.kind == MessageKind::KeyWrap && e.message.about && e.message.about->kind != KeyKind::ClusterKey)
      ++wraps[{e.message.about->kind, e.message.about->scope}];
  }
  EXPECT_EQ((wraps[{KeyKind::ClusterHeadKey, 1}]), 3u);
  EXPECT_EQ((wraps[{KeyKind::ClusterHeadKey, 2}]), 3u);
  EXPECT_EQ((wraps[{KeyKind::GroupLeaderKey, 0}]), 1u);
  net.expect_quiescent();
}

TEST(PairKey, FreshAndDistinct) {
  Net net({1, 3, 4});
  ASSERT_GE(net.h().links.size(), 2u);
  const auto& l0 = net.h().links[0];
  const auto& l1 = net.h().links[1];
  const NodeId peer0 = net.h().clusters.at(l0.foreign).head;
  const NodeId peer1 = net.h().clusters.at(l1.foreign).head;
  const auto k0 = net.engine.gateway_pair_key(l0.gateway, peer0);
  const auto k1 = net.engine.gateway_pair_key(l1.gateway, peer1);
  EXPECT_NE(k0, k1);
  EXPECT_NE(net.engine.gateway_pair_key(l0.gateway, peer0), k0);
}

TEST(Join, OneBroadcastAndWrapToJoiner) {
  const auto sc = cost::crosscheck_scenario({2, 8, 16}, cost::EventClass::Join, 1);
  ASSERT_EQ(sc.events.size(), 1u);
  Net net({2, 8, 16});
  const auto& ev = sc.events[0];
  const auto rec = net.engine.handle_join({ev.node, ev.position, ev.range});
  EXPECT_FALSE(rec.rejected);
  EXPECT_EQ(rec.billed_broadcasts, 1u);
  EXPECT_EQ(rec.billed_unicasts, 0u);
  ASSERT_EQ(rec.levels.size(), 1u);
  EXPECT_EQ(rec.levels[0].continuing, 16u);
  EXPECT_EQ(rec.levels[0].newcomers, 1u);
  EXPECT_EQ(net.count(MessageKind::RekeyJoin, rec.flow_id), 1u);
  const auto to_joiner = [&] {
    std::size_t n = 0;
    for (const auto& e : net.sim.transcript())
      n += e.message.flow_id == rec.flow_id && e.message.kind == MessageKind::KeyWrap &&
           e.message.scope == Scope::unicast(ev.node);
    return n;
  }();
  EXPECT_EQ(to_joiner, 1u);
  expect_one_round(rec);
  net.expect_quiescent();
}

TEST(Join, ForgedCertificateRejected) {
  const auto sc = cost::crosscheck_scenario({1, 2, 4}, cost::EventClass::Join, 1);
  Net net({1, 2, 4});
  const auto before = net.engine.issued_keys().size();
  const auto& ev = sc.events[0];
  const auto rec = net.engine.handle_join({ev.node, ev.position, ev.range}, "mallory");
  EXPECT_TRUE(rec.rejected);
  EXPECT_EQ(rec.billed_broadcasts + rec.billed_unicasts, 0u);
  EXPECT_EQ(net.count(MessageKind::RekeyJoin), 0u);
  EXPECT_EQ(net.engine.issued_keys().size(), before);
  EXPECT_FALSE(net.h().cluster_of(ev.node));
  net.expect_quiescent();
}

TEST(Leave, MemberSixteen) {
  Net net({2, 8, 16});
  const NodeId m = net.plain_member(1);
  ASSERT_NE(m, 0u);
  const auto rec = net.engine.handle_leave(m);
  EXPECT_EQ(rec.cls, FlowClass::MemberLeave);
  EXPECT_EQ(rec.billed_broadcasts, 0u);
  EXPECT_EQ(rec.billed_unicasts, 15u);
  EXPECT_EQ(net.count(MessageKind::RekeyLeave, rec.flow_id), 14u);
  expect_one_round(rec);
  net.expect_quiescent();
}

TEST(Leave, AdjacentEqualsLeavingIsProtocolError) {
  Net net({1, 1, 4});
  const NodeId m = net.plain_member(1);
  EXPECT_THROW(net.engine.handle_leave_member(m, m), ProtocolError);
}

TEST(Leave, GatewayBothClusters) {
  Net net({1, 2, 16});
  const auto link = net.h().links.front();
  const auto rec = net.engine.handle_leave(link.gateway);
  EXPECT_EQ(rec.cls, FlowClass::GatewayLeave);
  EXPECT_EQ(rec.billed_unicasts, 30u);
  expect_one_round(rec);
  std::size_t serving = 0;
  for (const auto& l : net.h().links)
    serving += (l.home == link.home && l.foreign == link.foreign) || (l.home == link.foreign && l.foreign == link.home);
  EXPECT_EQ(serving, 1u);
  net.expect_quiescent();
}

TEST(Leave, GatewayMovesIntoOneCluster) {
  Net net({1, 2, 16});
  const auto link = net.h().links.front();
  const auto rec = net.engine.handle_leave(link.gateway, link.foreign);
  EXPECT_EQ(rec.billed_unicasts, 15u);
  EXPECT_EQ(rec.levels.size(), 1u);
  net.expect_quiescent();
}

TEST(Leave, ClusterHead) {
  Net net({1, 8, 16});
  const NodeId head = net.h().clusters.at(8).head;
  const auto rec = net.engine.handle_leave(head);
  EXPECT_EQ(rec.cls, FlowClass::HeadLeave);
  EXPECT_EQ(rec.billed_unicasts, 8u + 16u - 2u);
  expect_one_round(rec);
  net.expect_quiescent();
}

TEST(Leave, GroupLeaderEightByEightBySixteen) {
  Net net({8, 8, 16});
  const auto rec = net.engine.handle_leave(net.h().network_leader);
  EXPECT_EQ(rec.cls, FlowClass::LeaderLeave);
  EXPECT_EQ(rec.billed_unicasts, 29u);
  expect_one_round(rec);
  net.expect_quiescent();
}

TEST(Rekey, PayloadIsTwoW) {
  for (std::size_t w : {8u, 16u, 32u}) {
    for (int event = 0; event < 3; ++event) {
      Net net({1, 2, 5}, 1, w);  // P >= 5 keeps a bridge member, so no leave partitions the field
      const NodeId leaving = event == 0 ? net.plain_member(2)
                             : event == 1 ? net.h().clusters.at(2).head
                                          : net.h().network_leader;
      net.engine.handle_leave(leaving);
      std::size_t rekeys = 0;
      for (const auto& e : net.sim.transcript()) {
        if (e.message.kind != MessageKind::RekeyJoin && e.message.kind != MessageKind::RekeyLeave) continue;
        ++rekeys;
        EXPECT_EQ(e.message.size_bits, 2 * w);
        if (e.message.kind == MessageKind::RekeyLeave) {
          ASSERT_TRUE(e.message.sealed);
          EXPECT_EQ(e.message.sealed->context.kind, crypto::ContextKind::UnderPublicKeyOf);
        }
      }
      EXPECT_GT(rekeys, 0u);
      net.expect_quiescent();
    }
  }
}

TEST(Routing, HopCounts) {
  Net net({2, 2, 4});
  // Chain 1-2-3-4; groups {1,2} and {3,4}.
  const NodeId a = net.plain_member(2);
  const NodeId a2 = [&] {
    for (NodeId m : net.h().clusters.at(2).members)
      if (m != a && m != net.h().clusters.at(2).head) return m;
    return NodeId{0};
  }();
  const NodeId b = net.plain_member(4);
  ASSERT_NE(a, 0u);
  ASSERT_NE(a2, 0u);
  ASSERT_NE(b, 0u);
  EXPECT_EQ(net.engine.plan_route(a, a2).hops.size(), 1u);
  const auto gw = net.h().links.front();
  const NodeId left = net.plain_member(gw.home);
  const NodeId right = net.plain_member(gw.foreign);
  const auto adjacent = net.engine.plan_route(left, right);
  ASSERT_EQ(adjacent.hops.size(), 2u);
  EXPECT_EQ(adjacent.hops[0].to, gw.gateway);
  const auto far = net.engine.route(a, b, 256);
  ASSERT_EQ(far.hops.size(), 5u);
  EXPECT_EQ(far.hops[2].key.kind, KeyKind::GroupLeaderKey);
  EXPECT_EQ(net.count(MessageKind::Data), 5u);
}

TEST(Routing, DepartedEndpoint) {
  Net net({1, 1, 4});
  const NodeId m = net.plain_member(1);
  net.engine.handle_leave(m);
  EXPECT_THROW(net.engine.plan_route(m, 1), RoutingError);
}

TEST(Roles, OverlayKeysFollowRoles) {
  Net net({2, 2, 4});
  for (const auto& [id, st] : net.engine.states()) {
    const bool head = net.h().is_head(id);
    const bool leader = net.h().is_group_leader(id);
    bool has_head_key = false, has_leader_key = false;
    for (const auto& [k, mat] : st.keys) {
      has_head_key |= k.first == KeyKind::ClusterHeadKey;
      has_leader_key |= k.first == KeyKind::GroupLeaderKey;
    }
    EXPECT_EQ(has_head_key, head) << id;
    EXPECT_EQ(has_leader_key, leader) << id;
  }
  EXPECT_EQ(role_of(net.h(), net.h().network_leader), Role::NetworkLeader);
}
