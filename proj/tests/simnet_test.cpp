#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "hikeys/costmodel.hpp"
#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"
#include "hikeys/report.hpp"
#include "hikeys/simnet.hpp"

using namespace hikeys;
using namespace hikeys::simnet;
using protocol::MessageKind;
using protocol::Scope;

namespace {

std::vector<topology::NodeSite> line(std::size_t n, double spacing = 100.0) {
  std::vector<topology::NodeSite> out;
  for (NodeId id = 1; id <= n; ++id) out.push_back({id, {spacing * (id - 1), 0.0}, 150.0});
  return out;
}

Message data(NodeId src, Scope scope, std::size_t bits) {
  Message m;
  m.src = src;
  m.scope = scope;
  m.kind = MessageKind::Data;
  m.size_bits = bits;
  return m;
}

double sum_debits(const TranscriptEntry& e) {
  double s = 0.0;
  for (const auto& d : e.debits) s += d.joules;
  return s;
}

std::size_t count_role(const TranscriptEntry& e, std::initializer_list<EnergyRole> roles) {
  return std::count_if(e.debits.begin(), e.debits.end(), [&](const EnergyDebit& d) {
    return std::find(roles.begin(), roles.end(), d.role) != roles.end();
  });
}

}  // namespace

TEST(Energy, AdjacentUnicast) {
  const auto sites = line(2);
  Simulator sim(sites, {});
  EXPECT_EQ(sim.deliver(data(1, Scope::unicast(2), 64), {2}, {}), std::vector<NodeId>{2});
  const auto& e = sim.transcript().back();
  EXPECT_EQ(e.path, (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(count_role(e, {EnergyRole::Tx}), 1u);
  EXPECT_EQ(count_role(e, {EnergyRole::Rx}), 1u);
  EXPECT_EQ(e.debits.size(), 2u);
}

TEST(Energy, ThreeHopUnicast) {
  const auto sites = line(4);
  Simulator sim(sites, {});
  const std::size_t b = 1024;
  sim.deliver(data(1, Scope::unicast(4), b), {4}, {});
  const auto& e = sim.transcript().back();
  EXPECT_EQ(e.path, (std::vector<NodeId>{1, 2, 3, 4}));
  EXPECT_EQ(count_role(e, {EnergyRole::Tx, EnergyRole::RelayTx}), 3u);
  EXPECT_EQ(count_role(e, {EnergyRole::Rx, EnergyRole::RelayRx}), 3u);
  const double expected = (3 * 0.4 + 3 * 0.3) * b / 2'000'000.0;
  EXPECT_NEAR(sum_debits(e), expected, 1e-15);
  EXPECT_NEAR(sim.energy().total_spent(), expected, 1e-15);
}

TEST(Energy, BroadcastOneTxManyRx) {
  std::vector<topology::NodeSite> star{{1, {0, 0}, 150}};
  for (NodeId id = 2; id <= 6; ++id) star.push_back({id, {100.0 * ((id % 2) ? 1 : -1), 10.0 * id}, 150});
  Simulator sim(star, {});
  const std::vector<NodeId> audience{2, 3, 4, 5, 6};
  EXPECT_EQ(sim.deliver(data(1, Scope::cluster(1), 32), audience, {}), audience);
  const auto& e = sim.transcript().back();
  EXPECT_EQ(count_role(e, {EnergyRole::Tx}), 1u);
  EXPECT_EQ(count_role(e, {EnergyRole::Rx}), 5u);
}

TEST(Energy, DeadNodeStopsRelaying) {
  const auto sites = line(3);
  scenario::EnergyParams tiny;
  tiny.initial_joules = 1e-6;
  Simulator sim(sites, tiny);
  sim.deliver(data(1, Scope::unicast(3), 4096), {3}, {});
  EXPECT_TRUE(sim.energy().dead(2));
  EXPECT_EQ(sim.energy().at(2).remaining, 0.0);
  EXPECT_TRUE(sim.deliver(data(1, Scope::unicast(3), 8), {3}, {}).empty());
}

TEST(Energy, LedgerMatchesTranscript) {
  const auto sc = generator::random_scenario({1, 4, 8}, 5, 6);
  const auto r = run(sc);
  double per_entry = 0.0;
  for (const auto& e : r.transcript) per_entry += sum_debits(e);
  double per_node = 0.0;
  for (const auto& [id, ne] : r.report.energy) {
    per_node += ne.spent();
    EXPECT_NEAR(ne.remaining, sc.energy.initial_joules - ne.spent(), 1e-9);
  }
  EXPECT_NEAR(per_node, per_entry, 1e-9);
  EXPECT_NEAR(r.report.total_energy, per_entry, 1e-9);
}

TEST(Transcript, PathsAreRadioChains) {
  const auto sc = generator::random_scenario({2, 2, 4}, 2, 6);
  const auto r = run(sc);
  std::map<NodeId, topology::NodeSite> sites;
  for (const auto& s : sc.sites) sites[s.node_id] = s;
  for (const auto& ev : sc.events)
    if (ev.kind == scenario::EventKind::Join) sites[ev.node] = {ev.node, ev.position, ev.range};
  for (const auto& e : r.transcript) {
    if (e.message.scope.is_broadcast() || e.reached.empty()) continue;
    ASSERT_EQ(e.path.front(), e.message.src);
    ASSERT_EQ(e.path.back(), e.reached.front());
    for (std::size_t i = 1; i < e.path.size(); ++i) ASSERT_TRUE(topology::in_range(sites[e.path[i - 1]], sites[e.path[i]]));
  }
}

TEST(Run, Deterministic) {
  const auto sc = generator::random_scenario({2, 2, 8}, 7, 6);
  const auto a = run(sc);
  const auto b = run(sc);
  EXPECT_EQ(report::render_report(a.report), report::render_report(b.report));
  EXPECT_EQ(report::render_transcript(a.transcript), report::render_transcript(b.transcript));
}

TEST(Run, EmptyEventsIsSetupOnly) {
  generator::GeneratorOptions opts;
  opts.preset = {1, 2, 4};
  const auto r = run(generator::generate_scenario(opts));
  for (const auto& f : r.report.flows) EXPECT_EQ(f.cls, protocol::FlowClass::Setup);
  EXPECT_TRUE(r.report.convergence_issues.empty());
  EXPECT_GT(r.report.transcript_length, 0u);
}

TEST(Run, OneLeaveInSixteen) {
  const auto r = run(cost::crosscheck_scenario({2, 8, 16}, cost::EventClass::MemberLeave, 1));
  const auto& f = r.report.flows.back();
  EXPECT_EQ(f.cls, protocol::FlowClass::MemberLeave);
  EXPECT_EQ(f.billed_unicasts, 15u);
  // The initiator's own update is billed but never transmitted.
  EXPECT_EQ(r.report.counters.rekey_unicasts, 14u);
}

TEST(Run, ScenarioErrors) {
  scenario::Scenario sc;
  sc.sites = {{1, {0, 0}, 100}, {2, {400, 0}, 100}};
  EXPECT_THROW(run(sc), ScenarioError);
  sc.sites = {{1, {0, 0}, 100}, {2, {50, 0}, 100}};
  scenario::Event ev;
  ev.kind = scenario::EventKind::Leave;
  ev.node = 9;
  sc.events = {ev};
  EXPECT_THROW(run(sc), ScenarioError);
}

TEST(Audit, SecureCorpusIsClean) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = run(generator::random_scenario({2, 2, 4}, seed, 6));
    EXPECT_EQ(r.report.forward_violations, 0u);
    EXPECT_EQ(r.report.backward_violations, 0u);
  }
}

TEST(Audit, InsecureLeaveLeaksNewKey) {
  const auto sc = cost::crosscheck_scenario({1, 2, 8}, cost::EventClass::MemberLeave, 1);
  RunOptions insecure;
  insecure.insecure_variant = true;
  const auto r = run(sc, insecure);
  ASSERT_GE(r.report.forward_violations, 1u);
  const NodeId leaver = sc.events[0].node;
  EXPECT_NE(r.report.audit_violations.front().find("node " + std::to_string(leaver)), std::string::npos);
  EXPECT_EQ(r.report.backward_violations, 0u);
  std::size_t after = 0;
  for (const auto& e : r.transcript) {
    if (e.time < sc.events[0].time || e.path.empty() || e.message.src == leaver) continue;
    ++after;
    EXPECT_TRUE(std::count(e.observers.begin(), e.observers.end(), leaver)) << e.seq;
  }
  EXPECT_GT(after, 0u);
}

TEST(Audit, JoinerLacksOldClusterKey) {
  const auto sc = cost::crosscheck_scenario({1, 2, 8}, cost::EventClass::Join, 1);
  const auto r = run(sc);
  const crypto::DeterministicProvider provider;
  auto config = sc.protocol_config();
  config.seed = sc.seed;
  KnowledgeClosure closure(provider, config);
  const NodeId joiner = sc.events[0].node;
  closure.add_principal(joiner);
  for (const auto& e : r.transcript) closure.observe(e);
  const auto& flow = r.report.flows.back();
  ASSERT_EQ(flow.cls, protocol::FlowClass::Join);
  const auto fresh = flow.levels.at(0).new_key;
  auto old = fresh;
  old.epoch -= 1;
  EXPECT_TRUE(closure.of(joiner).knows(fresh));
  EXPECT_FALSE(closure.of(joiner).knows(old));
  EXPECT_EQ(r.report.backward_violations, 0u);
}

// Order-independent fixed point: feeding the transcript backwards must land
// on the same keys as the incremental in-order feed, on every prefix.
TEST(Closure, IncrementalEqualsScratch) {
  const auto sc = generator::random_scenario({1, 2, 4}, 3, 5);
  RunOptions opts;
  opts.insecure_variant = true;
  const auto r = run(sc, opts);
  const crypto::DeterministicProvider provider;
  auto config = sc.protocol_config();
  config.seed = sc.seed;
  std::set<NodeId> nodes;
  for (const auto& e : r.transcript) {
    nodes.insert(e.message.src);
    nodes.insert(e.observers.begin(), e.observers.end());
  }
  KnowledgeClosure incremental(provider, config);
  for (NodeId n : nodes) incremental.add_principal(n);
  const std::size_t stride = std::max<std::size_t>(1, r.transcript.size() / 40);
  for (std::size_t k = 1; k <= r.transcript.size(); ++k) {
    incremental.observe(r.transcript[k - 1]);
    if (k % stride && k != r.transcript.size()) continue;
    KnowledgeClosure scratch(provider, config);
    for (NodeId n : nodes) scratch.add_principal(n);
    for (std::size_t i = k; i-- > 0;) scratch.observe(r.transcript[i]);
    for (NodeId n : nodes) ASSERT_EQ(scratch.of(n).keys(), incremental.of(n).keys()) << "prefix " << k << " node " << n;
  }
}

TEST(Closure, MonotoneInPrefix) {
  const auto sc = generator::random_scenario({1, 2, 4}, 4, 5);
  const auto r = run(sc);
  const crypto::DeterministicProvider provider;
  auto config = sc.protocol_config();
  config.seed = sc.seed;
  KnowledgeClosure closure(provider, config);
  closure.add_principal(1);
  std::size_t known = 0;
  for (const auto& e : r.transcript) {
    closure.observe(e);
    ASSERT_GE(closure.of(1).keys().size(), known);
    known = closure.of(1).keys().size();
  }
  EXPECT_GT(known, 0u);
}

TEST(Sweep, IncreasingAndValidated) {
  generator::GeneratorOptions opts;
  opts.preset = {1, 1, 8};
  const auto sc = generator::generate_scenario(opts);
  const auto rows = energy_sweep(sc, {1024, 16, 32, 48, 64, 128, 152, 180, 200, 256, 512});
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows.front().size_bits, 16u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].total_energy, rows[i - 1].total_energy);
  EXPECT_EQ(energy_sweep(sc, {64}).size(), 1u);
  EXPECT_THROW(energy_sweep(sc, {}), ArgumentError);
}
