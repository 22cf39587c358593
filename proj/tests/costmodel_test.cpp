#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hikeys/costmodel.hpp"
#include "hikeys/errors.hpp"
#include "hikeys/simnet.hpp"

using namespace hikeys;
using namespace hikeys::cost;

namespace {

using Triple = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

Triple triple_of(const std::vector<CostRow>& rows, const std::string& scheme, const std::string& event = "") {
  for (const auto& r : rows)
    if (r.scheme == scheme && (event.empty() || r.event == event)) return {r.rounds, r.broadcasts, r.unicasts};
  ADD_FAILURE() << "missing row " << scheme << " " << event;
  return {};
}

// Closed forms written out independently of the library.
std::map<std::string, Triple> ours(std::int64_t M, std::int64_t P, std::int64_t G) {
  return {{"join", {1, 1, 0}},
          {"cl-leave", {1, 0, P - 1}},
          {"gateway-leave", {1, 0, 2 * (P - 1)}},
          {"ch-leave", {1, 0, M + P - 2}},
          {"gl-leave", {1, 0, G + P + M - 3}}};
}

}  // namespace

TEST(CostTable, FirstPreset) {
  const auto rows = cost_table({256, 8, 16, 2});
  EXPECT_EQ(triple_of(rows, "BD"), Triple(3, 512, 0));
  EXPECT_EQ(triple_of(rows, "GDH"), Triple(256, 256, 255));
  EXPECT_EQ(triple_of(rows, "D-LKH"), Triple(3, 1, 256));
  EXPECT_EQ(triple_of(rows, "D-OFT"), Triple(8, 0, 16));
  EXPECT_EQ(triple_of(rows, "CRTDH"), Triple(1, 1, 0));
  EXPECT_EQ(triple_of(rows, "Modified CRTDH"), Triple(1, 1, 0));
  EXPECT_EQ(triple_of(rows, "Ours", "join"), Triple(1, 1, 0));
  EXPECT_EQ(triple_of(rows, "Ours", "cl-leave"), Triple(1, 0, 15));
  EXPECT_EQ(triple_of(rows, "Ours", "gateway-leave"), Triple(1, 0, 30));
  EXPECT_EQ(triple_of(rows, "Ours", "ch-leave"), Triple(1, 0, 22));
  EXPECT_EQ(triple_of(rows, "Ours", "gl-leave"), Triple(1, 0, 23));
}

TEST(CostTable, LeaderLeaveAtEightGroups) {
  EXPECT_EQ(triple_of(cost_table({1024, 8, 16, 8}), "Ours", "gl-leave"), Triple(1, 0, 29));
}

TEST(CostTable, OursMatchesClosedFormsEverywhere) {
  for (std::int64_t M = 1; M <= 9; ++M)
    for (std::int64_t P = 1; P <= 20; ++P)
      for (std::int64_t G = 1; G <= 9; ++G) {
        const auto rows = cost_table({G * M * P, M, P, G});
        for (const auto& [event, t] : ours(M, P, G)) ASSERT_EQ(triple_of(rows, "Ours", event), t);
      }
}

TEST(CostTable, DoftRoundsUpLog) {
  const auto rows = cost_table({100, 1, 100, 1});
  const auto l = static_cast<std::int64_t>(std::ceil(std::log2(100.0)));
  EXPECT_EQ(triple_of(rows, "D-OFT"), Triple(l, 0, 2 * l));
}

TEST(CostTable, NonPositiveRejected) {
  EXPECT_THROW(cost_table({0, 8, 16, 2}), ArgumentError);
  EXPECT_THROW(cost_table({256, 8, -1, 2}), ArgumentError);
  EXPECT_THROW(receiver_counts({256, 0, 16, 2}), ArgumentError);
}

TEST(Receivers, FirstPresetWithDeltas) {
  const auto rows = receiver_counts({256, 8, 16, 2});
  std::map<std::string, ReceiverRow> by;
  for (const auto& r : rows) by[r.event] = r;
  EXPECT_EQ(by["join"].hierarchical, 15);
  EXPECT_EQ(by["join"].flat, 256);
  EXPECT_EQ(by["cl-leave"].hierarchical, 15);
  EXPECT_EQ(by["cl-leave"].delta, 0);
  EXPECT_EQ(by["ch-leave"].hierarchical, 22);
  EXPECT_EQ(by["ch-leave"].published, 32);
  EXPECT_EQ(by["ch-leave"].delta, 10);
  EXPECT_EQ(by["gl-leave"].published, 34);
  EXPECT_EQ(by["gl-leave"].delta, 34 - 23);
  EXPECT_FALSE(by["gateway-leave"].published);
}

TEST(Receivers, HierarchyBeatsFlatOnReferenceLayouts) {
  for (const auto& entry : published_receivers()) {
    const auto [N, M, P, G] = entry.first;
    for (const auto& r : receiver_counts({N, M, P, G})) {
      EXPECT_LT(r.hierarchical, r.flat) << r.event;
      EXPECT_EQ(r.flat, 256);
    }
  }
}

TEST(Receivers, UnpublishedRowHasNoDelta) {
  for (const auto& r : receiver_counts({64, 2, 8, 4})) {
    EXPECT_FALSE(r.published);
    EXPECT_FALSE(r.delta);
  }
}

TEST(Render, TextAndCsv) {
  const CostParams p{256, 8, 16, 2};
  const auto text = render_text(p);
  EXPECT_NE(text.find("delta: ch-leave published 32, formula gives 22"), std::string::npos);
  EXPECT_EQ(text.find("warning"), std::string::npos);
  EXPECT_NE(render_text({100, 8, 16, 2}).find("warning: N=100 differs from G*M*P=256"), std::string::npos);

  std::istringstream csv(render_csv(p));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "scheme,event,rounds,broadcasts,unicasts,receivers,paper_value,delta");
  bool saw = false;
  while (std::getline(csv, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
    saw |= line == "Ours,cl-leave,1,0,15,15,15,0";
  }
  EXPECT_TRUE(saw);
}

TEST(Crosscheck, CompliantAndOffByOne) {
  const auto r = simnet::run(crosscheck_scenario({2, 8, 16}, EventClass::MemberLeave, 1));
  const CostParams p{256, 8, 16, 2};
  for (const auto& res : crosscheck(r.report, p)) {
    if (res.cls == EventClass::MemberLeave) {
      EXPECT_TRUE(res.exercised);
      EXPECT_TRUE(res.pass) << res.message;
    } else {
      EXPECT_FALSE(res.exercised);
    }
  }
  auto broken = r.report;
  for (auto& f : broken.flows)
    if (f.cls == protocol::FlowClass::MemberLeave) --f.billed_unicasts;
  const auto res = crosscheck(broken, p);
  const auto& cl = res[1];
  ASSERT_EQ(cl.cls, EventClass::MemberLeave);
  EXPECT_FALSE(cl.pass);
  EXPECT_EQ(cl.message.rfind("cl-leave: expected 15, observed 14", 0), 0u) << cl.message;
}

TEST(Crosscheck, EveryPresetEveryClass) {
  const std::vector<CostParams> presets{{256, 8, 16, 2}, {256, 4, 16, 4}, {256, 4, 8, 8}, {256, 4, 4, 16}, {256, 2, 4, 32}};
  for (const auto& p : presets) {
    for (EventClass c : kEventClasses) {
      const auto r = simnet::run(crosscheck_scenario({std::size_t(p.G), std::size_t(p.M), std::size_t(p.P)}, c, 1));
      EXPECT_TRUE(r.report.convergence_issues.empty());
      const auto res = crosscheck(r.report, p)[static_cast<std::size_t>(c)];
      EXPECT_TRUE(res.exercised && res.pass) << res.message;
    }
  }
}
