#include <gtest/gtest.h>

#include <random>

#include "hikeys/errors.hpp"
#include "hikeys/generator.hpp"
#include "hikeys/report.hpp"
#include "hikeys/scenario.hpp"
#include "hikeys/simnet.hpp"

using namespace hikeys;
using namespace hikeys::scenario;

namespace {

const char* kSmall = R"(format: hikeys-scenario/1
seed: 4
protocol:
  random_width: 8
  hash: sha256
sites:
  - {id: 1, x: 0, y: 0, range: 120}
  - {id: 2, x: 100, y: 0, range: 120}
  - {id: 3, x: 50, y: 60, range: 120}
events:
  - {time: 2, kind: leave, node: 3}
  - {time: 1, kind: join, node: 9, x: 40, y: -50, range: 120}
  - {time: 3, kind: send, src: 1, dst: 9, size_bits: 64}
message_size_sweep: [16, 32]
)";

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ScenarioFile, ParsesFields) {
  const auto s = parse_scenario(kSmall);
  EXPECT_EQ(s.seed, 4u);
  EXPECT_EQ(s.random_width, 8u);
  EXPECT_EQ(s.hash, HashId::Sha256);
  ASSERT_EQ(s.sites.size(), 3u);
  EXPECT_EQ(s.sites[1].position.x, 100.0);
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_EQ(s.events[1].kind, EventKind::Join);
  EXPECT_EQ(s.events[1].position.y, -50.0);
  EXPECT_EQ(s.events[2].size_bits, 64u);
  EXPECT_EQ(s.message_size_sweep, (std::vector<std::size_t>{16, 32}));
  EXPECT_EQ(s.energy, EnergyParams{});
}

TEST(ScenarioFile, RoundTripIsLossless) {
  EXPECT_EQ(parse_scenario(serialize_scenario(parse_scenario(kSmall))), parse_scenario(kSmall));
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = generator::random_scenario({2, 2, 4}, seed, 6);
    const auto text = serialize_scenario(s);
    EXPECT_EQ(parse_scenario(text), s);
    EXPECT_EQ(serialize_scenario(parse_scenario(text)), text);
  }
}

TEST(ScenarioFile, DoublesRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.4), "0.4");
}

TEST(ScenarioFile, ErrorsCarryLine) {
  std::string unknown = kSmall;
  unknown.replace(unknown.find("seed: 4"), 7, "sead: 4");
  EXPECT_EQ(error_of(unknown).rfind("line 2:", 0), 0u) << error_of(unknown);

  std::string bad_kind = kSmall;
  bad_kind.replace(bad_kind.find("kind: leave"), 11, "kind: fly");
  EXPECT_EQ(error_of(bad_kind).rfind("line 11:", 0), 0u) << error_of(bad_kind);

  std::string stray = kSmall;
  stray.replace(stray.find("kind: leave, node: 3"), 20, "kind: leave, node: 3, src: 1");
  EXPECT_EQ(error_of(stray).rfind("line 11:", 0), 0u) << error_of(stray);

  EXPECT_EQ(error_of("seed: [1\n").rfind("line ", 0), 0u);
  EXPECT_NE(error_of("format: other/2\n"), "");
  EXPECT_NE(error_of(std::string(kSmall) + "bogus: 1\n"), "");

  std::string width = kSmall;
  width.replace(width.find("random_width: 8"), 15, "random_width: 12");
  EXPECT_NE(error_of(width), "");
}

TEST(Generator, CountsAndDeterminism) {
  generator::GeneratorOptions opts;
  opts.preset = {2, 8, 16};
  opts.seed = 5;
  const auto a = serialize_scenario(generator::generate_scenario(opts));
  EXPECT_EQ(a, serialize_scenario(generator::generate_scenario(opts)));
  // 16 clusters of 16 key holders; each of the 15 gateways sits in two of them.
  EXPECT_EQ(parse_scenario(a).sites.size(), 16u * 16u - 15u);
  EXPECT_EQ(generator::generate_scenario(opts).max_clusters_per_group, 8u);
}

TEST(Generator, RandomScenarioStaysConnected) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto s = generator::random_scenario({1, 4, 8}, seed, 6);
    std::size_t membership = 0;
    for (const auto& e : s.events) membership += e.kind != EventKind::Send;
    EXPECT_EQ(membership, 6u);
    const auto r = simnet::run(s);
    EXPECT_TRUE(r.report.failed_events.empty());
    EXPECT_TRUE(r.report.convergence_issues.empty());
  }
}

TEST(Report, RoundTrip) {
  const auto r = simnet::run(generator::random_scenario({2, 2, 4}, 3, 6));
  const auto text = report::render_report(r.report);
  const auto back = report::parse_report(text);
  EXPECT_EQ(back, r.report);
  EXPECT_EQ(report::render_report(back), text);
  EXPECT_THROW(report::parse_report("format: nope\n"), ScenarioError);
}

TEST(Report, TranscriptLines) {
  const auto r = simnet::run(generator::random_scenario({1, 2, 4}, 3, 5));
  const auto dump = report::render_transcript(r.transcript);
  EXPECT_EQ(static_cast<std::size_t>(std::count(dump.begin(), dump.end(), '\n')), r.transcript.size());
  EXPECT_EQ(dump.rfind("{\"seq\":", 0), 0u);
}
