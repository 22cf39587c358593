#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hikeys/protocol.hpp"
#include "hikeys/topology.hpp"

namespace hikeys::scenario {

inline constexpr const char* kFormatTag = "hikeys-scenario/1";

struct EnergyParams {
  double tx_power = 0.4;        // W
  double rx_power = 0.3;        // W
  double initial_joules = 100.0;
  double bitrate = 2'000'000.0;  // bits/s
  bool operator==(const EnergyParams&) const = default;
};

/// G groups of M clusters of P key holders.
struct HierarchyPreset {
  std::size_t groups = 1;
  std::size_t clusters_per_group = 1;
  std::size_t cluster_size = 8;
  bool operator==(const HierarchyPreset&) const = default;
};

enum class EventKind { Join, Leave, Send };
std::string_view to_string(EventKind kind);

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Send;
  // join / leave
  NodeId node = 0;
  topology::Position position;
  double range = 0.0;
  std::string issuer;                       // join: certificate issuer override
  std::optional<std::uint32_t> moves_into;  // leave: gateway moving into a cluster
  // send
  NodeId src = 0;
  NodeId dst = 0;
  std::size_t size_bits = 0;
  bool operator==(const Event&) const = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  std::size_t random_width = 16;
  HashId hash = HashId::Sha1;
  std::size_t max_clusters_per_group = 8;
  std::optional<HierarchyPreset> hierarchy;
  EnergyParams energy;
  double area = 0.0;  // side of the square field in meters; 0 = unbounded
  std::vector<topology::NodeSite> sites;
  std::vector<Event> events;
  std::vector<std::size_t> message_size_sweep;
  bool operator==(const Scenario&) const = default;

  protocol::ProtocolConfig protocol_config() const;
};

/// Throws ScenarioError carrying the offending line on any problem.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& s);

/// Semantic checks shared by the parser and the runner.
void validate(const Scenario& s);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace hikeys::scenario
