#pragma once

#include <cstdint>
#include <vector>

#include "hikeys/scenario.hpp"
#include "hikeys/topology.hpp"

namespace hikeys::generator {

struct GeneratorOptions {
  scenario::HierarchyPreset preset;
  std::uint64_t seed = 0;
  double area = 0.0;  // field side in meters; 0 lets the range cap decide
  double max_range = 250.0;
  double min_range = 10.0;
};

/// Clusters are laid out as a serpentine chain; heads get ids 1..G*M in chain
/// order, and the gateway of each link belongs to the lower-id cluster. Every
/// cluster's key group (members plus affiliated gateways) has exactly P nodes.
struct Layout {
  std::vector<topology::NodeSite> sites;
  double range = 0.0;
  std::vector<topology::Position> head_positions;  // index k = head k+1
  bool cross_links = false;  // extra member pairs keeping the chain connected without gateways
};

/// Throws ScenarioError when the hierarchy cannot be realized in the area.
Layout generate_layout(const GeneratorOptions& options);

scenario::Scenario generate_scenario(const GeneratorOptions& options);

/// Preset scenario plus `membership_events` joins and leaves (and a few data
/// messages) chosen so that the live network stays connected.
scenario::Scenario random_scenario(const scenario::HierarchyPreset& preset, std::uint64_t seed,
                                   std::size_t membership_events);

}  // namespace hikeys::generator
