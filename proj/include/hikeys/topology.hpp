#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hikeys/keycore.hpp"

namespace hikeys::topology {

using ClusterId = std::uint32_t;
using GroupId = std::uint32_t;

struct Position {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Position&) const = default;
};

double distance(const Position& a, const Position& b);

struct NodeSite {
  NodeId node_id = 0;
  Position position;
  double radio_range = 0.0;  // meters
  bool operator==(const NodeSite&) const = default;
};

/// Two sites hear each other when their distance is within both ranges.
bool in_range(const NodeSite& a, const NodeSite& b);

/// Undirected graph over node ids; neighbor sets are kept sorted.
class AdjacencyGraph {
 public:
  void add_node(NodeId id);
  void add_edge(NodeId a, NodeId b);
  void remove_node(NodeId id);

  bool contains(NodeId id) const { return adj_.count(id) != 0; }
  bool adjacent(NodeId a, NodeId b) const;
  const std::set<NodeId>& neighbors(NodeId id) const;
  std::size_t degree(NodeId id) const { return neighbors(id).size(); }
  std::size_t node_count() const { return adj_.size(); }
  std::size_t edge_count() const;
  std::vector<NodeId> node_ids() const;
  bool connected() const;

  bool operator==(const AdjacencyGraph&) const = default;

 private:
  std::map<NodeId, std::set<NodeId>> adj_;
};

/// Throws ArgumentError on duplicate ids or a non-positive range.
AdjacencyGraph build_adjacency(std::span<const NodeSite> sites);

/// Repeated local max-degree rule over uncovered nodes, smaller id wins ties.
std::set<NodeId> elect_cluster_heads(const AdjacencyGraph& g);

struct Cluster {
  ClusterId id = 0;
  NodeId head = 0;
  std::set<NodeId> members;   // includes the head
  std::set<NodeId> gateways;  // members bridging to another cluster
  bool operator==(const Cluster&) const = default;
};

/// A gateway belongs to `home` and also relays for (and holds the key of)
/// `foreign`.
struct GatewayLink {
  NodeId gateway = 0;
  ClusterId home = 0;
  ClusterId foreign = 0;
  bool operator==(const GatewayLink&) const = default;
  auto operator<=>(const GatewayLink&) const = default;
};

struct Group {
  GroupId id = 0;
  NodeId leader = 0;
  std::set<ClusterId> clusters;
  bool operator==(const Group&) const = default;
};

struct Hierarchy {
  std::map<ClusterId, Cluster> clusters;
  std::vector<GatewayLink> links;
  std::map<GroupId, Group> groups;
  NodeId network_leader = 0;

  std::optional<ClusterId> cluster_of(NodeId node) const;
  std::optional<GroupId> group_of(ClusterId cluster) const;
  /// Clusters whose key this node holds: its own plus every foreign side of
  /// a link it serves.
  std::vector<ClusterId> key_clusters_of(NodeId node) const;
  /// Members of the cluster plus the gateways affiliated to it.
  std::set<NodeId> key_holders(ClusterId cluster) const;
  std::set<NodeId> heads_of_group(GroupId group) const;
  std::set<NodeId> group_leaders() const;
  bool is_head(NodeId node) const;
  bool is_group_leader(NodeId node) const;
  bool is_gateway(NodeId node) const;

  bool operator==(const Hierarchy&) const = default;
};

/// Every non-head joins its smallest-id adjacent head; members adjacent to
/// two or more heads become gateways. A node with no adjacent head becomes a
/// singleton head. Cluster ids are assigned 1.. in ascending head order.
Hierarchy form_clusters(const AdjacencyGraph& g, const std::set<NodeId>& heads);

using ClusterOverlay = std::map<ClusterId, std::set<ClusterId>>;

/// Clusters are linked when they share a gateway or their heads are adjacent.
ClusterOverlay cluster_overlay(const Hierarchy& h, const AdjacencyGraph& g);

/// Breadth-first partition into connected groups of at most `max_clusters`,
/// each seeded from the unassigned cluster with the smallest head id.
std::vector<std::vector<ClusterId>> partition_groups(const ClusterOverlay& overlay,
                                                     const std::map<ClusterId, NodeId>& head_of,
                                                     std::size_t max_clusters);

/// Group leader = smallest head id in the group; network leader = smallest
/// group leader.
void elect_leaders(Hierarchy& h);

struct Initialization {
  AdjacencyGraph graph;
  Hierarchy hierarchy;
};

/// Full initialization: adjacency, heads, clusters, groups, leaders.
Initialization initialize(std::span<const NodeSite> sites, std::size_t max_clusters_per_group);

/// Structural invariants; returns one message per violation. When `graph`
/// is given, the one-hop and gateway adjacency rules of a freshly
/// initialized hierarchy are checked too.
std::vector<std::string> check_hierarchy(const Hierarchy& h, const AdjacencyGraph* graph = nullptr);

}  // namespace hikeys::topology
