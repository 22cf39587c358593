#include "hikeys/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "hikeys/errors.hpp"

namespace hikeys::topology {

double distance(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool in_range(const NodeSite& a, const NodeSite& b) {
  return distance(a.position, b.position) <= std::min(a.radio_range, b.radio_range);
}

void AdjacencyGraph::add_node(NodeId id) { adj_.try_emplace(id); }

void AdjacencyGraph::add_edge(NodeId a, NodeId b) {
  if (a == b) throw ArgumentError("self edge on node " + std::to_string(a));
  adj_[a].insert(b);
  adj_[b].insert(a);
}

void AdjacencyGraph::remove_node(NodeId id) {
  auto it = adj_.find(id);
  if (it == adj_.end()) return;
  for (NodeId n : it->second) adj_[n].erase(id);
  adj_.erase(it);
}

bool AdjacencyGraph::adjacent(NodeId a, NodeId b) const {
  auto it = adj_.find(a);
  return it != adj_.end() && it->second.count(b) != 0;
}

const std::set<NodeId>& AdjacencyGraph::neighbors(NodeId id) const {
  auto it = adj_.find(id);
  if (it == adj_.end()) throw ArgumentError("unknown node " + std::to_string(id));
  return it->second;
}

std::size_t AdjacencyGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& [id, n] : adj_) twice += n.size();
  return twice / 2;
}

std::vector<NodeId> AdjacencyGraph::node_ids() const {
  std::vector<NodeId> ids;
  ids.reserve(adj_.size());
  for (const auto& [id, n] : adj_) ids.push_back(id);
  return ids;
}

bool AdjacencyGraph::connected() const {
  if (adj_.empty()) return true;
  std::set<NodeId> seen{adj_.begin()->first};
  std::deque<NodeId> queue{adj_.begin()->first};
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : adj_.at(u)) {
      if (seen.insert(v).second) queue.push_back(v);
    }
  }
  return seen.size() == adj_.size();
}

AdjacencyGraph build_adjacency(std::span<const NodeSite> sites) {
  AdjacencyGraph g;
  for (const auto& s : sites) {
    if (g.contains(s.node_id)) throw ArgumentError("duplicate node id " + std::to_string(s.node_id));
    if (!(s.radio_range > 0.0)) {
      throw ArgumentError("node " + std::to_string(s.node_id) + " has non-positive radio range");
    }
    g.add_node(s.node_id);
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      if (in_range(sites[i], sites[j])) g.add_edge(sites[i].node_id, sites[j].node_id);
    }
  }
  return g;
}

std::set<NodeId> elect_cluster_heads(const AdjacencyGraph& g) {
  // (degree, -id) ordering: larger degree first, then smaller id.
  auto beats = [&g](NodeId a, NodeId b) {
    const auto da = g.degree(a), db = g.degree(b);
    return da != db ? da > db : a < b;
  };
  std::set<NodeId> uncovered;
  for (NodeId id : g.node_ids()) uncovered.insert(id);
  std::set<NodeId> heads;
  while (!uncovered.empty()) {
    std::vector<NodeId> round;
    for (NodeId u : uncovered) {
      bool wins = true;
      for (NodeId v : g.neighbors(u)) {
        if (uncovered.count(v) && !beats(u, v)) {
          wins = false;
          break;
        }
      }
      if (wins) round.push_back(u);
    }
    for (NodeId h : round) {
      heads.insert(h);
      uncovered.erase(h);
      for (NodeId v : g.neighbors(h)) uncovered.erase(v);
    }
  }
  return heads;
}

std::optional<ClusterId> Hierarchy::cluster_of(NodeId node) const {
  for (const auto& [id, c] : clusters) {
    if (c.members.count(node)) return id;
  }
  return std::nullopt;
}

std::optional<GroupId> Hierarchy::group_of(ClusterId cluster) const {
  for (const auto& [id, g] : groups) {
    if (g.clusters.count(cluster)) return id;
  }
  return std::nullopt;
}

std::vector<ClusterId> Hierarchy::key_clusters_of(NodeId node) const {
  std::set<ClusterId> out;
  if (auto c = cluster_of(node)) out.insert(*c);
  for (const auto& l : links) {
    if (l.gateway == node) out.insert(l.foreign);
  }
  return {out.begin(), out.end()};
}

std::set<NodeId> Hierarchy::key_holders(ClusterId cluster) const {
  std::set<NodeId> out;
  if (auto it = clusters.find(cluster); it != clusters.end()) out = it->second.members;
  for (const auto& l : links) {
    if (l.foreign == cluster) out.insert(l.gateway);
  }
  return out;
}

std::set<NodeId> Hierarchy::heads_of_group(GroupId group) const {
  std::set<NodeId> out;
  auto it = groups.find(group);
  if (it == groups.end()) return out;
  for (ClusterId c : it->second.clusters) out.insert(clusters.at(c).head);
  return out;
}

std::set<NodeId> Hierarchy::group_leaders() const {
  std::set<NodeId> out;
  for (const auto& [id, g] : groups) out.insert(g.leader);
  return out;
}

bool Hierarchy::is_head(NodeId node) const {
  return std::any_of(clusters.begin(), clusters.end(),
                     [node](const auto& kv) { return kv.second.head == node; });
}

bool Hierarchy::is_group_leader(NodeId node) const {
  return std::any_of(groups.begin(), groups.end(),
                     [node](const auto& kv) { return kv.second.leader == node; });
}

bool Hierarchy::is_gateway(NodeId node) const {
  return std::any_of(links.begin(), links.end(), [node](const GatewayLink& l) { return l.gateway == node; });
}

Hierarchy form_clusters(const AdjacencyGraph& g, const std::set<NodeId>& heads) {
  for (NodeId h : heads) {
    if (!g.contains(h)) throw ArgumentError("head " + std::to_string(h) + " not in graph");
  }
  std::set<NodeId> all_heads = heads;
  std::map<NodeId, std::vector<NodeId>> adjacent_heads;
  for (NodeId u : g.node_ids()) {
    if (all_heads.count(u)) continue;
    for (NodeId v : g.neighbors(u)) {
      if (heads.count(v)) adjacent_heads[u].push_back(v);  // neighbor sets are sorted
    }
    if (adjacent_heads[u].empty()) all_heads.insert(u);  // degenerate input: self-head
  }

  Hierarchy h;
  std::map<NodeId, ClusterId> cluster_by_head;
  ClusterId next = 1;
  for (NodeId head : all_heads) {
    cluster_by_head[head] = next;
    h.clusters[next] = Cluster{next, head, {head}, {}};
    ++next;
  }
  for (const auto& [u, hs] : adjacent_heads) {
    if (hs.empty()) continue;
    const ClusterId home = cluster_by_head.at(hs.front());
    h.clusters[home].members.insert(u);
    if (hs.size() >= 2) {
      h.clusters[home].gateways.insert(u);
      for (std::size_t i = 1; i < hs.size(); ++i) {
        h.links.push_back(GatewayLink{u, home, cluster_by_head.at(hs[i])});
      }
    }
  }
  std::sort(h.links.begin(), h.links.end());
  return h;
}

ClusterOverlay cluster_overlay(const Hierarchy& h, const AdjacencyGraph& g) {
  ClusterOverlay overlay;
  for (const auto& [id, c] : h.clusters) overlay[id];
  for (const auto& l : h.links) {
    overlay[l.home].insert(l.foreign);
    overlay[l.foreign].insert(l.home);
  }
  for (const auto& [a, ca] : h.clusters) {
    for (const auto& [b, cb] : h.clusters) {
      if (a < b && g.contains(ca.head) && g.adjacent(ca.head, cb.head)) {
        overlay[a].insert(b);
        overlay[b].insert(a);
      }
    }
  }
  return overlay;
}

std::vector<std::vector<ClusterId>> partition_groups(const ClusterOverlay& overlay,
                                                     const std::map<ClusterId, NodeId>& head_of,
                                                     std::size_t max_clusters) {
  if (max_clusters < 1) throw ArgumentError("clusters per group must be at least 1");
  // Visit clusters in ascending head-id order everywhere.
  std::vector<ClusterId> by_head;
  for (const auto& [c, h] : head_of) by_head.push_back(c);
  std::sort(by_head.begin(), by_head.end(),
            [&](ClusterId a, ClusterId b) { return head_of.at(a) < head_of.at(b); });
  auto sorted_neighbors = [&](ClusterId c) {
    std::vector<ClusterId> n;
    if (auto it = overlay.find(c); it != overlay.end()) n.assign(it->second.begin(), it->second.end());
    std::sort(n.begin(), n.end(), [&](ClusterId a, ClusterId b) { return head_of.at(a) < head_of.at(b); });
    return n;
  };

  std::set<ClusterId> assigned;
  std::vector<std::vector<ClusterId>> groups;
  for (ClusterId seed : by_head) {
    if (assigned.count(seed)) continue;
    std::vector<ClusterId> group{seed};
    assigned.insert(seed);
    std::deque<ClusterId> queue{seed};
    while (!queue.empty() && group.size() < max_clusters) {
      const ClusterId c = queue.front();
      queue.pop_front();
      for (ClusterId n : sorted_neighbors(c)) {
        if (group.size() >= max_clusters) break;
        if (assigned.insert(n).second) {
          group.push_back(n);
          queue.push_back(n);
        }
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

void elect_leaders(Hierarchy& h) {
  h.network_leader = 0;
  bool first = true;
  for (auto& [id, g] : h.groups) {
    if (g.clusters.empty()) continue;
    NodeId leader = h.clusters.at(*g.clusters.begin()).head;
    for (ClusterId c : g.clusters) leader = std::min(leader, h.clusters.at(c).head);
    g.leader = leader;
    if (first || leader < h.network_leader) h.network_leader = leader;
    first = false;
  }
}

Initialization initialize(std::span<const NodeSite> sites, std::size_t max_clusters_per_group) {
  if (sites.empty()) throw ArgumentError("no sites");
  Initialization init;
  init.graph = build_adjacency(sites);
  init.hierarchy = form_clusters(init.graph, elect_cluster_heads(init.graph));
  std::map<ClusterId, NodeId> head_of;
  for (const auto& [id, c] : init.hierarchy.clusters) head_of[id] = c.head;
  const auto parts =
      partition_groups(cluster_overlay(init.hierarchy, init.graph), head_of, max_clusters_per_group);
  GroupId gid = 1;
  for (const auto& part : parts) {
    init.hierarchy.groups[gid] = Group{gid, 0, {part.begin(), part.end()}};
    ++gid;
  }
  elect_leaders(init.hierarchy);
  return init;
}

std::vector<std::string> check_hierarchy(const Hierarchy& h, const AdjacencyGraph* graph) {
  std::vector<std::string> issues;
  auto fail = [&issues](std::string msg) { issues.push_back(std::move(msg)); };

  std::map<NodeId, int> membership;
  for (const auto& [id, c] : h.clusters) {
    if (!c.members.count(c.head)) fail("cluster " + std::to_string(id) + " head is not a member");
    for (NodeId m : c.members) ++membership[m];
    for (NodeId gw : c.gateways) {
      if (!c.members.count(gw)) fail("gateway " + std::to_string(gw) + " outside its cluster");
      if (gw == c.head) fail("head " + std::to_string(gw) + " flagged as gateway");
    }
    if (graph) {
      for (NodeId m : c.members) {
        if (m != c.head && !graph->adjacent(m, c.head)) {
          fail("member " + std::to_string(m) + " not one hop from head " + std::to_string(c.head));
        }
      }
    }
  }
  for (const auto& [node, count] : membership) {
    if (count != 1) fail("node " + std::to_string(node) + " in " + std::to_string(count) + " clusters");
  }
  if (graph) {
    for (NodeId n : graph->node_ids()) {
      if (!membership.count(n)) fail("node " + std::to_string(n) + " in no cluster");
    }
  }
  for (const auto& l : h.links) {
    auto home = h.clusters.find(l.home);
    if (home == h.clusters.end() || !h.clusters.count(l.foreign) || l.home == l.foreign) {
      fail("gateway link of " + std::to_string(l.gateway) + " names a missing cluster");
      continue;
    }
    if (!home->second.gateways.count(l.gateway)) {
      fail("link gateway " + std::to_string(l.gateway) + " not flagged in cluster " + std::to_string(l.home));
    }
    if (graph && (!graph->adjacent(l.gateway, home->second.head) ||
                  !graph->adjacent(l.gateway, h.clusters.at(l.foreign).head))) {
      fail("gateway " + std::to_string(l.gateway) + " not adjacent to both heads");
    }
  }
  std::map<ClusterId, int> grouped;
  for (const auto& [gid, g] : h.groups) {
    bool leader_ok = false;
    for (ClusterId c : g.clusters) {
      ++grouped[c];
      if (auto it = h.clusters.find(c); it != h.clusters.end() && it->second.head == g.leader) leader_ok = true;
    }
    if (!leader_ok) fail("group " + std::to_string(gid) + " leader heads none of its clusters");
  }
  for (const auto& [id, c] : h.clusters) {
    if (grouped[id] != 1) fail("cluster " + std::to_string(id) + " in " + std::to_string(grouped[id]) + " groups");
  }
  if (!h.groups.empty() && !h.group_leaders().count(h.network_leader)) {
    fail("network leader " + std::to_string(h.network_leader) + " is not a group leader");
  }
  return issues;
}

}  // namespace hikeys::topology
