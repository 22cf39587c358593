#include <algorithm>

#include "hikeys/errors.hpp"
#include "hikeys/protocol.hpp"

namespace hikeys::protocol {
namespace {

std::set<NodeId> without(std::set<NodeId> s, NodeId n) {
  s.erase(n);
  return s;
}

}  // namespace

std::uint64_t Engine::begin_flow(FlowClass cls, NodeId subject, FlowRecord& rec) {
  rec.flow_id = next_flow_id_++;
  rec.cls = cls;
  rec.subject = subject;
  rec.time = transport_.now();
  current_flow_ = rec.flow_id;
  return rec.flow_id;
}

void Engine::finish_flow(FlowRecord& rec) {
  rec.rounds = 0;
  for (const auto& l : rec.levels) rec.rounds = std::max(rec.rounds, l.depth);
  sync_roles();
  flows_.push_back(rec);
  current_flow_ = 0;
}

void Engine::notify(NodeId from, NodeId to, MessageKind kind, FlowRecord& rec) {
  if (from == to) return;
  send_plain(from, to, kind, kIdBits, &rec);
  send_plain(to, from, MessageKind::Ack, kIdBits, &rec);
}

NodeId Engine::pick_adjacent(NodeId around, const std::set<NodeId>& candidates) const {
  const auto& g = transport_.graph();
  NodeId fallback = 0;
  for (NodeId c : candidates) {
    if (c == around || !alive(c)) continue;
    if (g.contains(around) && g.contains(c) && g.adjacent(around, c)) return c;
    if (fallback == 0) fallback = c;
  }
  return fallback;
}

NodeId Engine::reelect_head(const std::set<NodeId>& members) const {
  // Plain members are preferred so that no gateway link is lost.
  const auto& g = transport_.graph();
  auto best_of = [&](bool plain_only) {
    NodeId best = 0;
    std::size_t best_deg = 0;
    for (NodeId m : members) {
      if (!alive(m) || (plain_only && hierarchy_.is_gateway(m))) continue;
      std::size_t deg = 0;
      for (NodeId n : g.neighbors(m)) deg += alive(n) ? 1 : 0;
      if (best == 0 || deg > best_deg) {
        best = m;
        best_deg = deg;
      }
    }
    return best;
  };
  const NodeId plain = best_of(true);
  return plain != 0 ? plain : best_of(false);
}

void Engine::record_departure(NodeId node) {
  departed_.insert(node);
  departures_.push_back({node, transport_.clock()});
  transport_.detach(node);
  for (auto& [cid, c] : hierarchy_.clusters) {
    c.members.erase(node);
    c.gateways.erase(node);
  }
  std::erase_if(hierarchy_.links, [node](const topology::GatewayLink& l) { return l.gateway == node; });
}

void Engine::refresh_pair_keys_for(ClusterId cluster, FlowRecord* rec) {
  (void)rec;
  const auto links = hierarchy_.links;
  for (const auto& l : links) {
    if (l.foreign != cluster || !alive(l.gateway)) continue;
    gateway_pair_key(l.gateway, hierarchy_.clusters.at(cluster).head);
  }
}

void Engine::rekey_leave_level(FlowRecord& rec, const LevelPlan& plan) {
  if (plan.continuing.empty()) {
    reseed_level(rec, plan);
    return;
  }
  const auto cur = current_key(plan.kind, plan.scope);
  const KeyMaterial* old = state(plan.initiator).find_key(plan.kind, plan.scope);
  if (!cur || !old || old->epoch != cur->epoch) {
    throw ProtocolError("initiator " + std::to_string(plan.initiator) + " does not hold the current " +
                        std::string(crypto::to_string(plan.kind)) + " of scope " + std::to_string(plan.scope));
  }
  const KeyMaterial old_key = *old;
  const auto pair = random_pair();
  const BitString new_key = apply_rekey(plan.kind, old_key.key, pair);
  const KeyRef ref = issue(plan.kind, plan.scope, new_key);
  mutable_state(plan.initiator).keys[{plan.kind, plan.scope}] = KeyMaterial{new_key, plan.kind, plan.scope, ref.epoch};

  const Octets body = encode_pair(pair);
  const auto others = without(plan.continuing, plan.initiator);
  LevelRecord lr;
  lr.new_key = ref;
  lr.initiator = plan.initiator;
  lr.continuing = plan.continuing.size();
  lr.newcomers = plan.newcomers.size();
  lr.depth = 1;

  if (config_.insecure_broadcast_leave) {
    // Goes on air even when the initiator is the only holder left.
    Message msg;
    msg.src = plan.initiator;
    msg.scope = plan.kind == KeyKind::ClusterKey       ? Scope::cluster(plan.scope)
                : plan.kind == KeyKind::ClusterHeadKey ? Scope::heads(plan.scope)
                                                       : Scope::leaders();
    msg.kind = MessageKind::RekeyLeave;
    msg.sealed = provider_.encrypt_group(body, old_key);
    msg.size_bits = 2 * config_.random_width;
    msg.about = ref;
    send(std::move(msg), std::vector<NodeId>(others.begin(), others.end()), body);
    lr.wire_messages = 1;
    ++rec.wire_broadcasts;
    ++rec.billed_broadcasts;
  } else {
    for (NodeId o : others) {
      ensure_pubkey(plan.initiator, o, &rec);
      Message msg;
      msg.src = plan.initiator;
      msg.scope = Scope::unicast(o);
      msg.kind = MessageKind::RekeyLeave;
      msg.sealed = provider_.wrap(body, crypto::PublicKey{o, state(plan.initiator).known_pubkeys.at(o)});
      msg.size_bits = 2 * config_.random_width;
      msg.about = ref;
      send(std::move(msg), {o}, body);
      ++lr.wire_messages;
      ++rec.wire_unicasts;
    }
    rec.billed_unicasts += plan.continuing.size();
  }
  for (NodeId n : plan.newcomers) {
    if (n != plan.initiator) send_wrapped_key(plan.initiator, n, ref, new_key, &rec);
  }
  rec.levels.push_back(lr);
}

void Engine::reseed_level(FlowRecord& rec, const LevelPlan& plan) {
  if (plan.newcomers.empty()) return;
  const NodeId generator = plan.newcomers.count(plan.initiator) ? plan.initiator : *plan.newcomers.begin();
  const BitString key = random_bits(digest_bits(config_.hash));
  const KeyRef ref = issue(plan.kind, plan.scope, key);
  mutable_state(generator).keys[{plan.kind, plan.scope}] = KeyMaterial{key, plan.kind, plan.scope, ref.epoch};
  for (NodeId n : plan.newcomers) {
    if (n != generator) send_wrapped_key(generator, n, ref, key, &rec);
  }
  LevelRecord lr;
  lr.new_key = ref;
  lr.initiator = generator;
  lr.newcomers = plan.newcomers.size();
  rec.levels.push_back(lr);
}

FlowRecord Engine::handle_join(const topology::NodeSite& site, const std::string& issuer) {
  const NodeId id = site.node_id;
  if (states_.count(id)) throw ScenarioError("node id " + std::to_string(id) + " is already in use");
  FlowRecord rec;
  begin_flow(FlowClass::Join, id, rec);
  const std::uint64_t joined_at = transport_.clock();
  transport_.attach(site);
  add_node_state(id, issuer);

  const auto& g = transport_.graph();
  std::set<NodeId> nbrs;
  for (NodeId n : g.neighbors(id)) {
    if (alive(n) && n != id) nbrs.insert(n);
  }
  auto reject_unreachable = [&](const std::string& why) {
    transport_.detach(id);
    departed_.insert(id);
    current_flow_ = 0;
    throw ScenarioError("joining node " + std::to_string(id) + " " + why);
  };
  if (nbrs.empty()) reject_unreachable("hears no node of the network");
  std::optional<ClusterId> target;
  for (NodeId n : nbrs) {
    if (hierarchy_.is_head(n)) {
      target = hierarchy_.cluster_of(n);
      break;
    }
  }
  if (!target) target = hierarchy_.cluster_of(*nbrs.begin());
  if (!target) reject_unreachable("has no cluster in reach");
  const auto holders = hierarchy_.key_holders(*target);
  NodeId adjacent = 0;
  for (NodeId n : nbrs) {
    if (holders.count(n)) {
      adjacent = n;
      break;
    }
  }
  if (adjacent == 0) reject_unreachable("hears no holder of its cluster key");

  {
    Message req;
    req.src = id;
    req.scope = Scope::unicast(adjacent);
    req.kind = MessageKind::JoinRequest;
    const auto& cert = state(id).certificate;
    Octets body;
    for (int i = 3; i >= 0; --i) body.push_back(static_cast<std::uint8_t>(id >> (8 * i)));
    body.push_back(static_cast<std::uint8_t>(cert.public_key.size()));
    body.insert(body.end(), cert.public_key.begin(), cert.public_key.end());
    body.insert(body.end(), cert.issuer.begin(), cert.issuer.end());
    req.plain = std::move(body);
    req.size_bits = kCertificateBits;
    req.auxiliary = true;
    send(std::move(req), {adjacent}, {});
    ++rec.aux_messages;
  }
  if (!provider_.verify(state(id).certificate)) {
    rec.rejected = true;
    transport_.detach(id);
    departed_.insert(id);
    finish_flow(rec);
    return rec;
  }
  send_plain(adjacent, id, MessageKind::Ack, kIdBits, &rec);
  joins_.push_back({id, joined_at});

  const auto cur = current_key(KeyKind::ClusterKey, *target);
  const KeyMaterial* old = state(adjacent).find_key(KeyKind::ClusterKey, *target);
  if (!cur || !old || old->epoch != cur->epoch) {
    throw ProtocolError("node " + std::to_string(adjacent) + " does not hold the current cluster key");
  }
  const KeyMaterial old_key = *old;
  const auto pair = random_pair();
  const BitString new_key = apply_rekey(KeyKind::ClusterKey, old_key.key, pair);
  const KeyRef ref = issue(KeyKind::ClusterKey, *target, new_key);
  mutable_state(adjacent).keys[{KeyKind::ClusterKey, *target}] =
      KeyMaterial{new_key, KeyKind::ClusterKey, *target, ref.epoch};
  const Octets body = encode_pair(pair);
  const auto others = without(holders, adjacent);
  Message msg;
  msg.src = adjacent;
  msg.scope = Scope::cluster(*target);
  msg.kind = MessageKind::RekeyJoin;
  msg.sealed = provider_.encrypt_group(body, old_key);
  msg.size_bits = 2 * config_.random_width;
  msg.about = ref;
  send(std::move(msg), std::vector<NodeId>(others.begin(), others.end()), body);
  ++rec.wire_broadcasts;
  ++rec.billed_broadcasts;

  hierarchy_.clusters.at(*target).members.insert(id);
  send_wrapped_key(adjacent, id, ref, new_key, &rec);

  LevelRecord lr;
  lr.new_key = ref;
  lr.initiator = adjacent;
  lr.continuing = holders.size();
  lr.newcomers = 1;
  lr.wire_messages = 1;
  lr.depth = 1;
  rec.levels.push_back(lr);
  finish_flow(rec);
  return rec;
}

FlowRecord Engine::handle_leave(NodeId leaving, std::optional<ClusterId> moves_into) {
  if (!alive(leaving)) throw ScenarioError("node " + std::to_string(leaving) + " is not in the network");
  if (moves_into) {
    if (!hierarchy_.is_gateway(leaving) || hierarchy_.is_head(leaving)) {
      throw ScenarioError("only a gateway can move into a neighboring cluster");
    }
    return handle_leave_gateway(leaving, moves_into);
  }
  if (hierarchy_.is_group_leader(leaving)) return handle_leave_group_leader(leaving);
  if (hierarchy_.is_head(leaving)) return handle_leave_head(leaving);
  if (hierarchy_.is_gateway(leaving)) return handle_leave_gateway(leaving);
  return handle_leave_member(leaving);
}

FlowRecord Engine::handle_leave_member(NodeId leaving, std::optional<NodeId> adjacent) {
  if (!alive(leaving)) throw ScenarioError("node " + std::to_string(leaving) + " is not in the network");
  if (hierarchy_.is_head(leaving) || hierarchy_.is_gateway(leaving)) {
    throw ProtocolError("node " + std::to_string(leaving) + " is not a plain member");
  }
  const auto cluster = hierarchy_.cluster_of(leaving);
  if (!cluster) throw ProtocolError("node " + std::to_string(leaving) + " belongs to no cluster");
  const auto remaining = without(hierarchy_.key_holders(*cluster), leaving);
  const NodeId adj = adjacent ? *adjacent : pick_adjacent(leaving, remaining);
  if (adj == leaving || !remaining.count(adj)) {
    throw ProtocolError("node " + std::to_string(adj) + " cannot initiate the rekey of cluster " +
                        std::to_string(*cluster));
  }
  FlowRecord rec;
  begin_flow(FlowClass::MemberLeave, leaving, rec);
  notify(leaving, adj, MessageKind::LeaveNotice, rec);
  record_departure(leaving);
  rekey_leave_level(rec, {KeyKind::ClusterKey, *cluster, adj, remaining, {}});
  finish_flow(rec);
  return rec;
}

FlowRecord Engine::handle_leave_gateway(NodeId leaving, std::optional<ClusterId> moves_into) {
  if (!alive(leaving)) throw ScenarioError("node " + std::to_string(leaving) + " is not in the network");
  if (!hierarchy_.is_gateway(leaving) || hierarchy_.is_head(leaving)) {
    throw ProtocolError("node " + std::to_string(leaving) + " is not a gateway");
  }
  const ClusterId home = *hierarchy_.cluster_of(leaving);
  std::vector<topology::GatewayLink> own;
  std::set<ClusterId> touched{home};
  for (const auto& l : hierarchy_.links) {
    if (l.gateway == leaving) {
      own.push_back(l);
      touched.insert(l.foreign);
    }
  }
  if (moves_into && !touched.count(*moves_into)) {
    throw ScenarioError("gateway " + std::to_string(leaving) + " cannot move into cluster " +
                        std::to_string(*moves_into));
  }

  std::map<ClusterId, std::set<NodeId>> before;
  for (ClusterId c : touched) before[c] = hierarchy_.key_holders(c);

  // Delegate per link: smallest plain node of either side hearing the other side.
  const auto& g = transport_.graph();
  std::vector<topology::GatewayLink> delegated;
  for (const auto& l : own) {
    const auto& a = hierarchy_.clusters.at(l.home).members;
    const auto& f = hierarchy_.clusters.at(l.foreign).members;
    std::optional<topology::GatewayLink> best;
    auto consider = [&](const std::set<NodeId>& side, const std::set<NodeId>& other, ClusterId side_id,
                        ClusterId other_id) {
      for (NodeId u : side) {
        if (u == leaving || !alive(u) || hierarchy_.is_head(u)) continue;
        bool hears = false;
        for (NodeId n : g.neighbors(u)) hears = hears || (n != leaving && alive(n) && other.count(n));
        if (hears && (!best || u < best->gateway)) best = topology::GatewayLink{u, side_id, other_id};
      }
    };
    consider(a, f, l.home, l.foreign);
    consider(f, a, l.foreign, l.home);
    if (best) delegated.push_back(*best);
  }

  std::map<ClusterId, NodeId> initiators;
  for (ClusterId c : touched) {
    if (moves_into && c == *moves_into) continue;
    initiators[c] = pick_adjacent(leaving, without(before[c], leaving));
  }

  FlowRecord rec;
  begin_flow(FlowClass::GatewayLeave, leaving, rec);
  for (const auto& d : delegated) notify(leaving, d.gateway, MessageKind::Delegation, rec);
  if (initiators.count(home)) notify(leaving, initiators[home], MessageKind::LeaveNotice, rec);

  if (moves_into) {
    std::erase_if(hierarchy_.links, [leaving](const topology::GatewayLink& l) { return l.gateway == leaving; });
    hierarchy_.clusters.at(home).gateways.erase(leaving);
    if (*moves_into != home) {
      hierarchy_.clusters.at(home).members.erase(leaving);
      hierarchy_.clusters.at(*moves_into).members.insert(leaving);
    }
    auto& keys = mutable_state(leaving).keys;
    std::erase_if(keys, [&](const auto& kv) {
      return kv.second.kind == KeyKind::GatewayPairKey ||
             (kv.second.kind == KeyKind::ClusterKey && kv.second.scope != *moves_into);
    });
  } else {
    record_departure(leaving);
  }
  for (const auto& d : delegated) {
    const bool exists = std::any_of(hierarchy_.links.begin(), hierarchy_.links.end(),
                                    [&d](const topology::GatewayLink& l) { return l == d; });
    if (!exists) {
      hierarchy_.links.push_back(d);
      hierarchy_.clusters.at(d.home).gateways.insert(d.gateway);
    }
  }
  std::sort(hierarchy_.links.begin(), hierarchy_.links.end());

  for (ClusterId c : touched) {
    std::set<NodeId> newcomers;
    for (NodeId n : hierarchy_.key_holders(c)) {
      if (!before[c].count(n)) newcomers.insert(n);
    }
    if (moves_into && c == *moves_into) {
      if (const auto ref = current_key(KeyKind::ClusterKey, c)) {
        for (NodeId n : newcomers) send_wrapped_key(leaving, n, *ref, issued_.at(*ref).key, &rec);
      }
      continue;
    }
    auto continuing = without(before[c], leaving);
    rekey_leave_level(rec, {KeyKind::ClusterKey, c, initiators[c], continuing, newcomers});
  }
  for (const auto& d : delegated) gateway_pair_key(d.gateway, hierarchy_.clusters.at(d.foreign).head);
  finish_flow(rec);
  return rec;
}

FlowRecord Engine::handle_leave_head(NodeId leaving) {
  if (!alive(leaving)) throw ScenarioError("node " + std::to_string(leaving) + " is not in the network");
  if (!hierarchy_.is_head(leaving) || hierarchy_.is_group_leader(leaving)) {
    throw ProtocolError("node " + std::to_string(leaving) + " is not a plain cluster head");
  }
  const ClusterId cluster = *hierarchy_.cluster_of(leaving);
  const GroupId group = *hierarchy_.group_of(cluster);
  const auto heads_before = hierarchy_.heads_of_group(group);
  const auto holders_before = hierarchy_.key_holders(cluster);

  // Adjacent head: smallest head of a linked cluster in the same group.
  std::set<NodeId> linked;
  for (const auto& l : hierarchy_.links) {
    ClusterId other = 0;
    if (l.home == cluster) other = l.foreign;
    if (l.foreign == cluster) other = l.home;
    if (other != 0 && hierarchy_.group_of(other) == group) linked.insert(hierarchy_.clusters.at(other).head);
  }
  for (NodeId n : transport_.graph().neighbors(leaving)) {
    if (heads_before.count(n)) linked.insert(n);
  }
  linked.erase(leaving);
  const NodeId head_initiator = !linked.empty() ? *linked.begin() : *without(heads_before, leaving).begin();
  const auto continuing = without(holders_before, leaving);
  const NodeId cluster_initiator = pick_adjacent(leaving, continuing);
  const NodeId new_head = reelect_head(without(hierarchy_.clusters.at(cluster).members, leaving));

  FlowRecord rec;
  begin_flow(FlowClass::HeadLeave, leaving, rec);
  notify(leaving, head_initiator, MessageKind::LeaveNotice, rec);
  if (cluster_initiator != 0) notify(leaving, cluster_initiator, MessageKind::LeaveNotice, rec);
  record_departure(leaving);
  const bool dissolved = install_head(cluster, new_head);

  std::set<NodeId> head_newcomers;
  if (!dissolved) head_newcomers.insert(new_head);
  rekey_leave_level(rec, {KeyKind::ClusterHeadKey, group, head_initiator, without(heads_before, leaving), head_newcomers});
  if (!dissolved && !continuing.empty()) {
    rekey_leave_level(rec, {KeyKind::ClusterKey, cluster, cluster_initiator, continuing, {}});
    refresh_pair_keys_for(cluster, &rec);
  }
  finish_flow(rec);
  return rec;
}

FlowRecord Engine::handle_leave_group_leader(NodeId leaving) {
  if (!alive(leaving)) throw ScenarioError("node " + std::to_string(leaving) + " is not in the network");
  if (!hierarchy_.is_group_leader(leaving)) {
    throw ProtocolError("node " + std::to_string(leaving) + " is not a group leader");
  }
  const ClusterId cluster = *hierarchy_.cluster_of(leaving);
  const GroupId group = *hierarchy_.group_of(cluster);
  const bool network_leader = hierarchy_.network_leader == leaving;
  const auto heads_before = hierarchy_.heads_of_group(group);
  const auto leaders_before = hierarchy_.group_leaders();
  const auto holders_before = hierarchy_.key_holders(cluster);

  const auto other_heads = without(heads_before, leaving);
  const auto other_leaders = without(leaders_before, leaving);
  const auto continuing = without(holders_before, leaving);
  const NodeId head_initiator = pick_adjacent(leaving, other_heads);
  const NodeId leader_initiator = pick_adjacent(leaving, other_leaders);
  const NodeId cluster_initiator = pick_adjacent(leaving, continuing);
  const NodeId new_head = reelect_head(without(hierarchy_.clusters.at(cluster).members, leaving));
  const NodeId new_leader = !other_heads.empty() ? *other_heads.begin() : new_head;

  FlowRecord rec;
  begin_flow(FlowClass::LeaderLeave, leaving, rec);
  if (leader_initiator != 0) notify(leaving, leader_initiator, MessageKind::LeaveNotice, rec);
  if (head_initiator != 0) notify(leaving, head_initiator, MessageKind::LeaveNotice, rec);
  if (new_leader != 0) notify(leaving, new_leader, MessageKind::Delegation, rec);
  if (cluster_initiator != 0 && cluster_initiator != new_leader) {
    notify(leaving, cluster_initiator, MessageKind::LeaveNotice, rec);
  }
  record_departure(leaving);
  const bool dissolved = install_head(cluster, new_head);
  if (hierarchy_.groups.count(group)) {
    hierarchy_.groups.at(group).leader = new_leader;
  }
  if (network_leader) {
    const auto leaders = hierarchy_.group_leaders();
    hierarchy_.network_leader = leaders.empty() ? 0 : *leaders.begin();
  }

  std::set<NodeId> leader_newcomers;
  if (hierarchy_.groups.count(group)) leader_newcomers.insert(new_leader);
  rekey_leave_level(rec, {KeyKind::GroupLeaderKey, 0, other_leaders.empty() ? new_leader : leader_initiator,
                          other_leaders, leader_newcomers});
  std::set<NodeId> head_newcomers;
  if (!dissolved) head_newcomers.insert(new_head);
  rekey_leave_level(rec, {KeyKind::ClusterHeadKey, group, other_heads.empty() ? new_head : head_initiator,
                          other_heads, head_newcomers});
  if (!dissolved && !continuing.empty()) {
    rekey_leave_level(rec, {KeyKind::ClusterKey, cluster, cluster_initiator, continuing, {}});
    refresh_pair_keys_for(cluster, &rec);
  }
  finish_flow(rec);
  return rec;
}

bool Engine::install_head(ClusterId cluster, NodeId new_head) {
  auto& c = hierarchy_.clusters.at(cluster);
  if (new_head == 0 || c.members.empty()) {
    std::erase_if(hierarchy_.links, [cluster](const topology::GatewayLink& l) {
      return l.home == cluster || l.foreign == cluster;
    });
    for (auto& [gid, grp] : hierarchy_.groups) grp.clusters.erase(cluster);
    std::erase_if(hierarchy_.groups, [](const auto& kv) { return kv.second.clusters.empty(); });
    hierarchy_.clusters.erase(cluster);
    for (auto& [cid, other] : hierarchy_.clusters) {
      std::erase_if(other.gateways, [&](NodeId gw) {
        return std::none_of(hierarchy_.links.begin(), hierarchy_.links.end(),
                            [gw](const topology::GatewayLink& l) { return l.gateway == gw; });
      });
    }
    for (auto& [id, st] : states_) {
      if (alive(id)) {
        std::erase_if(st.keys, [cluster](const auto& kv) {
          return kv.second.kind == KeyKind::ClusterKey && kv.second.scope == cluster;
        });
      }
    }
    return true;
  }
  c.head = new_head;
  if (c.gateways.erase(new_head)) {
    std::vector<ClusterId> dropped;
    std::erase_if(hierarchy_.links, [&](const topology::GatewayLink& l) {
      if (l.gateway != new_head) return false;
      dropped.push_back(l.foreign);
      return true;
    });
    auto& keys = mutable_state(new_head).keys;
    std::erase_if(keys, [&](const auto& kv) {
      return kv.second.kind == KeyKind::GatewayPairKey ||
             (kv.second.kind == KeyKind::ClusterKey &&
              std::find(dropped.begin(), dropped.end(), kv.second.scope) != dropped.end());
    });
  }
  return false;
}

}  // namespace hikeys::protocol
