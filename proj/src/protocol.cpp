#include "hikeys/protocol.hpp"

#include <algorithm>
#include <array>

#include "hikeys/errors.hpp"

namespace hikeys::protocol {
namespace {

constexpr std::array kMessageKindNames = {
    "Hello",      "NeighborCount", "IAmClusterHead", "IAmMember",   "AnyClusterHeads",
    "PubKeyCert", "Contribution",  "KeyWrap",        "RekeyJoin",   "RekeyLeave",
    "LeaveNotice", "JoinRequest",  "Ack",            "Delegation",  "Data",
};

constexpr std::array kFlowClassNames = {"setup", "join", "member-leave", "gateway-leave",
                                        "head-leave", "leader-leave", "data"};

Octets encode_certificate(const crypto::Certificate& cert) {
  Octets out;
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(cert.node_id >> (8 * i)));
  out.push_back(static_cast<std::uint8_t>(cert.public_key.size()));
  out.insert(out.end(), cert.public_key.begin(), cert.public_key.end());
  out.insert(out.end(), cert.issuer.begin(), cert.issuer.end());
  return out;
}

std::optional<crypto::Certificate> decode_certificate(const Octets& bytes) {
  if (bytes.size() < 5) return std::nullopt;
  crypto::Certificate cert;
  for (int i = 0; i < 4; ++i) cert.node_id = (cert.node_id << 8) | bytes[static_cast<std::size_t>(i)];
  const std::size_t pk_len = bytes[4];
  if (bytes.size() < 5 + pk_len) return std::nullopt;
  cert.public_key.assign(bytes.begin() + 5, bytes.begin() + 5 + static_cast<std::ptrdiff_t>(pk_len));
  cert.issuer.assign(bytes.begin() + 5 + static_cast<std::ptrdiff_t>(pk_len), bytes.end());
  return cert;
}

Octets id_bytes(NodeId id) {
  return {static_cast<std::uint8_t>(id >> 24), static_cast<std::uint8_t>(id >> 16),
          static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id)};
}

KeyKind key_kind_of(crypto::ContextKind ctx) {
  switch (ctx) {
    case crypto::ContextKind::UnderClusterHeadKey: return KeyKind::ClusterHeadKey;
    case crypto::ContextKind::UnderGroupLeaderKey: return KeyKind::GroupLeaderKey;
    case crypto::ContextKind::UnderGatewayPairKey: return KeyKind::GatewayPairKey;
    default: return KeyKind::ClusterKey;
  }
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Member: return "member";
    case Role::Gateway: return "gateway";
    case Role::ClusterHead: return "cluster-head";
    case Role::GroupLeader: return "group-leader";
    case Role::NetworkLeader: return "network-leader";
  }
  return "?";
}

Role role_of(const topology::Hierarchy& h, NodeId node) {
  if (!h.groups.empty() && h.network_leader == node) return Role::NetworkLeader;
  if (h.is_group_leader(node)) return Role::GroupLeader;
  if (h.is_head(node)) return Role::ClusterHead;
  if (h.is_gateway(node)) return Role::Gateway;
  return Role::Member;
}

std::string_view to_string(MessageKind kind) { return kMessageKindNames[static_cast<std::size_t>(kind)]; }

std::optional<MessageKind> parse_message_kind(std::string_view text) {
  for (std::size_t i = 0; i < kMessageKindNames.size(); ++i) {
    if (text == kMessageKindNames[i]) return static_cast<MessageKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(FlowClass cls) { return kFlowClassNames[static_cast<std::size_t>(cls)]; }

std::optional<FlowClass> parse_flow_class(std::string_view text) {
  for (std::size_t i = 0; i < kFlowClassNames.size(); ++i) {
    if (text == kFlowClassNames[i]) return static_cast<FlowClass>(i);
  }
  return std::nullopt;
}

std::string Scope::to_string() const {
  switch (kind) {
    case ScopeKind::Unicast: return "unicast:" + std::to_string(target);
    case ScopeKind::Neighbors: return "neighbors";
    case ScopeKind::ClusterBroadcast: return "cluster:" + std::to_string(target);
    case ScopeKind::HeadsBroadcast: return "heads:" + std::to_string(target);
    case ScopeKind::LeadersBroadcast: return "leaders";
  }
  return "?";
}

std::string KeyRef::to_string() const {
  return std::string(crypto::to_string(kind)) + "(" + std::to_string(scope) + ")@" + std::to_string(epoch);
}

const KeyMaterial* NodeState::find_key(KeyKind kind, std::uint32_t scope) const {
  auto it = keys.find({kind, scope});
  return it == keys.end() ? nullptr : &it->second;
}

Octets encode_pair(const keycore::RandomPair& pair) { return pair.concat().to_octets(); }

keycore::RandomPair decode_pair(const Octets& bytes, std::size_t width) {
  const BitString bits = BitString::from_octets(bytes);
  if (bits.size() < 2 * width) throw ProtocolError("rekey payload shorter than a random pair");
  return keycore::RandomPair(bits.slice(0, width), bits.slice(width, width));
}

BitString rekey_transform(KeyKind kind, const BitString& old_key, const keycore::RandomPair& pair,
                          HashId hash) {
  switch (kind) {
    case KeyKind::ClusterKey: return keycore::join_leave_rekey(old_key, pair, hash);
    case KeyKind::ClusterHeadKey: return keycore::ch_rekey(old_key, pair);
    case KeyKind::GroupLeaderKey: return keycore::gl_rekey(old_key, pair.r1);
    case KeyKind::GatewayPairKey: break;
  }
  throw ProtocolError("pair keys are replaced, not rekeyed");
}

Engine::Engine(ProtocolConfig config, const crypto::CryptoProvider& provider, Transport& transport)
    : config_(config), provider_(provider), transport_(transport), rng_(config.seed) {
  if (!keycore::valid_random_width(config_.random_width)) {
    throw ConfigError("random width must be 8, 16 or 32 bits");
  }
}

const NodeState& Engine::state(NodeId node) const {
  auto it = states_.find(node);
  if (it == states_.end()) throw ArgumentError("unknown node " + std::to_string(node));
  return it->second;
}

NodeState& Engine::mutable_state(NodeId node) {
  auto it = states_.find(node);
  if (it == states_.end()) throw ArgumentError("unknown node " + std::to_string(node));
  return it->second;
}

NodeState& Engine::add_node_state(NodeId node, const std::string& issuer) {
  NodeState st;
  st.node_id = node;
  st.keypair = provider_.generate_keypair(node, config_.seed);
  st.certificate = issuer.empty() ? provider_.issue_certificate(st.keypair)
                                  : crypto::Certificate{node, st.keypair.public_key, issuer};
  st.known_pubkeys[node] = st.keypair.public_key;
  return states_[node] = std::move(st);
}

void Engine::sync_roles() {
  for (auto& [id, st] : states_) {
    if (!departed_.count(id)) st.role = role_of(hierarchy_, id);
  }
}

std::optional<KeyRef> Engine::current_key(KeyKind kind, std::uint32_t scope) const {
  auto it = issued_.upper_bound(KeyRef{kind, scope, ~std::uint64_t{0}});
  if (it == issued_.begin()) return std::nullopt;
  --it;
  if (it->first.kind != kind || it->first.scope != scope) return std::nullopt;
  return it->first;
}

std::optional<std::uint32_t> Engine::pair_scope(const topology::GatewayLink& link) const {
  auto it = pair_scopes_.find(link);
  if (it == pair_scopes_.end()) return std::nullopt;
  return it->second;
}

BitString Engine::random_bits(std::size_t width) {
  BitString out;
  while (out.size() < width) {
    const std::size_t take = std::min<std::size_t>(64, width - out.size());
    const std::uint64_t v = take == 64 ? rng_() : rng_() & ((std::uint64_t{1} << take) - 1);
    out.append(BitString::from_value(v, take));
  }
  return out;
}

keycore::RandomPair Engine::random_pair() {
  BitString r1 = random_bits(config_.random_width);
  BitString r2 = random_bits(config_.random_width);
  return keycore::RandomPair(std::move(r1), std::move(r2));
}

KeyRef Engine::issue(KeyKind kind, std::uint32_t scope, const BitString& key) {
  const auto cur = current_key(kind, scope);
  const KeyRef ref{kind, scope, cur ? cur->epoch + 1 : 0};
  issued_[ref] = KeyIssue{key, transport_.clock()};
  return ref;
}

BitString Engine::apply_rekey(KeyKind kind, const BitString& old_key, const keycore::RandomPair& pair) const {
  return rekey_transform(kind, old_key, pair, config_.hash);
}

std::vector<NodeId> Engine::send(Message msg, const std::vector<NodeId>& audience, const Octets& sender_plain,
                                 bool require_all) {
  msg.msg_id = next_msg_id_++;
  msg.flow_id = current_flow_;
  const auto reached = transport_.deliver(msg, audience, sender_plain);
  for (NodeId r : reached) receive(r, msg);
  if (require_all && reached.size() != audience.size()) {
    for (NodeId a : audience) {
      if (std::find(reached.begin(), reached.end(), a) == reached.end()) {
        throw ProtocolError(std::string(to_string(msg.kind)) + " from " + std::to_string(msg.src) +
                            " never reached node " + std::to_string(a));
      }
    }
  }
  return reached;
}

void Engine::send_plain(NodeId src, NodeId dst, MessageKind kind, std::size_t bits, FlowRecord* rec) {
  Message msg;
  msg.src = src;
  msg.scope = Scope::unicast(dst);
  msg.kind = kind;
  msg.plain = id_bytes(src);
  msg.size_bits = bits;
  msg.auxiliary = true;
  send(std::move(msg), {dst}, {});
  if (rec) ++rec->aux_messages;
}

void Engine::ensure_pubkey(NodeId holder, NodeId subject, FlowRecord* rec) {
  if (state(holder).known_pubkeys.count(subject)) return;
  Message msg;
  msg.src = subject;
  msg.scope = Scope::unicast(holder);
  msg.kind = MessageKind::PubKeyCert;
  msg.plain = encode_certificate(state(subject).certificate);
  msg.size_bits = kCertificateBits;
  msg.auxiliary = true;
  send(std::move(msg), {holder}, {});
  if (rec) ++rec->aux_messages;
  if (!state(holder).known_pubkeys.count(subject)) {
    throw ProtocolError("node " + std::to_string(holder) + " cannot certify node " + std::to_string(subject));
  }
}

void Engine::send_wrapped_key(NodeId src, NodeId dst, const KeyRef& ref, const BitString& key, FlowRecord* rec) {
  ensure_pubkey(src, dst, rec);
  const Octets plaintext = key.to_octets();
  Message msg;
  msg.src = src;
  msg.scope = Scope::unicast(dst);
  msg.kind = MessageKind::KeyWrap;
  msg.sealed = provider_.wrap(plaintext, crypto::PublicKey{dst, state(src).known_pubkeys.at(dst)});
  msg.size_bits = key.size();
  msg.about = ref;
  msg.auxiliary = true;
  send(std::move(msg), {dst}, plaintext);
  if (rec) ++rec->aux_messages;
}

void Engine::receive(NodeId at, const Message& msg) {
  NodeState& st = mutable_state(at);
  switch (msg.kind) {
    case MessageKind::IAmClusterHead:
    case MessageKind::AnyClusterHeads:
    case MessageKind::PubKeyCert:
    case MessageKind::JoinRequest: {
      const auto cert = decode_certificate(msg.plain);
      if (cert && cert->node_id == msg.src && provider_.verify(*cert)) {
        st.known_pubkeys[cert->node_id] = cert->public_key;
      }
      break;
    }
    case MessageKind::Contribution: {
      const Octets hr = provider_.unwrap(*msg.sealed, st.keypair);
      st.contributions[msg.src] = BitString::from_octets(hr);
      break;
    }
    case MessageKind::KeyWrap: {
      const Octets key = provider_.unwrap(*msg.sealed, st.keypair);
      st.keys[{msg.about->kind, msg.about->scope}] =
          KeyMaterial{BitString::from_octets(key), msg.about->kind, msg.about->scope, msg.about->epoch};
      break;
    }
    case MessageKind::RekeyJoin:
    case MessageKind::RekeyLeave: {
      const KeyRef& ref = *msg.about;
      const KeyMaterial* old = st.find_key(ref.kind, ref.scope);
      if (!old || old->epoch + 1 != ref.epoch) {
        throw ProtocolError("node " + std::to_string(at) + " lacks the predecessor of " + ref.to_string());
      }
      const Octets body = msg.sealed->context.kind == crypto::ContextKind::UnderPublicKeyOf
                              ? provider_.unwrap(*msg.sealed, st.keypair)
                              : provider_.decrypt_group(*msg.sealed, *old);
      const auto pair = decode_pair(body, config_.random_width);
      st.keys[{ref.kind, ref.scope}] = KeyMaterial{apply_rekey(ref.kind, old->key, pair), ref.kind, ref.scope, ref.epoch};
      break;
    }
    case MessageKind::Data: {
      const auto& ctx = msg.sealed->context;
      const KeyMaterial* key = st.find_key(key_kind_of(ctx.kind), ctx.scope);
      if (!key) throw ProtocolError("node " + std::to_string(at) + " cannot open " + ctx.to_string());
      (void)provider_.decrypt_group(*msg.sealed, *key);
      break;
    }
    default:
      break;
  }
}

void Engine::bootstrap(const topology::Hierarchy& hierarchy, std::span<const topology::NodeSite> sites) {
  hierarchy_ = hierarchy;
  for (const auto& s : sites) add_node_state(s.node_id, {});
  sync_roles();

  FlowRecord rec;
  begin_flow(FlowClass::Setup, 0, rec);
  const auto& g = transport_.graph();
  auto plain_msg = [](NodeId src, Scope scope, MessageKind kind, Octets body, std::size_t bits) {
    Message m;
    m.src = src;
    m.scope = scope;
    m.kind = kind;
    m.plain = std::move(body);
    m.size_bits = bits;
    return m;
  };
  auto neighbors_of = [&g](NodeId n) {
    const auto& s = g.neighbors(n);
    return std::vector<NodeId>(s.begin(), s.end());
  };

  for (const auto& [id, st] : states_) {
    send(plain_msg(id, Scope::neighbors(), MessageKind::Hello, id_bytes(id), kIdBits), neighbors_of(id), {});
  }
  for (const auto& [id, st] : states_) {
    send(plain_msg(id, Scope::neighbors(), MessageKind::NeighborCount, id_bytes(id), 2 * kIdBits),
         neighbors_of(id), {});
  }
  std::vector<NodeId> heads;
  for (const auto& [cid, c] : hierarchy_.clusters) heads.push_back(c.head);
  for (NodeId h : heads) {
    send(plain_msg(h, Scope::neighbors(), MessageKind::IAmClusterHead, encode_certificate(state(h).certificate),
                   kIdBits + kCertificateBits),
         neighbors_of(h), {});
  }
  for (const auto& [cid, c] : hierarchy_.clusters) {
    for (NodeId m : c.members) {
      if (m != c.head) {
        send(plain_msg(m, Scope::unicast(c.head), MessageKind::IAmMember, id_bytes(m), kIdBits), {c.head}, {});
      }
    }
  }
  for (NodeId h : heads) {
    std::vector<NodeId> others;
    for (NodeId o : heads) {
      if (o != h) others.push_back(o);
    }
    send(plain_msg(h, Scope::heads(0), MessageKind::AnyClusterHeads, encode_certificate(state(h).certificate),
                   kIdBits + kCertificateBits),
         others, {});
  }
  for (const auto& [cid, c] : hierarchy_.clusters) {
    for (NodeId m : c.members) {
      std::vector<NodeId> others;
      for (NodeId o : c.members) {
        if (o != m) others.push_back(o);
      }
      send(plain_msg(m, Scope::cluster(cid), MessageKind::PubKeyCert, encode_certificate(state(m).certificate),
                     kCertificateBits),
           others, {});
    }
  }
  for (const auto& l : hierarchy_.links) {
    const NodeId peer = hierarchy_.clusters.at(l.foreign).head;
    send(plain_msg(l.gateway, Scope::unicast(peer), MessageKind::PubKeyCert,
                   encode_certificate(state(l.gateway).certificate), kCertificateBits),
         {peer}, {});
  }

  for (const auto& [cid, c] : hierarchy_.clusters) run_cluster_agreement(cid);

  for (const auto& [gid, grp] : hierarchy_.groups) {
    auto recipients = hierarchy_.heads_of_group(gid);
    recipients.erase(grp.leader);
    distribute_overlay_key(grp.leader, recipients, KeyKind::ClusterHeadKey, gid);
  }
  if (!hierarchy_.groups.empty()) {
    auto recipients = hierarchy_.group_leaders();
    recipients.erase(hierarchy_.network_leader);
    distribute_overlay_key(hierarchy_.network_leader, recipients, KeyKind::GroupLeaderKey, 0);
  }
  for (const auto& l : hierarchy_.links) {
    const NodeId peer = hierarchy_.clusters.at(l.foreign).head;
    const KeyRef ref = *current_key(KeyKind::ClusterKey, l.foreign);
    send_wrapped_key(peer, l.gateway, ref, issued_.at(ref).key, &rec);
    gateway_pair_key(l.gateway, peer);
  }
  finish_flow(rec);
}

void Engine::run_cluster_agreement(ClusterId cluster) {
  const auto& members = hierarchy_.clusters.at(cluster).members;
  const std::vector<NodeId> ids(members.begin(), members.end());
  const KeyRef target{KeyKind::ClusterKey, cluster, 0};
  for (NodeId m : ids) {
    NodeState& st = mutable_state(m);
    st.contributions.clear();
    st.own_hr = keycore::hash_contribution(random_bits(64), config_.hash);
    for (NodeId o : ids) {
      if (o == m) continue;
      if (!st.known_pubkeys.count(o)) {
        throw ProtocolError("node " + std::to_string(m) + " has no certified key for " + std::to_string(o));
      }
    }
  }
  for (NodeId m : ids) {
    const Octets hr = state(m).own_hr.to_octets();
    for (NodeId o : ids) {
      if (o == m) continue;
      Message msg;
      msg.src = m;
      msg.scope = Scope::unicast(o);
      msg.kind = MessageKind::Contribution;
      msg.sealed = provider_.wrap(hr, crypto::PublicKey{o, state(m).known_pubkeys.at(o)});
      msg.size_bits = digest_bits(config_.hash);
      msg.about = target;
      msg.participants = ids;
      send(std::move(msg), {o}, hr, false);
    }
  }
  std::optional<BitString> agreed;
  for (NodeId m : ids) {
    NodeState& st = mutable_state(m);
    std::vector<keycore::Contribution> contribs{{m, st.own_hr}};
    for (NodeId o : ids) {
      if (o == m) continue;
      auto it = st.contributions.find(o);
      if (it == st.contributions.end()) {
        throw ProtocolError("agreement incomplete in cluster " + std::to_string(cluster) +
                            ": no contribution from node " + std::to_string(o));
      }
      contribs.push_back({o, it->second});
    }
    const BitString gk = keycore::derive_cluster_key(contribs, config_.hash);
    if (agreed && *agreed != gk) throw ProtocolError("cluster " + std::to_string(cluster) + " keys diverged");
    agreed = gk;
    st.keys[{KeyKind::ClusterKey, cluster}] = KeyMaterial{gk, KeyKind::ClusterKey, cluster, 0};
    st.contributions.clear();
  }
  issued_[target] = KeyIssue{*agreed, transport_.clock()};
}

void Engine::distribute_overlay_key(NodeId generator, const std::set<NodeId>& recipients, KeyKind kind,
                                    std::uint32_t scope) {
  if (kind == KeyKind::ClusterHeadKey && !hierarchy_.is_group_leader(generator)) {
    throw ProtocolError("only a group leader generates the cluster-head key");
  }
  if (kind == KeyKind::GroupLeaderKey && hierarchy_.network_leader != generator) {
    throw ProtocolError("only the network leader generates the group-leader key");
  }
  if (kind != KeyKind::ClusterHeadKey && kind != KeyKind::GroupLeaderKey) {
    throw ArgumentError("overlay keys are cluster-head or group-leader keys");
  }
  for (NodeId r : recipients) {
    if (!state(generator).known_pubkeys.count(r)) {
      throw ProtocolError("distribution error: node " + std::to_string(generator) + " has no public key of node " +
                          std::to_string(r));
    }
  }
  const BitString key = random_bits(digest_bits(config_.hash));
  const KeyRef ref = issue(kind, scope, key);
  mutable_state(generator).keys[{kind, scope}] = KeyMaterial{key, kind, scope, ref.epoch};
  for (NodeId r : recipients) send_wrapped_key(generator, r, ref, key, nullptr);
}

BitString Engine::gateway_pair_key(NodeId gateway, NodeId peer) {
  const topology::GatewayLink* link = nullptr;
  for (const auto& l : hierarchy_.links) {
    if (l.gateway == gateway && hierarchy_.clusters.count(l.foreign) && hierarchy_.clusters.at(l.foreign).head == peer) {
      link = &l;
      break;
    }
  }
  if (!link) {
    throw ProtocolError("nodes " + std::to_string(gateway) + " and " + std::to_string(peer) + " are not gateway peers");
  }
  if (!alive(gateway) || !alive(peer)) throw ProtocolError("pair key setup with a departed node");
  auto [it, inserted] = pair_scopes_.try_emplace(*link, next_pair_scope_);
  if (inserted) ++next_pair_scope_;
  const std::uint32_t scope = it->second;
  const BitString key = random_bits(128);
  const KeyRef ref = issue(KeyKind::GatewayPairKey, scope, key);
  mutable_state(gateway).keys[{KeyKind::GatewayPairKey, scope}] =
      KeyMaterial{key, KeyKind::GatewayPairKey, scope, ref.epoch};
  send_wrapped_key(gateway, peer, ref, key, nullptr);
  return key;
}

DataRoute Engine::plan_route(NodeId src, NodeId dst) const {
  if (!alive(src) || !alive(dst)) throw RoutingError("route endpoint is not in the network");
  const auto cs = hierarchy_.cluster_of(src);
  const auto cd = hierarchy_.cluster_of(dst);
  if (!cs || !cd) throw RoutingError("route endpoint belongs to no cluster");
  auto key = [this](KeyKind kind, std::uint32_t scope) {
    auto ref = current_key(kind, scope);
    if (!ref) throw RoutingError("no " + std::string(crypto::to_string(kind)) + " key for scope " + std::to_string(scope));
    return *ref;
  };
  DataRoute route{src, dst, 0, {}};
  std::vector<RouteHop> hops;
  if (*cs == *cd) {
    hops.push_back({src, dst, key(KeyKind::ClusterKey, *cs)});
  } else {
    std::optional<NodeId> gateway;
    for (const auto& l : hierarchy_.links) {
      if (((l.home == *cs && l.foreign == *cd) || (l.home == *cd && l.foreign == *cs)) && alive(l.gateway)) {
        gateway = gateway ? std::min(*gateway, l.gateway) : l.gateway;
      }
    }
    if (gateway) {
      hops.push_back({src, *gateway, key(KeyKind::ClusterKey, *cs)});
      hops.push_back({*gateway, dst, key(KeyKind::ClusterKey, *cd)});
    } else {
      const auto gs = hierarchy_.group_of(*cs);
      const auto gd = hierarchy_.group_of(*cd);
      if (!gs || !gd) throw RoutingError("cluster without a group");
      const NodeId h1 = hierarchy_.clusters.at(*cs).head;
      const NodeId h2 = hierarchy_.clusters.at(*cd).head;
      hops.push_back({src, h1, key(KeyKind::ClusterKey, *cs)});
      if (*gs == *gd) {
        hops.push_back({h1, h2, key(KeyKind::ClusterHeadKey, *gs)});
      } else {
        const NodeId l1 = hierarchy_.groups.at(*gs).leader;
        const NodeId l2 = hierarchy_.groups.at(*gd).leader;
        hops.push_back({h1, l1, key(KeyKind::ClusterHeadKey, *gs)});
        hops.push_back({l1, l2, key(KeyKind::GroupLeaderKey, 0)});
        hops.push_back({l2, h2, key(KeyKind::ClusterHeadKey, *gd)});
      }
      hops.push_back({h2, dst, key(KeyKind::ClusterKey, *cd)});
    }
  }
  for (const auto& hop : hops) {
    if (hop.from != hop.to) route.hops.push_back(hop);
  }
  return route;
}

DataRoute Engine::route(NodeId src, NodeId dst, std::size_t size_bits) {
  if (size_bits == 0) throw ArgumentError("data message of zero bits");
  DataRoute plan = plan_route(src, dst);
  plan.size_bits = size_bits;
  FlowRecord rec;
  begin_flow(FlowClass::Data, src, rec);
  for (const auto& hop : plan.hops) {
    const KeyMaterial* key = state(hop.from).find_key(hop.key.kind, hop.key.scope);
    if (!key || key->epoch != hop.key.epoch) {
      throw RoutingError("node " + std::to_string(hop.from) + " does not hold " + hop.key.to_string());
    }
    const Octets payload = random_bits(((size_bits + 7) / 8) * 8).to_octets();
    Message msg;
    msg.src = hop.from;
    msg.scope = Scope::unicast(hop.to);
    msg.kind = MessageKind::Data;
    msg.sealed = provider_.encrypt_group(payload, *key);
    msg.size_bits = size_bits;
    msg.auxiliary = true;
    try {
      send(std::move(msg), {hop.to}, payload);
    } catch (const ProtocolError& e) {
      throw RoutingError(e.what());
    }
    ++rec.aux_messages;
  }
  finish_flow(rec);
  return plan;
}

std::vector<std::string> Engine::check_convergence() const {
  std::vector<std::string> issues;
  auto check_holders = [&](KeyKind kind, std::uint32_t scope, const std::set<NodeId>& holders) {
    const auto ref = current_key(kind, scope);
    if (!ref) {
      if (!holders.empty()) issues.push_back("no " + std::string(crypto::to_string(kind)) + " key for scope " + std::to_string(scope));
      return;
    }
    const BitString& expected = issued_.at(*ref).key;
    for (NodeId n : holders) {
      if (!alive(n)) continue;
      const KeyMaterial* k = state(n).find_key(kind, scope);
      if (!k) {
        issues.push_back("node " + std::to_string(n) + " lacks " + ref->to_string());
      } else if (k->epoch != ref->epoch || k->key != expected) {
        issues.push_back("node " + std::to_string(n) + " holds " + KeyRef{kind, scope, k->epoch}.to_string() +
                         " instead of " + ref->to_string());
      }
    }
  };
  for (const auto& [cid, c] : hierarchy_.clusters) check_holders(KeyKind::ClusterKey, cid, hierarchy_.key_holders(cid));
  for (const auto& [gid, g] : hierarchy_.groups) check_holders(KeyKind::ClusterHeadKey, gid, hierarchy_.heads_of_group(gid));
  if (!hierarchy_.groups.empty()) check_holders(KeyKind::GroupLeaderKey, 0, hierarchy_.group_leaders());
  for (const auto& l : hierarchy_.links) {
    if (auto scope = pair_scope(l)) {
      check_holders(KeyKind::GatewayPairKey, *scope, {l.gateway, hierarchy_.clusters.at(l.foreign).head});
    }
  }

  for (const auto& [id, st] : states_) {
    if (!alive(id)) continue;
    if (st.role != role_of(hierarchy_, id)) {
      issues.push_back("node " + std::to_string(id) + " role " + std::string(to_string(st.role)) + " is stale");
    }
    for (const auto& [slot, km] : st.keys) {
      bool allowed = true;
      switch (km.kind) {
        case KeyKind::ClusterKey: allowed = hierarchy_.key_holders(km.scope).count(id) != 0; break;
        case KeyKind::ClusterHeadKey: allowed = hierarchy_.heads_of_group(km.scope).count(id) != 0; break;
        case KeyKind::GroupLeaderKey: allowed = hierarchy_.is_group_leader(id); break;
        case KeyKind::GatewayPairKey: allowed = true; break;
      }
      if (!allowed) {
        issues.push_back("node " + std::to_string(id) + " role " + std::string(to_string(st.role)) +
                         " should not hold " + KeyRef{km.kind, km.scope, km.epoch}.to_string());
      }
    }
  }
  return issues;
}

}  // namespace hikeys::protocol
