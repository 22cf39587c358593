#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hikeys/bitstring.hpp"
#include "hikeys/crypto_provider.hpp"
#include "hikeys/keycore.hpp"
#include "hikeys/topology.hpp"

namespace hikeys::protocol {

using crypto::KeyKind;
using crypto::KeyMaterial;
using crypto::Octets;
using topology::ClusterId;
using topology::GroupId;

enum class Role { Member, Gateway, ClusterHead, GroupLeader, NetworkLeader };
std::string_view to_string(Role role);
/// Highest role the hierarchy assigns to `node`.
Role role_of(const topology::Hierarchy& h, NodeId node);

enum class MessageKind {
  Hello,
  NeighborCount,
  IAmClusterHead,
  IAmMember,
  AnyClusterHeads,
  PubKeyCert,
  Contribution,
  KeyWrap,
  RekeyJoin,
  RekeyLeave,
  LeaveNotice,
  JoinRequest,
  Ack,
  Delegation,
  Data,
};
std::string_view to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(std::string_view text);

enum class ScopeKind { Unicast, Neighbors, ClusterBroadcast, HeadsBroadcast, LeadersBroadcast };

struct Scope {
  ScopeKind kind = ScopeKind::Unicast;
  std::uint32_t target = 0;  // node, cluster or group id; unused otherwise

  static Scope unicast(NodeId n) { return {ScopeKind::Unicast, n}; }
  static Scope neighbors() { return {ScopeKind::Neighbors, 0}; }
  static Scope cluster(ClusterId c) { return {ScopeKind::ClusterBroadcast, c}; }
  static Scope heads(GroupId g) { return {ScopeKind::HeadsBroadcast, g}; }
  static Scope leaders() { return {ScopeKind::LeadersBroadcast, 0}; }

  bool is_broadcast() const { return kind != ScopeKind::Unicast; }
  std::string to_string() const;
  bool operator==(const Scope&) const = default;
};

/// Names one version of one group key. Scope 0 is the network-wide leader key.
struct KeyRef {
  KeyKind kind = KeyKind::ClusterKey;
  std::uint32_t scope = 0;
  std::uint64_t epoch = 0;

  auto operator<=>(const KeyRef&) const = default;
  bool operator==(const KeyRef&) const = default;
  std::string to_string() const;
};

struct Message {
  std::uint64_t msg_id = 0;
  NodeId src = 0;
  Scope scope;
  MessageKind kind = MessageKind::Hello;
  std::optional<crypto::Ciphertext> sealed;  // encrypted body, if any
  Octets plain;                              // cleartext body otherwise
  std::size_t size_bits = 0;                 // on-air payload size

  // Cleartext header fields.
  std::optional<KeyRef> about;     // key contributed to, carried, or rekeyed
  std::vector<NodeId> participants;  // contributors of a cluster agreement
  std::uint64_t flow_id = 0;
  bool auxiliary = false;  // not part of the rekey accounting (deliveries, notices)
};

enum class FlowClass { Setup, Join, MemberLeave, GatewayLeave, HeadLeave, LeaderLeave, Data };
std::string_view to_string(FlowClass cls);
std::optional<FlowClass> parse_flow_class(std::string_view text);

/// One key level refreshed inside a flow.
struct LevelRecord {
  KeyRef new_key;
  NodeId initiator = 0;
  std::size_t continuing = 0;  // holders that keep the key, initiator included
  std::size_t newcomers = 0;   // holders served by a separate delivery
  std::size_t wire_messages = 0;
  std::size_t depth = 0;       // 1 when every rekey message leaves the initiator
  bool operator==(const LevelRecord&) const = default;
};

struct FlowRecord {
  std::uint64_t flow_id = 0;
  FlowClass cls = FlowClass::Setup;
  NodeId subject = 0;
  double time = 0.0;
  bool rejected = false;
  std::size_t rounds = 0;
  std::size_t billed_broadcasts = 0;  // self-update billed, as in the cost tables
  std::size_t billed_unicasts = 0;
  std::size_t wire_broadcasts = 0;   // rekey messages actually transmitted
  std::size_t wire_unicasts = 0;
  std::size_t aux_messages = 0;      // deliveries, notices, acks, delegations
  std::vector<LevelRecord> levels;
  bool operator==(const FlowRecord&) const = default;
};

struct KeyIssue {
  BitString key;
  std::uint64_t issued_at = 0;  // transcript clock at generation
};

/// Single-owner state of one node.
struct NodeState {
  NodeId node_id = 0;
  Role role = Role::Member;
  crypto::KeyPair keypair;
  crypto::Certificate certificate;
  std::map<NodeId, Octets> known_pubkeys;
  std::map<std::pair<KeyKind, std::uint32_t>, KeyMaterial> keys;
  // Pending cluster agreement.
  BitString own_hr;
  std::map<NodeId, BitString> contributions;

  const KeyMaterial* find_key(KeyKind kind, std::uint32_t scope) const;
};

struct ProtocolConfig {
  std::size_t random_width = 16;
  HashId hash = HashId::Sha1;
  std::size_t max_clusters_per_group = 8;
  std::uint64_t seed = 0;
  /// Broadcast leave rekey pairs under the old key of each level instead of
  /// wrapping them per holder. Leaks the new key to the departed node; used
  /// to exercise the secrecy audit.
  bool insecure_broadcast_leave = false;
};

/// Message delivery seen from the protocol. Implemented by the simulator.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Delivers `msg` towards every node of `audience`; returns those reached.
  /// `sender_plaintext` is what the sender sealed, kept for the audit.
  virtual std::vector<NodeId> deliver(const Message& msg, const std::vector<NodeId>& audience,
                                      const Octets& sender_plaintext) = 0;
  virtual const topology::AdjacencyGraph& graph() const = 0;
  virtual void attach(const topology::NodeSite& site) = 0;
  virtual void detach(NodeId node) = 0;
  /// Number of transcript entries so far.
  virtual std::uint64_t clock() const = 0;
  virtual double now() const = 0;
};

struct RouteHop {
  NodeId from = 0;
  NodeId to = 0;
  KeyRef key;
  bool operator==(const RouteHop&) const = default;
};

struct DataRoute {
  NodeId src = 0;
  NodeId dst = 0;
  std::size_t size_bits = 0;
  std::vector<RouteHop> hops;  // one encryption/decryption per hop
  bool operator==(const DataRoute&) const = default;
};

struct MembershipEvent {
  NodeId node = 0;
  std::uint64_t clock = 0;
};

class Engine {
 public:
  Engine(ProtocolConfig config, const crypto::CryptoProvider& provider, Transport& transport);

  /// Initialization messages, cluster key agreement, overlay keys and
  /// gateway pair keys for a freshly initialized network.
  void bootstrap(const topology::Hierarchy& hierarchy, std::span<const topology::NodeSite> sites);

  // Building blocks, public for tests.
  void run_cluster_agreement(ClusterId cluster);
  /// Generator draws a key and wraps it to every recipient.
  void distribute_overlay_key(NodeId generator, const std::set<NodeId>& recipients, KeyKind kind,
                              std::uint32_t scope);
  /// Gateway and peer end up sharing a fresh pair key.
  BitString gateway_pair_key(NodeId gateway, NodeId peer);

  FlowRecord handle_join(const topology::NodeSite& site, const std::string& issuer = {});
  /// Dispatches on the leaving node's role.
  FlowRecord handle_leave(NodeId leaving, std::optional<ClusterId> moves_into = std::nullopt);
  FlowRecord handle_leave_member(NodeId leaving, std::optional<NodeId> adjacent = std::nullopt);
  FlowRecord handle_leave_gateway(NodeId leaving, std::optional<ClusterId> moves_into = std::nullopt);
  FlowRecord handle_leave_head(NodeId leaving);
  FlowRecord handle_leave_group_leader(NodeId leaving);

  /// Logical encryption chain from src to dst; throws RoutingError.
  DataRoute plan_route(NodeId src, NodeId dst) const;
  /// Plans and sends a data message hop by hop.
  DataRoute route(NodeId src, NodeId dst, std::size_t size_bits);

  /// Disagreements between holders of a key, or holders lagging behind the
  /// latest epoch, plus role/key permission mismatches.
  std::vector<std::string> check_convergence() const;

  const topology::Hierarchy& hierarchy() const { return hierarchy_; }
  const std::map<NodeId, NodeState>& states() const { return states_; }
  const NodeState& state(NodeId node) const;
  const std::map<KeyRef, KeyIssue>& issued_keys() const { return issued_; }
  std::optional<KeyRef> current_key(KeyKind kind, std::uint32_t scope) const;
  const std::vector<MembershipEvent>& departures() const { return departures_; }
  const std::vector<MembershipEvent>& joins() const { return joins_; }
  const std::vector<FlowRecord>& flows() const { return flows_; }
  bool alive(NodeId node) const { return states_.count(node) && !departed_.count(node); }
  const ProtocolConfig& config() const { return config_; }
  /// Scope used for the pair key of a gateway link.
  std::optional<std::uint32_t> pair_scope(const topology::GatewayLink& link) const;

 private:
  struct LevelPlan {
    KeyKind kind = KeyKind::ClusterKey;
    std::uint32_t scope = 0;
    NodeId initiator = 0;
    std::set<NodeId> continuing;
    std::set<NodeId> newcomers;
  };

  NodeState& mutable_state(NodeId node);
  NodeState& add_node_state(NodeId node, const std::string& issuer);
  void sync_roles();

  std::uint64_t begin_flow(FlowClass cls, NodeId subject, FlowRecord& rec);
  void finish_flow(FlowRecord& rec);
  std::vector<NodeId> send(Message msg, const std::vector<NodeId>& audience, const Octets& sender_plain,
                           bool require_all = true);
  void send_plain(NodeId src, NodeId dst, MessageKind kind, std::size_t bits, FlowRecord* rec);
  void send_wrapped_key(NodeId src, NodeId dst, const KeyRef& ref, const BitString& key, FlowRecord* rec);
  void ensure_pubkey(NodeId holder, NodeId subject, FlowRecord* rec);
  void receive(NodeId at, const Message& msg);

  BitString random_bits(std::size_t width);
  keycore::RandomPair random_pair();
  KeyRef issue(KeyKind kind, std::uint32_t scope, const BitString& key);
  BitString apply_rekey(KeyKind kind, const BitString& old_key, const keycore::RandomPair& pair) const;

  /// Leave-style rekey: wrapped unicasts to continuing holders.
  void rekey_leave_level(FlowRecord& rec, const LevelPlan& plan);
  /// Fresh key for a level whose old holders are all gone.
  void reseed_level(FlowRecord& rec, const LevelPlan& plan);

  NodeId pick_adjacent(NodeId around, const std::set<NodeId>& candidates) const;
  NodeId reelect_head(const std::set<NodeId>& members) const;
  void record_departure(NodeId node);
  /// Puts `new_head` in charge, or dissolves the cluster when it is 0.
  bool install_head(ClusterId cluster, NodeId new_head);
  void refresh_pair_keys_for(ClusterId cluster, FlowRecord* rec);
  void notify(NodeId from, NodeId to, MessageKind kind, FlowRecord& rec);

  ProtocolConfig config_;
  const crypto::CryptoProvider& provider_;
  Transport& transport_;
  std::mt19937_64 rng_;

  topology::Hierarchy hierarchy_;
  std::map<NodeId, NodeState> states_;
  std::set<NodeId> departed_;
  std::map<KeyRef, KeyIssue> issued_;
  std::map<topology::GatewayLink, std::uint32_t> pair_scopes_;
  std::uint32_t next_pair_scope_ = 1;
  std::vector<MembershipEvent> departures_;
  std::vector<MembershipEvent> joins_;
  std::vector<FlowRecord> flows_;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t next_flow_id_ = 1;
  std::uint64_t current_flow_ = 0;
};

/// Encodes a pair as the 2w-bit octet string r1 || r2.
Octets encode_pair(const keycore::RandomPair& pair);
keycore::RandomPair decode_pair(const Octets& bytes, std::size_t width);

/// Applies the transform used for rekeying `kind` (shared with the audit).
BitString rekey_transform(KeyKind kind, const BitString& old_key, const keycore::RandomPair& pair,
                          HashId hash);

// Sizes of setup and control payloads, in bits.
inline constexpr std::size_t kIdBits = 32;
inline constexpr std::size_t kCertificateBits = 32 + 256 + 64;

}  // namespace hikeys::protocol
