#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hikeys/protocol.hpp"
#include "hikeys/scenario.hpp"
#include "hikeys/topology.hpp"

namespace hikeys::simnet {

using protocol::Message;
using scenario::EnergyParams;

enum class EnergyRole { Tx, Rx, RelayTx, RelayRx };
std::string_view to_string(EnergyRole role);

struct EnergyDebit {
  NodeId node = 0;
  EnergyRole role = EnergyRole::Tx;
  double joules = 0.0;
  bool operator==(const EnergyDebit&) const = default;
};

struct NodeEnergy {
  double remaining = 0.0;
  double tx = 0.0;
  double rx = 0.0;
  double relay = 0.0;
  double spent() const { return tx + rx + relay; }
  bool operator==(const NodeEnergy&) const = default;
};

class EnergyLedger {
 public:
  explicit EnergyLedger(EnergyParams params = {}) : params_(params) {}

  void add_node(NodeId node);
  /// Charges `node` for moving `bits`; remaining energy bottoms out at 0.
  EnergyDebit debit(NodeId node, std::size_t bits, EnergyRole role);
  const NodeEnergy& at(NodeId node) const;
  bool dead(NodeId node) const;
  const std::map<NodeId, NodeEnergy>& nodes() const { return nodes_; }
  double total_spent() const;
  const EnergyParams& params() const { return params_; }

 private:
  EnergyParams params_;
  std::map<NodeId, NodeEnergy> nodes_;
};

struct TranscriptEntry {
  std::uint64_t seq = 0;
  double time = 0.0;
  Message message;
  std::vector<NodeId> audience;
  std::vector<NodeId> reached;
  /// Unicast: relay chain src..dst. Broadcast: transmitters, source first.
  std::vector<NodeId> path;
  /// Principals able to observe the transmission: radio neighbours of the
  /// transmitters plus every departed node.
  std::vector<NodeId> observers;
  std::vector<EnergyDebit> debits;
  /// What the sender sealed; audit input only, never serialized.
  crypto::Octets sender_plaintext;
};

/// Radio medium: live graph, relaying, transcript and energy metering.
class Simulator final : public protocol::Transport {
 public:
  Simulator(std::span<const topology::NodeSite> sites, EnergyParams energy);

  std::vector<NodeId> deliver(const Message& msg, const std::vector<NodeId>& audience,
                              const crypto::Octets& sender_plaintext) override;
  const topology::AdjacencyGraph& graph() const override { return graph_; }
  void attach(const topology::NodeSite& site) override;
  void detach(NodeId node) override;
  std::uint64_t clock() const override { return transcript_.size(); }
  double now() const override { return now_; }
  void set_time(double t) { now_ = t; }

  /// Shortest relay chain (ties go to the smallest next id); empty if none.
  std::vector<NodeId> shortest_path(NodeId src, NodeId dst);

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const EnergyLedger& energy() const { return ledger_; }
  const std::map<NodeId, topology::NodeSite>& sites() const { return sites_; }
  const std::set<NodeId>& departed() const { return departed_; }

 private:
  bool relays(NodeId n) const { return graph_.contains(n) && !ledger_.dead(n); }
  const std::map<NodeId, std::size_t>& distances_to(NodeId dst);
  std::vector<NodeId> hearers(NodeId transmitter) const;

  topology::AdjacencyGraph graph_;
  std::map<NodeId, topology::NodeSite> sites_;
  std::set<NodeId> departed_;
  EnergyLedger ledger_;
  std::vector<TranscriptEntry> transcript_;
  std::map<NodeId, std::map<NodeId, std::size_t>> dist_cache_;
  double now_ = 0.0;
};

// ---------------------------------------------------------------------------
// Secrecy audit

/// Keys one principal can reach from what it observed.
class PrincipalKnowledge {
 public:
  PrincipalKnowledge(NodeId self, const crypto::CryptoProvider& provider, const crypto::KeyPair& keypair,
                     HashId hash, std::size_t random_width);

  void observe(const TranscriptEntry& entry);
  const std::map<protocol::KeyRef, BitString>& keys() const { return keys_; }
  bool knows(const protocol::KeyRef& ref) const { return keys_.count(ref) != 0; }

 private:
  void learn_key(const protocol::KeyRef& ref, const BitString& key);
  void absorb(const Message& msg, const crypto::Octets& plaintext);

  NodeId self_;
  const crypto::CryptoProvider* provider_;
  crypto::KeyPair keypair_;
  HashId hash_;
  std::size_t width_;
  std::map<protocol::KeyRef, BitString> keys_;
  std::map<protocol::KeyRef, std::vector<Message>> sealed_under_;
  std::map<protocol::KeyRef, std::vector<std::pair<protocol::KeyRef, keycore::RandomPair>>> pending_rekeys_;
  struct Agreement {
    std::vector<NodeId> participants;
    std::map<NodeId, BitString> hrs;
  };
  std::map<protocol::KeyRef, Agreement> agreements_;
};

/// Per-principal closure over a transcript; feeding entries one at a time
/// and feeding them all at once give the same result.
class KnowledgeClosure {
 public:
  KnowledgeClosure(const crypto::CryptoProvider& provider, const protocol::ProtocolConfig& config);

  void add_principal(NodeId node);
  void observe(const TranscriptEntry& entry);
  const std::map<NodeId, PrincipalKnowledge>& principals() const { return principals_; }
  const PrincipalKnowledge& of(NodeId node) const { return principals_.at(node); }

 private:
  const crypto::CryptoProvider& provider_;
  protocol::ProtocolConfig config_;
  std::map<NodeId, PrincipalKnowledge> principals_;
};

enum class ViolationKind { Forward, Backward };
std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::Forward;
  NodeId node = 0;
  protocol::KeyRef key;
  std::uint64_t issued_at = 0;
  std::uint64_t membership_clock = 0;  // departure or join
  bool operator==(const Violation&) const = default;
  std::string describe() const;
};

std::vector<Violation> audit_secrecy(const std::vector<TranscriptEntry>& transcript, const protocol::Engine& engine,
                                     const crypto::CryptoProvider& provider);

// ---------------------------------------------------------------------------
// Scenario runs

struct RunOptions {
  bool insecure_variant = false;
  bool audit = true;
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
};

struct EventOutcome {
  std::size_t index = 0;  // 1-based position in the scenario
  std::string kind;
  std::string error;      // empty on success
  bool operator==(const EventOutcome&) const = default;
};

struct Counters {
  std::size_t messages = 0;
  std::size_t transmissions = 0;
  std::uint64_t bits_on_air = 0;
  std::size_t rekey_broadcasts = 0;
  std::size_t rekey_unicasts = 0;
  bool operator==(const Counters&) const = default;
};

struct SimulationReport {
  std::uint64_t seed = 0;
  std::size_t node_count = 0;
  std::size_t random_width = 16;
  HashId hash = HashId::Sha1;
  bool insecure_variant = false;
  std::size_t transcript_length = 0;
  Counters counters;
  std::vector<protocol::FlowRecord> flows;
  std::map<NodeId, NodeEnergy> energy;
  double total_energy = 0.0;
  topology::Hierarchy hierarchy;
  std::vector<std::string> convergence_issues;
  std::vector<std::string> audit_violations;
  std::size_t forward_violations = 0;
  std::size_t backward_violations = 0;
  std::vector<protocol::DataRoute> routes;
  std::vector<EventOutcome> failed_events;
  bool operator==(const SimulationReport&) const = default;
};

struct RunResult {
  SimulationReport report;
  std::vector<TranscriptEntry> transcript;
};

/// Sites come from the scenario or, when absent, from its hierarchy preset.
/// Throws ScenarioError for unusable scenarios; ProtocolError aborts the run.
RunResult run(const scenario::Scenario& scenario, const RunOptions& options = {});

struct SweepRow {
  std::size_t size_bits = 0;
  double mean_energy = 0.0;  // per node
  double total_energy = 0.0;
};

/// One run per size with every data message resized; scenarios without data
/// traffic get unicasts from the first head to each of its members.
std::vector<SweepRow> energy_sweep(const scenario::Scenario& scenario, std::vector<std::size_t> sizes);

}  // namespace hikeys::simnet
