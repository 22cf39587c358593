#include <algorithm>

#include "hikeys/errors.hpp"
#include "hikeys/simnet.hpp"

namespace hikeys::simnet {
namespace {

crypto::KeyKind kind_of(crypto::ContextKind ctx) {
  switch (ctx) {
    case crypto::ContextKind::UnderClusterHeadKey: return crypto::KeyKind::ClusterHeadKey;
    case crypto::ContextKind::UnderGroupLeaderKey: return crypto::KeyKind::GroupLeaderKey;
    case crypto::ContextKind::UnderGatewayPairKey: return crypto::KeyKind::GatewayPairKey;
    default: return crypto::KeyKind::ClusterKey;
  }
}

}  // namespace

PrincipalKnowledge::PrincipalKnowledge(NodeId self, const crypto::CryptoProvider& provider,
                                       const crypto::KeyPair& keypair, HashId hash, std::size_t random_width)
    : self_(self), provider_(&provider), keypair_(keypair), hash_(hash), width_(random_width) {}

void PrincipalKnowledge::observe(const TranscriptEntry& entry) {
  const Message& msg = entry.message;
  if (msg.src == self_) {
    if (!entry.sender_plaintext.empty()) absorb(msg, entry.sender_plaintext);
    return;
  }
  if (!msg.sealed) return;
  const auto& ctx = msg.sealed->context;
  if (ctx.kind == crypto::ContextKind::UnderPublicKeyOf) {
    if (ctx.recipient != self_) return;
    try {
      absorb(msg, provider_->unwrap(*msg.sealed, keypair_));
    } catch (const ProviderError&) {
    }
    return;
  }
  const protocol::KeyRef ref{kind_of(ctx.kind), ctx.scope, ctx.epoch};
  auto it = keys_.find(ref);
  if (it == keys_.end()) {
    sealed_under_[ref].push_back(msg);
    return;
  }
  try {
    absorb(msg, provider_->decrypt_group(*msg.sealed, crypto::KeyMaterial{it->second, ref.kind, ref.scope, ref.epoch}));
  } catch (const ProviderError&) {
  }
}

void PrincipalKnowledge::absorb(const Message& msg, const crypto::Octets& plaintext) {
  if (!msg.about) return;
  const protocol::KeyRef& ref = *msg.about;
  switch (msg.kind) {
    case protocol::MessageKind::KeyWrap:
      learn_key(ref, BitString::from_octets(plaintext));
      break;
    case protocol::MessageKind::RekeyJoin:
    case protocol::MessageKind::RekeyLeave: {
      if (ref.epoch == 0) return;
      keycore::RandomPair pair = protocol::decode_pair(plaintext, width_);
      const protocol::KeyRef prev{ref.kind, ref.scope, ref.epoch - 1};
      auto it = keys_.find(prev);
      if (it != keys_.end()) {
        learn_key(ref, protocol::rekey_transform(ref.kind, it->second, pair, hash_));
      } else {
        pending_rekeys_[prev].emplace_back(ref, std::move(pair));
      }
      break;
    }
    case protocol::MessageKind::Contribution: {
      if (keys_.count(ref)) return;
      Agreement& ag = agreements_[ref];
      if (ag.participants.empty()) ag.participants = msg.participants;
      ag.hrs[msg.src] = BitString::from_octets(plaintext);
      const bool complete = std::all_of(ag.participants.begin(), ag.participants.end(),
                                        [&ag](NodeId p) { return ag.hrs.count(p) != 0; });
      if (complete && !ag.participants.empty()) {
        std::vector<keycore::Contribution> contribs;
        for (NodeId p : ag.participants) contribs.push_back({p, ag.hrs.at(p)});
        learn_key(ref, keycore::derive_cluster_key(contribs, hash_));
        agreements_.erase(ref);
      }
      break;
    }
    default:
      break;
  }
}

void PrincipalKnowledge::learn_key(const protocol::KeyRef& ref, const BitString& key) {
  if (!keys_.emplace(ref, key).second) return;
  if (auto it = sealed_under_.find(ref); it != sealed_under_.end()) {
    auto waiting = std::move(it->second);
    sealed_under_.erase(it);
    const crypto::KeyMaterial km{key, ref.kind, ref.scope, ref.epoch};
    for (const auto& msg : waiting) {
      try {
        absorb(msg, provider_->decrypt_group(*msg.sealed, km));
      } catch (const ProviderError&) {
      }
    }
  }
  if (auto it = pending_rekeys_.find(ref); it != pending_rekeys_.end()) {
    auto waiting = std::move(it->second);
    pending_rekeys_.erase(it);
    for (const auto& [next, pair] : waiting) learn_key(next, protocol::rekey_transform(next.kind, key, pair, hash_));
  }
}

KnowledgeClosure::KnowledgeClosure(const crypto::CryptoProvider& provider, const protocol::ProtocolConfig& config)
    : provider_(provider), config_(config) {}

void KnowledgeClosure::add_principal(NodeId node) {
  if (principals_.count(node)) return;
  principals_.emplace(node, PrincipalKnowledge(node, provider_, provider_.generate_keypair(node, config_.seed),
                                               config_.hash, config_.random_width));
}

void KnowledgeClosure::observe(const TranscriptEntry& entry) {
  std::set<NodeId> who(entry.observers.begin(), entry.observers.end());
  who.insert(entry.message.src);
  for (NodeId n : who) {
    auto it = principals_.find(n);
    if (it != principals_.end()) it->second.observe(entry);
  }
}

std::string_view to_string(ViolationKind kind) { return kind == ViolationKind::Forward ? "forward" : "backward"; }

std::string Violation::describe() const {
  return std::string(to_string(kind)) + ": node " + std::to_string(node) + " knows " + key.to_string() +
         " issued at " + std::to_string(issued_at) + (kind == ViolationKind::Forward ? ", departed at " : ", joined at ") +
         std::to_string(membership_clock);
}

std::vector<Violation> audit_secrecy(const std::vector<TranscriptEntry>& transcript, const protocol::Engine& engine,
                                     const crypto::CryptoProvider& provider) {
  KnowledgeClosure closure(provider, engine.config());
  for (const auto& [id, st] : engine.states()) closure.add_principal(id);
  for (const auto& e : transcript) closure.observe(e);

  std::vector<Violation> out;
  auto scan = [&](const protocol::MembershipEvent& ev, ViolationKind kind) {
    for (const auto& [ref, key] : closure.of(ev.node).keys()) {
      auto it = engine.issued_keys().find(ref);
      if (it == engine.issued_keys().end() || it->second.key != key) continue;
      const bool bad = kind == ViolationKind::Forward ? it->second.issued_at >= ev.clock : it->second.issued_at < ev.clock;
      if (bad) out.push_back({kind, ev.node, ref, it->second.issued_at, ev.clock});
    }
  };
  for (const auto& d : engine.departures()) scan(d, ViolationKind::Forward);
  for (const auto& j : engine.joins()) scan(j, ViolationKind::Backward);
  return out;
}

}  // namespace hikeys::simnet
