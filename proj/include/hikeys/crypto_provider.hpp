#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hikeys/bitstring.hpp"
#include "hikeys/keycore.hpp"

namespace hikeys::crypto {

using Octets = std::vector<std::uint8_t>;

enum class KeyKind { ClusterKey, ClusterHeadKey, GroupLeaderKey, GatewayPairKey };
std::string_view to_string(KeyKind kind);

/// A symmetric key together with the scope it protects and its version.
/// `scope` is a cluster id, group id, gateway link id, or 0 for the network.
struct KeyMaterial {
  BitString key;
  KeyKind kind = KeyKind::ClusterKey;
  std::uint32_t scope = 0;
  std::uint64_t epoch = 0;
};

struct PublicKey {
  NodeId node_id = 0;
  Octets bytes;
};

struct KeyPair {
  NodeId node_id = 0;
  Octets public_key;
  Octets private_key;

  PublicKey public_part() const { return {node_id, public_key}; }
};

enum class ContextKind {
  UnderClusterKey,
  UnderClusterHeadKey,
  UnderGroupLeaderKey,
  UnderGatewayPairKey,
  UnderPublicKeyOf,
};

/// Identifies the single capability able to open a ciphertext.
struct CipherContext {
  ContextKind kind = ContextKind::UnderPublicKeyOf;
  std::uint32_t scope = 0;     // group-key contexts
  std::uint64_t epoch = 0;     // group-key contexts
  NodeId recipient = 0;        // UnderPublicKeyOf

  bool operator==(const CipherContext&) const = default;
  std::string to_string() const;
};

ContextKind context_for(KeyKind kind);

struct Ciphertext {
  Octets payload;
  CipherContext context;
  std::size_t plaintext_bits = 0;
  std::array<std::uint8_t, 8> key_tag{};  // fingerprint of the sealing key

  bool operator==(const Ciphertext&) const = default;
};

struct Certificate {
  NodeId node_id = 0;
  Octets public_key;
  std::string issuer;
};

/// Hashing, group encryption, per-recipient wrapping and certificates.
class CryptoProvider {
 public:
  virtual ~CryptoProvider() = default;

  virtual KeyPair generate_keypair(NodeId node_id, std::uint64_t seed) const = 0;
  virtual Ciphertext wrap(std::span<const std::uint8_t> plaintext,
                          const PublicKey& recipient) const = 0;
  virtual Octets unwrap(const Ciphertext& ct, const KeyPair& recipient) const = 0;
  virtual Ciphertext encrypt_group(std::span<const std::uint8_t> plaintext,
                                   const KeyMaterial& key) const = 0;
  virtual Octets decrypt_group(const Ciphertext& ct, const KeyMaterial& key) const = 0;
  virtual Certificate issue_certificate(const KeyPair& subject) const = 0;
  virtual bool verify(const Certificate& cert) const = 0;
};

/// Reproducible backend: keys are derived from (node id, seed) with SHA-256
/// and ciphertexts are tagged envelopes whose access checks are exact. The
/// keystream XOR is not meant to resist cryptanalysis.
class DeterministicProvider final : public CryptoProvider {
 public:
  explicit DeterministicProvider(std::string root_tag = "hikeys-root");

  const std::string& root_tag() const { return root_tag_; }

  KeyPair generate_keypair(NodeId node_id, std::uint64_t seed) const override;
  Ciphertext wrap(std::span<const std::uint8_t> plaintext,
                  const PublicKey& recipient) const override;
  Octets unwrap(const Ciphertext& ct, const KeyPair& recipient) const override;
  Ciphertext encrypt_group(std::span<const std::uint8_t> plaintext,
                           const KeyMaterial& key) const override;
  Octets decrypt_group(const Ciphertext& ct, const KeyMaterial& key) const override;
  Certificate issue_certificate(const KeyPair& subject) const override;
  bool verify(const Certificate& cert) const override;

  /// Certificate signed by an arbitrary issuer, used to model forgeries.
  static Certificate certificate_from(const KeyPair& subject, std::string issuer);

 private:
  std::string root_tag_;
};

/// SHA-256 of arbitrary octets; shared by the provider and the simulator.
Octets sha256(std::span<const std::uint8_t> data);

}  // namespace hikeys::crypto
