#include "hikeys/crypto_provider.hpp"

#include <openssl/evp.h>

#include <algorithm>

#include "hikeys/errors.hpp"

namespace hikeys::crypto {
namespace {

constexpr std::size_t kKeyBytes = 32;

void put_u64(Octets& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

Octets tagged(std::string_view label, std::span<const std::uint8_t> body) {
  Octets buf(label.begin(), label.end());
  buf.push_back(0);
  buf.insert(buf.end(), body.begin(), body.end());
  return buf;
}

std::array<std::uint8_t, 8> fingerprint(std::string_view label, std::span<const std::uint8_t> key) {
  const Octets digest = sha256(tagged(label, key));
  std::array<std::uint8_t, 8> out{};
  std::copy_n(digest.begin(), out.size(), out.begin());
  return out;
}

Octets keystream_xor(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Octets out(data.begin(), data.end());
  std::uint64_t counter = 0;
  for (std::size_t off = 0; off < out.size(); off += kKeyBytes, ++counter) {
    Octets block(key.begin(), key.end());
    put_u64(block, counter);
    const Octets pad = sha256(block);
    for (std::size_t i = 0; i < kKeyBytes && off + i < out.size(); ++i) out[off + i] ^= pad[i];
  }
  return out;
}

Octets group_key_bytes(const KeyMaterial& key) {
  if (key.key.empty()) {
    throw ProviderError("group key is empty");
  }
  Octets buf = key.key.to_octets();
  put_u64(buf, key.key.size());
  return buf;
}

}  // namespace

std::string_view to_string(KeyKind kind) {
  switch (kind) {
    case KeyKind::ClusterKey: return "cluster";
    case KeyKind::ClusterHeadKey: return "heads";
    case KeyKind::GroupLeaderKey: return "leaders";
    case KeyKind::GatewayPairKey: return "gateway-pair";
  }
  return "?";
}

ContextKind context_for(KeyKind kind) {
  switch (kind) {
    case KeyKind::ClusterKey: return ContextKind::UnderClusterKey;
    case KeyKind::ClusterHeadKey: return ContextKind::UnderClusterHeadKey;
    case KeyKind::GroupLeaderKey: return ContextKind::UnderGroupLeaderKey;
    case KeyKind::GatewayPairKey: return ContextKind::UnderGatewayPairKey;
  }
  return ContextKind::UnderClusterKey;
}

std::string CipherContext::to_string() const {
  switch (kind) {
    case ContextKind::UnderClusterKey:
      return "cluster-key(" + std::to_string(scope) + "," + std::to_string(epoch) + ")";
    case ContextKind::UnderClusterHeadKey:
      return "heads-key(" + std::to_string(scope) + "," + std::to_string(epoch) + ")";
    case ContextKind::UnderGroupLeaderKey:
      return "leaders-key(" + std::to_string(scope) + "," + std::to_string(epoch) + ")";
    case ContextKind::UnderGatewayPairKey:
      return "pair-key(" + std::to_string(scope) + "," + std::to_string(epoch) + ")";
    case ContextKind::UnderPublicKeyOf:
      return "pk(" + std::to_string(recipient) + ")";
  }
  return "?";
}

Octets sha256(std::span<const std::uint8_t> data) {
  Octets md(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw ProviderError("sha256 failed");
  }
  md.resize(len);
  return md;
}

DeterministicProvider::DeterministicProvider(std::string root_tag) : root_tag_(std::move(root_tag)) {}

KeyPair DeterministicProvider::generate_keypair(NodeId node_id, std::uint64_t seed) const {
  Octets material;
  put_u64(material, seed);
  put_u64(material, node_id);
  KeyPair kp;
  kp.node_id = node_id;
  kp.private_key = sha256(tagged("hikeys-private", material));
  kp.public_key = sha256(tagged("hikeys-public", kp.private_key));
  return kp;
}

Ciphertext DeterministicProvider::wrap(std::span<const std::uint8_t> plaintext,
                                       const PublicKey& recipient) const {
  if (recipient.bytes.size() != kKeyBytes) {
    throw ProviderError("malformed public key for node " + std::to_string(recipient.node_id));
  }
  if (plaintext.empty()) {
    throw ArgumentError("wrap: empty plaintext");
  }
  Ciphertext ct;
  ct.context.kind = ContextKind::UnderPublicKeyOf;
  ct.context.recipient = recipient.node_id;
  ct.plaintext_bits = plaintext.size() * 8;
  ct.key_tag = fingerprint("wrap", recipient.bytes);
  ct.payload = keystream_xor(recipient.bytes, plaintext);
  return ct;
}

Octets DeterministicProvider::unwrap(const Ciphertext& ct, const KeyPair& recipient) const {
  if (ct.context.kind != ContextKind::UnderPublicKeyOf) {
    throw WrongKeyError("ciphertext is not sealed to a public key");
  }
  if (recipient.private_key.size() != kKeyBytes) {
    throw ProviderError("malformed private key");
  }
  const Octets derived_public = sha256(tagged("hikeys-public", recipient.private_key));
  if (ct.context.recipient != recipient.node_id || fingerprint("wrap", derived_public) != ct.key_tag) {
    throw DecryptionDenied("private key of node " + std::to_string(recipient.node_id) +
                           " cannot open " + ct.context.to_string());
  }
  return keystream_xor(derived_public, ct.payload);
}

Ciphertext DeterministicProvider::encrypt_group(std::span<const std::uint8_t> plaintext,
                                                const KeyMaterial& key) const {
  if (plaintext.empty()) {
    throw ArgumentError("encrypt_group: empty plaintext");
  }
  const Octets kb = group_key_bytes(key);
  Ciphertext ct;
  ct.context.kind = context_for(key.kind);
  ct.context.scope = key.scope;
  ct.context.epoch = key.epoch;
  ct.plaintext_bits = plaintext.size() * 8;
  ct.key_tag = fingerprint("group", kb);
  ct.payload = keystream_xor(kb, plaintext);
  return ct;
}

Octets DeterministicProvider::decrypt_group(const Ciphertext& ct, const KeyMaterial& key) const {
  if (ct.context.kind != context_for(key.kind) || ct.context.scope != key.scope) {
    throw WrongKeyError("key " + std::string(to_string(key.kind)) + "(" + std::to_string(key.scope) +
                        ") cannot open " + ct.context.to_string());
  }
  if (ct.context.epoch != key.epoch) {
    throw StaleKeyError("epoch " + std::to_string(key.epoch) + " cannot open " +
                        ct.context.to_string());
  }
  const Octets kb = group_key_bytes(key);
  if (fingerprint("group", kb) != ct.key_tag) {
    throw WrongKeyError("key bits do not match " + ct.context.to_string());
  }
  return keystream_xor(kb, ct.payload);
}

Certificate DeterministicProvider::certificate_from(const KeyPair& subject, std::string issuer) {
  return Certificate{subject.node_id, subject.public_key, std::move(issuer)};
}

Certificate DeterministicProvider::issue_certificate(const KeyPair& subject) const {
  return certificate_from(subject, root_tag_);
}

bool DeterministicProvider::verify(const Certificate& cert) const {
  return cert.issuer == root_tag_ && cert.public_key.size() == kKeyBytes;
}

}  // namespace hikeys::crypto
