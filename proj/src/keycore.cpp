#include "hikeys/keycore.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <string>

#include "hikeys/errors.hpp"

namespace hikeys {

HashId parse_hash_id(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "sha1" || lower == "sha-1") return HashId::Sha1;
  if (lower == "sha256" || lower == "sha-256") return HashId::Sha256;
  throw ConfigError("unknown hash algorithm '" + std::string(name) + "'");
}

std::string_view to_string(HashId id) {
  return id == HashId::Sha1 ? "sha1" : "sha256";
}

std::size_t digest_bits(HashId id) { return id == HashId::Sha1 ? 160 : 256; }

namespace keycore {

bool valid_random_width(std::size_t w) { return w == 8 || w == 16 || w == 32; }

RandomPair::RandomPair(BitString first, BitString second)
    : r1(std::move(first)), r2(std::move(second)) {
  if (r1.size() != r2.size() || !valid_random_width(r1.size())) {
    throw ArgumentError("random pair halves must both be 8, 16 or 32 bits");
  }
}

BitString hash_contribution(const BitString& random_value, HashId hash) {
  if (random_value.empty()) {
    throw ArgumentError("hash_contribution: empty input");
  }
  const auto octets = random_value.to_octets();
  std::uint8_t md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const EVP_MD* md_type = hash == HashId::Sha1 ? EVP_sha1() : EVP_sha256();
  if (EVP_Digest(octets.data(), octets.size(), md, &len, md_type, nullptr) != 1) {
    throw ProviderError("digest computation failed");
  }
  return BitString::from_octets(std::span<const std::uint8_t>(md, len));
}

BitString derive_cluster_key(std::span<const Contribution> contribs, HashId hash) {
  if (contribs.empty()) {
    throw ArgumentError("derive_cluster_key: no contributions");
  }
  std::vector<const Contribution*> sorted;
  sorted.reserve(contribs.size());
  for (const auto& c : contribs) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(),
            [](const Contribution* a, const Contribution* b) { return a->node_id < b->node_id; });
  BitString joined;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i]->node_id == sorted[i - 1]->node_id) {
      throw ProtocolError("derive_cluster_key: duplicate contribution from node " +
                          std::to_string(sorted[i]->node_id));
    }
    joined.append(sorted[i]->hr);
  }
  return hash_contribution(joined, hash);
}

BitString mix(const RandomPair& pair, HashId hash) {
  return hash_contribution(pair.concat(), hash).last(pair.width());
}

BitString insert_at(const BitString& key, const BitString& s, std::size_t pos) {
  if (pos > key.size()) {
    throw ArgumentError("insert_at: position " + std::to_string(pos) +
                        " beyond key length " + std::to_string(key.size()));
  }
  BitString out = key.first(pos);
  out.append(s);
  out.append(key.slice(pos, key.size() - pos));
  return out;
}

std::size_t insertion_position(const BitString& old_key, const RandomPair& pair) {
  return static_cast<std::size_t>(pair.r1.value() % (old_key.size() + 1));
}

BitString join_leave_rekey(const BitString& old_key, const RandomPair& pair, HashId hash) {
  if (old_key.empty()) {
    throw ArgumentError("join_leave_rekey: empty key");
  }
  return insert_at(old_key, mix(pair, hash), insertion_position(old_key, pair));
}

BitString ch_rekey(const BitString& old_key, const RandomPair& pair) {
  const std::size_t w = pair.width();
  if (old_key.size() < 2 * w) {
    throw ArgumentError("ch_rekey: key shorter than twice the random width");
  }
  // w <= 32, so the product fits in 64 bits.
  const std::uint64_t product = pair.r1.value() * pair.r2.value();
  const BitString spliced =
      insert_at(old_key, BitString::from_value(product, 2 * w), insertion_position(old_key, pair));
  return spliced.slice(2 * w, old_key.size());
}

BitString gl_rekey(const BitString& old_key, const BitString& r) {
  if (r.empty() || old_key.empty()) {
    throw ArgumentError("gl_rekey: key and random number must be non-empty");
  }
  const std::string key = old_key.to_string();
  const std::string mask = r.to_string();
  std::string out(key.size(), '0');
  for (std::size_t i = 0; i < key.size(); ++i) {
    out[i] = (key[i] != mask[i % mask.size()]) ? '1' : '0';
  }
  return BitString::from_string(out);
}

}  // namespace keycore
}  // namespace hikeys
