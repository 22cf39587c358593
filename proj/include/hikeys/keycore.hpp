#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hikeys/bitstring.hpp"

namespace hikeys {

using NodeId = std::uint32_t;

enum class HashId { Sha1, Sha256 };

/// "sha1" / "sha256" (case-insensitive); anything else is a ConfigError.
HashId parse_hash_id(std::string_view name);
std::string_view to_string(HashId id);
std::size_t digest_bits(HashId id);

namespace keycore {

/// A member's share of the intra-cluster key: the hash of its random number.
struct Contribution {
  NodeId node_id = 0;
  BitString hr;
};

/// Two random numbers of equal width carried by every rekey message.
struct RandomPair {
  BitString r1;
  BitString r2;

  /// Throws ArgumentError unless both halves are 8, 16 or 32 bits wide.
  RandomPair(BitString first, BitString second);
  std::size_t width() const { return r1.size(); }
  BitString concat() const { return r1 + r2; }
};

bool valid_random_width(std::size_t w);

BitString hash_contribution(const BitString& random_value, HashId hash);

/// Sorts by node id, concatenates the digests and hashes the result.
BitString derive_cluster_key(std::span<const Contribution> contribs, HashId hash);

/// Low-order w bits of hash(r1 || r2).
BitString mix(const RandomPair& pair, HashId hash);

/// key[0, pos) || s || key[pos, end)
BitString insert_at(const BitString& key, const BitString& s, std::size_t pos);

/// Insertion point used by join/leave and head rekeying: value(r1) mod (len + 1).
std::size_t insertion_position(const BitString& old_key, const RandomPair& pair);

/// Member join / member leave transform. Grows the key by w bits.
BitString join_leave_rekey(const BitString& old_key, const RandomPair& pair,
                           HashId hash);

/// Cluster-head overlay transform: splice the 2w-bit product of the pair at
/// the r1 position, then drop the first 2w bits. Length preserving.
BitString ch_rekey(const BitString& old_key, const RandomPair& pair);

/// Group-leader overlay transform: XOR every w-bit block of the key with r.
/// A short trailing block is XORed with the matching prefix of r.
BitString gl_rekey(const BitString& old_key, const BitString& r);

}  // namespace keycore
}  // namespace hikeys
