#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hikeys {

/// Ordered sequence of bits, most significant (leftmost) first. Lengths are
/// exact: nothing is padded on construction.
class BitString {
 public:
  BitString() = default;

  /// Parses a string of '0'/'1' characters. Spaces are ignored.
  static BitString from_string(std::string_view bits);
  /// Every bit of every octet, high bit first.
  static BitString from_octets(std::span<const std::uint8_t> octets);
  static BitString from_text(std::string_view text);
  /// `value` rendered in exactly `width` bits (width <= 64).
  static BitString from_value(std::uint64_t value, std::size_t width);
  static BitString zeros(std::size_t width);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  /// Unsigned integer value; requires size() <= 64.
  std::uint64_t value() const;
  /// Packs bits high-first into octets; a trailing partial octet is
  /// zero-filled on the right.
  std::vector<std::uint8_t> to_octets() const;
  std::string to_string() const;

  BitString slice(std::size_t pos, std::size_t len) const;
  BitString first(std::size_t len) const { return slice(0, len); }
  BitString last(std::size_t len) const { return slice(size() - len, len); }

  BitString& append(const BitString& other);
  friend BitString operator+(BitString lhs, const BitString& rhs) {
    return lhs.append(rhs);
  }

  bool operator==(const BitString&) const = default;
  auto operator<=>(const BitString&) const = default;

 private:
  std::vector<std::uint8_t> bits_;  // one entry per bit, 0 or 1
};

}  // namespace hikeys
