#include "hikeys/bitstring.hpp"

#include "hikeys/errors.hpp"

namespace hikeys {

BitString BitString::from_string(std::string_view bits) {
  BitString out;
  out.bits_.reserve(bits.size());
  for (char c : bits) {
    if (c == '0' || c == '1') {
      out.bits_.push_back(static_cast<std::uint8_t>(c - '0'));
    } else if (c != ' ') {
      throw ArgumentError(std::string("invalid bit character '") + c + "'");
    }
  }
  return out;
}

BitString BitString::from_octets(std::span<const std::uint8_t> octets) {
  BitString out;
  out.bits_.reserve(octets.size() * 8);
  for (std::uint8_t byte : octets) {
    for (int b = 7; b >= 0; --b) {
      out.bits_.push_back(static_cast<std::uint8_t>((byte >> b) & 1u));
    }
  }
  return out;
}

BitString BitString::from_text(std::string_view text) {
  std::vector<std::uint8_t> octets(text.begin(), text.end());
  return from_octets(octets);
}

BitString BitString::from_value(std::uint64_t value, std::size_t width) {
  if (width > 64) {
    throw ArgumentError("from_value: width above 64 bits");
  }
  if (width < 64 && (value >> width) != 0) {
    throw ArgumentError("from_value: value does not fit in width");
  }
  BitString out;
  out.bits_.resize(width);
  for (std::size_t i = 0; i < width; ++i) {
    out.bits_[width - 1 - i] = static_cast<std::uint8_t>((value >> i) & 1u);
  }
  return out;
}

BitString BitString::zeros(std::size_t width) {
  BitString out;
  out.bits_.assign(width, 0);
  return out;
}

std::uint64_t BitString::value() const {
  if (size() > 64) {
    throw ArgumentError("value: bit string longer than 64 bits");
  }
  std::uint64_t v = 0;
  for (std::uint8_t b : bits_) {
    v = (v << 1) | b;
  }
  return v;
}

std::vector<std::uint8_t> BitString::to_octets() const {
  std::vector<std::uint8_t> out((size() + 7) / 8, 0);
  for (std::size_t i = 0; i < size(); ++i) {
    if (bits_[i]) {
      out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
  }
  return out;
}

std::string BitString::to_string() const {
  std::string out;
  out.reserve(size());
  for (std::uint8_t b : bits_) {
    out.push_back(static_cast<char>('0' + b));
  }
  return out;
}

BitString BitString::slice(std::size_t pos, std::size_t len) const {
  if (pos > size() || len > size() - pos) {
    throw ArgumentError("slice out of range");
  }
  BitString out;
  out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(pos),
                   bits_.begin() + static_cast<std::ptrdiff_t>(pos + len));
  return out;
}

BitString& BitString::append(const BitString& other) {
  if (&other == this) {
    const auto copy = other.bits_;
    bits_.insert(bits_.end(), copy.begin(), copy.end());
    return *this;
  }
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
  return *this;
}

}  // namespace hikeys
