#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hearth/error.hpp"

namespace hearth {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

/// Concatenates byte ranges; handy for building hash and MAC inputs.
Bytes concat(std::initializer_list<ByteView> parts);

/// Compares without an early exit on the first differing byte.
bool equal_bytes(ByteView a, ByteView b) noexcept;

/// Fixed-width byte value. `Tag` keeps digests, keys and nonces apart at the
/// type level even though they share a representation.
template <std::size_t N, typename Tag>
class FixedBytes {
 public:
  static constexpr std::size_t size_bytes = N;

  constexpr FixedBytes() noexcept : data_{} {}
  explicit constexpr FixedBytes(const std::array<std::uint8_t, N>& raw) noexcept : data_(raw) {}

  static FixedBytes from_span(ByteView raw) {
    if (raw.size() != N) throw Error(Errc::Truncated, "expected " + std::to_string(N) + " bytes");
    FixedBytes out;
    std::copy(raw.begin(), raw.end(), out.data_.begin());
    return out;
  }
  static FixedBytes from_hex(std::string_view hex) { return from_span(hearth::from_hex(hex)); }

  ByteView view() const noexcept { return {data_.data(), N}; }
  std::span<std::uint8_t, N> mutable_view() noexcept { return data_; }
  const std::array<std::uint8_t, N>& raw() const noexcept { return data_; }
  std::uint8_t operator[](std::size_t i) const noexcept { return data_[i]; }

  friend bool operator==(const FixedBytes& a, const FixedBytes& b) noexcept {
    return equal_bytes(a.view(), b.view());
  }
  friend bool operator<(const FixedBytes& a, const FixedBytes& b) noexcept { return a.data_ < b.data_; }

 private:
  std::array<std::uint8_t, N> data_;
};

struct DigestTag {};
struct KeyTag {};
struct NonceTag {};

using Digest256 = FixedBytes<32, DigestTag>;
using Nonce128 = FixedBytes<16, NonceTag>;
/// Secret key material. Deliberately has no stream operator.
using Key256 = FixedBytes<32, KeyTag>;

inline std::string to_hex(const Digest256& d) { return to_hex(d.view()); }
inline std::string to_hex(const Nonce128& n) { return to_hex(n.view()); }

inline std::ostream& operator<<(std::ostream& os, const Digest256& d) { return os << to_hex(d.view()); }
inline std::ostream& operator<<(std::ostream& os, const Nonce128& n) { return os << to_hex(n.view()); }

/// Reinterprets a digest as key material (same width).
inline Key256 key_from_digest(const Digest256& d) noexcept { return Key256(d.raw()); }

/// Big-endian binary writer for wire messages and persisted state.
class WireWriter {
 public:
  WireWriter& u8(std::uint8_t v);
  WireWriter& u16(std::uint16_t v);
  WireWriter& u32(std::uint32_t v);
  WireWriter& u64(std::uint64_t v);
  WireWriter& raw(ByteView v);
  template <std::size_t N, typename Tag>
  WireWriter& fixed(const FixedBytes<N, Tag>& v) {
    return raw(v.view());
  }
  /// u16 length prefix followed by the bytes.
  WireWriter& var16(ByteView v);
  WireWriter& str16(std::string_view s) { return var16(as_bytes(s)); }
  /// u32 length prefix followed by the bytes.
  WireWriter& var32(ByteView v);

  const Bytes& bytes() const& noexcept { return out_; }
  Bytes bytes() && noexcept { return std::move(out_); }

 private:
  Bytes out_;
};

/// Reader counterpart of `WireWriter`; throws `Errc::Truncated` on short input.
class WireReader {
 public:
  explicit WireReader(ByteView in) noexcept : in_(in) {}
  /// The reader only borrows its input.
  explicit WireReader(Bytes&&) = delete;

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  ByteView raw(std::size_t n);
  template <typename T>
  T fixed() {
    return T::from_span(raw(T::size_bytes));
  }
  Bytes var16();
  std::string str16();
  Bytes var32();

  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  bool done() const noexcept { return remaining() == 0; }
  /// Throws `Errc::Malformed` if bytes are left over.
  void expect_done() const;

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace hearth
