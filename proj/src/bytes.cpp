#include "hearth/bytes.hpp"

namespace hearth {

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::InvalidHex, "odd length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::InvalidHex, std::string(hex.substr(2 * i, 2)));
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Bytes concat(std::initializer_list<ByteView> parts) {
  std::size_t total = 0;
  for (auto p : parts) total += p.size();
  Bytes out;
  out.reserve(total);
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

bool equal_bytes(ByteView a, ByteView b) noexcept {
  if (a.size() != b.size()) return false;
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc |= static_cast<std::uint8_t>(a[i] ^ b[i]);
  return acc == 0;
}

WireWriter& WireWriter::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

WireWriter& WireWriter::u16(std::uint16_t v) {
  out_.push_back(static_cast<std::uint8_t>(v >> 8));
  out_.push_back(static_cast<std::uint8_t>(v));
  return *this;
}

WireWriter& WireWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

WireWriter& WireWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

WireWriter& WireWriter::raw(ByteView v) {
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

WireWriter& WireWriter::var16(ByteView v) {
  if (v.size() > 0xffff) throw Error(Errc::Malformed, "field exceeds u16 length prefix");
  u16(static_cast<std::uint16_t>(v.size()));
  return raw(v);
}

WireWriter& WireWriter::var32(ByteView v) {
  if (v.size() > 0xffffffffu) throw Error(Errc::Malformed, "field exceeds u32 length prefix");
  u32(static_cast<std::uint32_t>(v.size()));
  return raw(v);
}

ByteView WireReader::raw(std::size_t n) {
  if (remaining() < n) throw Error(Errc::Truncated);
  ByteView out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t WireReader::u8() { return raw(1)[0]; }

std::uint16_t WireReader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t WireReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t WireReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

Bytes WireReader::var16() {
  auto n = u16();
  auto b = raw(n);
  return {b.begin(), b.end()};
}

std::string WireReader::str16() {
  auto b = var16();
  return {b.begin(), b.end()};
}

Bytes WireReader::var32() {
  auto n = u32();
  auto b = raw(n);
  return {b.begin(), b.end()};
}

void WireReader::expect_done() const {
  if (!done()) throw Error(Errc::Malformed, std::to_string(remaining()) + " trailing bytes");
}

}  // namespace hearth
