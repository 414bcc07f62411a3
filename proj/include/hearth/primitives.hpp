#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "hearth/bytes.hpp"

namespace hearth {

/// SHA-256.
Digest256 hash(ByteView data);
inline Digest256 hash(std::string_view data) { return hash(as_bytes(data)); }

/// HMAC-SHA256 with a 256-bit key.
Digest256 mac(const Key256& key, ByteView data);

/// HMAC-SHA256 with an arbitrary-length key (RFC 2104 key handling).
Digest256 hmac_sha256(ByteView key, ByteView data);

/// HKDF-SHA256 (RFC 5869), extract then expand to `length` bytes.
Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length);

/// Derives a 256-bit key: HKDF with `secret` as input keying material,
/// `salt_material` as salt and `label` as info. Labels must be 1..32 ASCII
/// bytes, otherwise `Errc::InvalidLabel`.
Key256 kdf(const Key256& secret, std::string_view label, ByteView salt_material);

/// Exact per-thread counts of primitive invocations. `mac` counts every HMAC
/// computation, including the two performed inside each `kdf`.
struct CryptoCounters {
  std::uint64_t hash = 0;
  std::uint64_t mac = 0;
  std::uint64_t kdf = 0;

  friend bool operator==(const CryptoCounters&, const CryptoCounters&) = default;
};

CryptoCounters& crypto_counters() noexcept;

/// Captures the counter delta over its lifetime.
class CounterScope {
 public:
  CounterScope() noexcept : start_(crypto_counters()) {}
  CryptoCounters delta() const noexcept {
    const auto& now = crypto_counters();
    return {now.hash - start_.hash, now.mac - start_.mac, now.kdf - start_.kdf};
  }

 private:
  CryptoCounters start_;
};

using Seed256 = FixedBytes<32, struct SeedTag>;

/// Byte stream for nonces and key generation. The seeded mode is a ChaCha20
/// keystream keyed by the seed, so identical seeds replay identical streams.
class RandomSource {
 public:
  static RandomSource system();
  static RandomSource seeded(const Seed256& seed);
  static RandomSource seeded(std::uint64_t seed);

  RandomSource(RandomSource&&) noexcept;
  RandomSource& operator=(RandomSource&&) noexcept;
  ~RandomSource();

  void fill(std::span<std::uint8_t> out);
  Bytes bytes(std::size_t n);

  /// A fixed-size byte value, or an unsigned integer read big-endian.
  template <typename T>
  T draw() {
    if constexpr (std::is_unsigned_v<T>) {
      std::array<std::uint8_t, sizeof(T)> raw{};
      fill(raw);
      T v = 0;
      for (auto b : raw) v = static_cast<T>((v << 8) | b);
      return v;
    } else {
      T out;
      fill(out.mutable_view());
      return out;
    }
  }

  /// Seeded mode: rewinds to the start of the stream. System mode: no-op.
  void reset();
  bool deterministic() const noexcept { return seed_.has_value(); }

 private:
  struct Stream;
  explicit RandomSource(std::optional<Seed256> seed);

  std::optional<Seed256> seed_;
  std::unique_ptr<Stream> stream_;
};

Nonce128 random_nonce(RandomSource& src);
inline Key256 random_key(RandomSource& src) { return src.draw<Key256>(); }

/// One `input_hex -> digest_hex` pair per line (`→` accepted as the arrow).
/// Blank lines and lines starting with '#' are skipped.
struct HashVector {
  Bytes input;
  Digest256 digest;
};
std::vector<HashVector> parse_hash_vectors(std::string_view text);
std::string format_hash_vectors(const std::vector<HashVector>& vectors);

}  // namespace hearth
