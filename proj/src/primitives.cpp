#include "hearth/primitives.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cstring>
#include <sstream>

namespace hearth {

namespace {

thread_local CryptoCounters tls_counters;

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("EVP sha256 init failed");
  }
  Sha256& update(ByteView data) {
    if (!data.empty() && EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1)
      throw std::runtime_error("EVP sha256 update failed");
    return *this;
  }
  Digest256 finish() {
    std::array<std::uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != 32)
      throw std::runtime_error("EVP sha256 final failed");
    return Digest256(out);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

constexpr std::size_t kBlock = 64;

// HMAC per RFC 2104 over SHA-256; not metered.
Digest256 hmac_raw(ByteView key, ByteView data) {
  std::array<std::uint8_t, kBlock> k{};
  if (key.size() > kBlock) {
    auto kd = Sha256().update(key).finish();
    std::memcpy(k.data(), kd.raw().data(), 32);
  } else if (!key.empty()) {
    std::memcpy(k.data(), key.data(), key.size());
  }
  std::array<std::uint8_t, kBlock> ipad{}, opad{};
  for (std::size_t i = 0; i < kBlock; ++i) {
    ipad[i] = static_cast<std::uint8_t>(k[i] ^ 0x36);
    opad[i] = static_cast<std::uint8_t>(k[i] ^ 0x5c);
  }
  auto inner = Sha256().update(ipad).update(data).finish();
  return Sha256().update(opad).update(inner.view()).finish();
}

}  // namespace

CryptoCounters& crypto_counters() noexcept { return tls_counters; }

Digest256 hash(ByteView data) {
  ++tls_counters.hash;
  return Sha256().update(data).finish();
}

Digest256 hmac_sha256(ByteView key, ByteView data) {
  ++tls_counters.mac;
  return hmac_raw(key, data);
}

Digest256 mac(const Key256& key, ByteView data) { return hmac_sha256(key.view(), data); }

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t length) {
  if (length > 255 * 32) throw Error(Errc::InvalidParams, "hkdf output too long");
  // RFC 5869: an absent salt is HashLen zero bytes, which HMAC pads identically.
  const Digest256 prk = hmac_sha256(salt, ikm);
  Bytes okm;
  okm.reserve(length);
  Bytes block;
  for (std::uint8_t counter = 1; okm.size() < length; ++counter) {
    Bytes input = block;
    input.insert(input.end(), info.begin(), info.end());
    input.push_back(counter);
    auto t = hmac_sha256(prk.view(), input);
    block.assign(t.raw().begin(), t.raw().end());
    const std::size_t take = std::min<std::size_t>(32, length - okm.size());
    okm.insert(okm.end(), block.begin(), block.begin() + take);
  }
  return okm;
}

Key256 kdf(const Key256& secret, std::string_view label, ByteView salt_material) {
  if (label.empty() || label.size() > 32) throw Error(Errc::InvalidLabel, std::string(label));
  for (char c : label) {
    if (static_cast<unsigned char>(c) > 0x7f) throw Error(Errc::InvalidLabel, "non-ASCII label");
  }
  ++tls_counters.kdf;
  return Key256::from_span(hkdf_sha256(secret.view(), salt_material, as_bytes(label), 32));
}

struct RandomSource::Stream {
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const noexcept { EVP_CIPHER_CTX_free(c); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> ctx;

  explicit Stream(const Seed256& seed) : ctx(EVP_CIPHER_CTX_new()) {
    // OpenSSL's ChaCha20 IV is a 4-byte block counter followed by a 12-byte nonce.
    std::array<std::uint8_t, 16> iv{};
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_chacha20(), nullptr, seed.raw().data(), iv.data()) != 1)
      throw std::runtime_error("EVP chacha20 init failed");
  }

  void keystream(std::span<std::uint8_t> out) {
    std::vector<std::uint8_t> zeros(out.size(), 0);
    int len = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, zeros.data(), static_cast<int>(zeros.size())) != 1 ||
        static_cast<std::size_t>(len) != out.size())
      throw std::runtime_error("EVP chacha20 update failed");
  }
};

RandomSource::RandomSource(std::optional<Seed256> seed) : seed_(seed) {
  if (seed_) stream_ = std::make_unique<Stream>(*seed_);
}

RandomSource::RandomSource(RandomSource&&) noexcept = default;
RandomSource& RandomSource::operator=(RandomSource&&) noexcept = default;
RandomSource::~RandomSource() = default;

RandomSource RandomSource::system() { return RandomSource(std::nullopt); }

RandomSource RandomSource::seeded(const Seed256& seed) { return RandomSource(seed); }

RandomSource RandomSource::seeded(std::uint64_t seed) {
  std::array<std::uint8_t, 32> raw{};
  for (int i = 0; i < 8; ++i) raw[24 + i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
  return RandomSource(Seed256(raw));
}

void RandomSource::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (stream_) {
    stream_->keystream(out);
    return;
  }
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) throw std::runtime_error("RAND_bytes failed");
}

Bytes RandomSource::bytes(std::size_t n) {
  Bytes out(n);
  fill(out);
  return out;
}

void RandomSource::reset() {
  if (seed_) stream_ = std::make_unique<Stream>(*seed_);
}

Nonce128 random_nonce(RandomSource& src) { return src.draw<Nonce128>(); }

std::vector<HashVector> parse_hash_vectors(std::string_view text) {
  std::vector<HashVector> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::string_view arrow = "→";
    auto pos = line.find(arrow);
    if (pos == std::string::npos) {
      arrow = "->";
      pos = line.find(arrow);
    }
    if (pos == std::string::npos) throw Error(Errc::Malformed, "missing arrow: " + line);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    auto lhs = trim(line.substr(0, pos));
    auto rhs = trim(line.substr(pos + arrow.size()));
    out.push_back({from_hex(lhs), Digest256::from_hex(rhs)});
  }
  return out;
}

std::string format_hash_vectors(const std::vector<HashVector>& vectors) {
  std::string out;
  for (const auto& v : vectors) out += to_hex(v.input) + " → " + to_hex(v.digest) + "\n";
  return out;
}

}  // namespace hearth
