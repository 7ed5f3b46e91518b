#pragma once

// Length-predictable authenticated sealing used by the simulator.
//
// Ciphertext layout: header(16) || body(|plaintext|) || tag(16).
// The header is an ephemeral value derived from the caller's seed, the body is
// the plaintext XOR a ChaCha20 keystream, and the tag is a truncated
// HMAC-SHA256 over header||body. This is a deterministic stand-in for a
// public-key sealed box and gives no real confidentiality: anybody who holds
// the public key can derive the stream key.

#include <array>
#include <cstdint>
#include <memory>
#include <string_view>

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::crypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kSealOverhead = kHeaderSize + kTagSize;

using Digest = std::array<std::uint8_t, 32>;

enum class KeyPurpose : std::uint8_t { Routing = 1, EndToEnd = 2 };

constexpr std::string_view to_string(KeyPurpose p) {
  return p == KeyPurpose::Routing ? "Routing" : "EndToEnd";
}

struct PublicKey {
  KeyPurpose purpose = KeyPurpose::Routing;
  Bytes bytes;
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct PrivateKey {
  KeyPurpose purpose = KeyPurpose::Routing;
  Bytes bytes;
  friend bool operator==(const PrivateKey&, const PrivateKey&) = default;
};

struct KeyPair {
  PublicKey public_key;
  PrivateKey private_key;
  KeyPurpose purpose() const { return public_key.purpose; }
};

namespace detail {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

}  // namespace detail

/// SHA-256 over the concatenation of `parts`.
inline Digest sha256(std::initializer_list<ByteView> parts) {
  std::unique_ptr<EVP_MD_CTX, detail::MdCtxDeleter> ctx(EVP_MD_CTX_new());
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  for (auto part : parts) EVP_DigestUpdate(ctx.get(), part.data(), part.size());
  Digest out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), out.data(), &len);
  return out;
}

inline Digest hmac_sha256(ByteView key, ByteView data) {
  Digest out{};
  std::size_t len = 0;
  EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr, key.data(), key.size(), data.data(), data.size(),
            out.data(), out.size(), &len);
  return out;
}

/// XOR `data` in place with the ChaCha20 keystream for (key, nonce).
/// Applying it twice restores the input.
inline void keystream_xor(ByteView key, ByteView nonce, std::span<std::uint8_t> data) {
  if (data.empty()) return;
  std::unique_ptr<EVP_CIPHER_CTX, detail::CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  EVP_EncryptInit_ex(ctx.get(), EVP_chacha20(), nullptr, key.data(), nonce.data());
  int out_len = 0;
  EVP_EncryptUpdate(ctx.get(), data.data(), &out_len, data.data(), static_cast<int>(data.size()));
}

inline PublicKey derive_public(const PrivateKey& sk) {
  const std::uint8_t tag = static_cast<std::uint8_t>(sk.purpose);
  const auto d = sha256({as_bytes("mixsim.public"), ByteView(&tag, 1), sk.bytes});
  return PublicKey{sk.purpose, Bytes(d.begin(), d.end())};
}

inline KeyPair generate_keypair(KeyPurpose purpose, Rng& rng) {
  PrivateKey sk{purpose, Bytes(kKeySize)};
  for (auto& b : sk.bytes) b = static_cast<std::uint8_t>(rng.next_u64());
  return KeyPair{derive_public(sk), std::move(sk)};
}

namespace detail {

inline Digest stream_key(const PublicKey& pk) {
  const std::uint8_t tag = static_cast<std::uint8_t>(pk.purpose);
  return sha256({as_bytes("mixsim.stream"), ByteView(&tag, 1), pk.bytes});
}

inline Digest mac_key(const PublicKey& pk) { return sha256({as_bytes("mixsim.mac"), pk.bytes}); }

inline void check_purpose(KeyPurpose actual, KeyPurpose expected) {
  if (actual != expected) {
    fail(Errc::KeyPurposeMismatch, std::string("expected a ") + std::string(to_string(expected)) +
                                       " key, got " + std::string(to_string(actual)));
  }
}

}  // namespace detail

/// Seal `plaintext` to `pk`. Total: |result| = |plaintext| + kSealOverhead.
inline Bytes seal(const PublicKey& pk, KeyPurpose expected, ByteView plaintext, std::uint64_t seed) {
  detail::check_purpose(pk.purpose, expected);
  Bytes seed_bytes;
  put_u64(seed_bytes, seed);
  const auto n = sha256({as_bytes("mixsim.nonce"), seed_bytes, pk.bytes, plaintext});

  Bytes out;
  out.reserve(plaintext.size() + kSealOverhead);
  out.insert(out.end(), n.begin(), n.begin() + kHeaderSize);
  out.insert(out.end(), plaintext.begin(), plaintext.end());
  const auto key = detail::stream_key(pk);
  keystream_xor(key, ByteView(out.data(), kHeaderSize),
                std::span<std::uint8_t>(out.data() + kHeaderSize, plaintext.size()));
  const auto tag = hmac_sha256(detail::mac_key(pk), out);
  out.insert(out.end(), tag.begin(), tag.begin() + kTagSize);
  return out;
}

/// Inverse of seal(). Throws AuthenticationFailure on a wrong key or any
/// modification of the ciphertext.
inline Bytes open(const PrivateKey& sk, KeyPurpose expected, ByteView ciphertext) {
  detail::check_purpose(sk.purpose, expected);
  if (ciphertext.size() < kSealOverhead) fail(Errc::AuthenticationFailure, "ciphertext shorter than overhead");
  const PublicKey pk = derive_public(sk);
  const std::size_t body = ciphertext.size() - kSealOverhead;
  const auto tag = hmac_sha256(detail::mac_key(pk), ciphertext.first(kHeaderSize + body));
  if (CRYPTO_memcmp(tag.data(), ciphertext.data() + kHeaderSize + body, kTagSize) != 0) {
    fail(Errc::AuthenticationFailure, "tag mismatch");
  }
  Bytes out(ciphertext.begin() + kHeaderSize, ciphertext.begin() + kHeaderSize + body);
  const auto key = detail::stream_key(pk);
  keystream_xor(key, ciphertext.first(kHeaderSize), out);
  return out;
}

}  // namespace mixsim::crypto
