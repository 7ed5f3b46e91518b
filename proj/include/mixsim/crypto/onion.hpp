#pragma once

// Layered onion messages.
//
// Naive mode: layer_i = seal(pk_i, instruction_i || layer_{i+1}), so every
// peel removes exactly kNaiveLayerOverhead bytes and the blob length reveals
// the remaining hop count.
//
// Padded mode: layer_i = seal(pk_i, u16 len) || seal(pk_i, instruction_i ||
// layer_{i+1}) followed by filler up to a fixed blob size. A hop opens the
// length header, then the body, and re-pads the inner onion, so every blob on
// the wire has length padded_blob_size(cell_size).

#include <cstdint>
#include <optional>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/crypto/cipher.hpp"

namespace mixsim::crypto {

enum class OnionMode : std::uint8_t { Naive, Padded };

inline constexpr std::size_t kDefaultCellSize = 1024;
inline constexpr std::size_t kMaxRouteLength = 8;
inline constexpr std::size_t kInstructionSize = 5;  // kind byte + IPv4 next hop
inline constexpr std::size_t kLengthHeaderSize = 2 + kSealOverhead;
inline constexpr std::size_t kNaiveLayerOverhead = kSealOverhead + kInstructionSize;
inline constexpr std::size_t kPaddedLayerOverhead = kLengthHeaderSize + kNaiveLayerOverhead;

inline constexpr std::uint8_t kInstrForward = 0x01;
inline constexpr std::uint8_t kInstrDeliver = 0x02;

constexpr std::size_t padded_blob_size(std::size_t cell_size) { return cell_size + kPaddedLayerOverhead; }

/// Largest core that fits a padded onion over `hops` hops.
constexpr std::size_t padded_core_capacity(std::size_t hops, std::size_t cell_size) {
  const std::size_t framing = hops * kPaddedLayerOverhead;
  const std::size_t total = padded_blob_size(cell_size);
  return framing > total ? 0 : total - framing;
}

struct RouteHop {
  PublicKey routing_key;
  NodeAddress address;
};

struct OnionMessage {
  OnionMode mode = OnionMode::Naive;
  Bytes blob;
  std::size_t cell_size = kDefaultCellSize;
};

/// Result of peeling one layer. `next_hop` is empty for DELIVER, in which
/// case `inner` is the (still end-to-end sealed) core.
struct RoutingInstruction {
  std::optional<NodeAddress> next_hop;
  Bytes inner;

  bool is_deliver() const { return !next_hop.has_value(); }
};

namespace detail {

inline Bytes encode_instruction(std::optional<NodeAddress> next) {
  Bytes out;
  if (next) {
    out.push_back(kInstrForward);
    const auto o = next->octets();
    out.insert(out.end(), o.begin(), o.end());
  } else {
    out.push_back(kInstrDeliver);
    out.insert(out.end(), 4, 0);
  }
  return out;
}

inline RoutingInstruction decode_instruction(Bytes plaintext) {
  if (plaintext.size() < kInstructionSize) fail(Errc::AuthenticationFailure, "layer too short");
  RoutingInstruction out;
  if (plaintext[0] == kInstrForward) {
    out.next_hop = NodeAddress(get_u32(plaintext, 1));
  } else if (plaintext[0] != kInstrDeliver) {
    fail(Errc::AuthenticationFailure, "unknown instruction kind");
  }
  plaintext.erase(plaintext.begin(), plaintext.begin() + kInstructionSize);
  out.inner = std::move(plaintext);
  return out;
}

inline void pad_to(Bytes& blob, std::size_t target, ByteView filler_key) {
  const std::size_t used = blob.size();
  blob.resize(target, 0);
  static constexpr std::array<std::uint8_t, 16> zero_nonce{};
  keystream_xor(filler_key, zero_nonce, std::span<std::uint8_t>(blob.data() + used, target - used));
}

inline std::uint64_t layer_seed(std::uint64_t seed, std::size_t layer, std::uint64_t salt) {
  return seed * 0x9E3779B97F4A7C15ULL + layer * 0xC2B2AE3D27D4EB4FULL + salt;
}

}  // namespace detail

/// Build an onion over `route`. The first hop of the route peels the outermost
/// layer; the last hop receives DELIVER(core).
inline OnionMessage wrap(const std::vector<RouteHop>& route, ByteView core, OnionMode mode, std::uint64_t seed,
                         std::size_t cell_size = kDefaultCellSize) {
  if (route.empty()) fail(Errc::EmptyRoute, "route has no hops");
  if (route.size() > kMaxRouteLength) fail(Errc::RouteTooLong, "route longer than 8 hops");
  if (mode == OnionMode::Padded && core.size() > padded_core_capacity(route.size(), cell_size)) {
    fail(Errc::CoreTooLarge, "core of " + std::to_string(core.size()) + " bytes exceeds padded capacity " +
                                 std::to_string(padded_core_capacity(route.size(), cell_size)));
  }

  Bytes payload(core.begin(), core.end());
  for (std::size_t i = route.size(); i-- > 0;) {
    const std::optional<NodeAddress> next =
        i + 1 < route.size() ? std::optional<NodeAddress>(route[i + 1].address) : std::nullopt;
    Bytes plaintext = detail::encode_instruction(next);
    append(plaintext, payload);
    Bytes body = seal(route[i].routing_key, KeyPurpose::Routing, plaintext, detail::layer_seed(seed, i, 1));
    if (mode == OnionMode::Padded) {
      Bytes len;
      put_u16(len, static_cast<std::uint16_t>(body.size()));
      payload = seal(route[i].routing_key, KeyPurpose::Routing, len, detail::layer_seed(seed, i, 2));
      append(payload, body);
    } else {
      payload = std::move(body);
    }
  }

  OnionMessage msg{mode, std::move(payload), cell_size};
  if (mode == OnionMode::Padded) {
    Bytes s;
    put_u64(s, seed);
    const auto key = sha256({as_bytes("mixsim.fill"), s});
    detail::pad_to(msg.blob, padded_blob_size(cell_size), key);
  }
  return msg;
}

/// Remove one layer with the current hop's routing key.
inline RoutingInstruction peel(const PrivateKey& routing_key, const OnionMessage& msg) {
  if (msg.mode == OnionMode::Naive) {
    return detail::decode_instruction(open(routing_key, KeyPurpose::Routing, msg.blob));
  }

  const ByteView blob(msg.blob);
  if (blob.size() != padded_blob_size(msg.cell_size)) fail(Errc::AuthenticationFailure, "padded blob has wrong size");
  const Bytes len_bytes = open(routing_key, KeyPurpose::Routing, blob.first(kLengthHeaderSize));
  if (len_bytes.size() != 2) fail(Errc::AuthenticationFailure, "bad length header");
  const std::size_t body_len = get_u16(len_bytes, 0);
  if (kLengthHeaderSize + body_len > blob.size()) fail(Errc::AuthenticationFailure, "length header out of range");
  RoutingInstruction out =
      detail::decode_instruction(open(routing_key, KeyPurpose::Routing, blob.subspan(kLengthHeaderSize, body_len)));
  if (!out.is_deliver()) {
    const auto key = sha256({as_bytes("mixsim.refill"), routing_key.bytes, blob.first(kHeaderSize)});
    detail::pad_to(out.inner, padded_blob_size(msg.cell_size), key);
  }
  return out;
}

}  // namespace mixsim::crypto
