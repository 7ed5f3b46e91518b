#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "mixsim/bytes.hpp"
#include "mixsim/crypto/onion.hpp"
#include "mixsim/error.hpp"

namespace mixsim::simnet {

struct LinkLatency {
  double mean_ms = 5.0;
  double jitter_ms = 1.0;
  friend bool operator==(const LinkLatency&, const LinkLatency&) = default;
};

/// Diurnal churn. Non-core nodes are online with probability
/// base * (1 + amplitude * sin(2 pi t / period)) at each tick.
struct ChurnSpec {
  double base_online_fraction = 0.8;
  double diurnal_amplitude = 0.0;
  double period = 86400.0;
  std::set<NodeAddress> stable_core;
  double tick_interval = 60.0;
  friend bool operator==(const ChurnSpec&, const ChurnSpec&) = default;
};

struct SimConfig {
  std::size_t node_count = 16;
  std::size_t outbound_tunnel_length = 3;
  std::size_t inbound_tunnel_length = 3;
  double tunnel_lifetime = 600.0;
  double lease_lifetime = 600.0;
  LinkLatency link_latency;
  double udp_probability = 0.5;
  std::size_t cell_size = crypto::kDefaultCellSize;
  crypto::OnionMode onion_mode = crypto::OnionMode::Padded;

  // Direct node-to-node chatter (class 1).
  std::size_t background_flows = 0;
  double background_rate = 0.5;  // messages per second per flow
  std::size_t background_min_size = 47;
  std::size_t background_max_size = 1112;

  // Tunnelled requests between uninvolved node pairs (class 1).
  std::size_t background_tunnel_flows = 0;
  double background_tunnel_rate = 0.1;

  double ack_probability = 0.5;     // pure TCP ACK per received TCP data segment
  std::size_t link_padding_max = 0;  // random extra bytes per transmission
  std::uint8_t ip_ttl = 64;
  std::string first_address = "10.8.0.2";
  bool strict_netdb = true;

  std::optional<ChurnSpec> churn;
  std::uint64_t seed = 1;
  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

inline void validate(const SimConfig& c) {
  const auto bad = [](const std::string& why) { fail(Errc::InvalidConfig, why); };
  const std::size_t longest = std::max(c.outbound_tunnel_length, c.inbound_tunnel_length);
  if (c.outbound_tunnel_length == 0 || c.inbound_tunnel_length == 0) bad("tunnel lengths must be >= 1");
  if (c.node_count < longest + 2) {
    bad("node_count " + std::to_string(c.node_count) + " < tunnel length " + std::to_string(longest) + " + 2");
  }
  // The sender wraps over its outbound hops plus the inbound gateway.
  if (c.outbound_tunnel_length + 1 > crypto::kMaxRouteLength) bad("outbound tunnel too long for onion routes");
  if (!(c.udp_probability >= 0.0 && c.udp_probability <= 1.0)) bad("udp_probability must be in [0,1]");
  if (!(c.ack_probability >= 0.0 && c.ack_probability <= 1.0)) bad("ack_probability must be in [0,1]");
  if (!(c.tunnel_lifetime > 0.0) || !(c.lease_lifetime > 0.0)) bad("lifetimes must be > 0");
  if (!(c.link_latency.mean_ms > 0.0) || c.link_latency.jitter_ms < 0.0) bad("link latency must be > 0");
  if (c.background_flows > 0 && !(c.background_rate > 0.0)) bad("background_rate must be > 0");
  if (c.background_tunnel_flows > 0 && !(c.background_tunnel_rate > 0.0)) bad("background_tunnel_rate must be > 0");
  if (c.background_min_size > c.background_max_size) bad("background size range is empty");
  if (c.cell_size < 64 || c.cell_size > 4096) bad("cell_size must be in [64, 4096]");
  if (c.onion_mode == crypto::OnionMode::Padded &&
      crypto::padded_core_capacity(c.outbound_tunnel_length + 1, c.cell_size) < 32) {
    bad("cell_size too small for the configured outbound tunnel length");
  }
  const std::uint32_t first = NodeAddress::parse(c.first_address).value();
  if (first + c.node_count < first) bad("address range overflows");
  if (c.churn) {
    const auto& ch = *c.churn;
    const double lo = ch.base_online_fraction * (1.0 - ch.diurnal_amplitude);
    const double hi = ch.base_online_fraction * (1.0 + ch.diurnal_amplitude);
    if (ch.diurnal_amplitude < 0.0 || lo < 0.0 || hi > 1.0) bad("churn online probability leaves [0,1]");
    if (!(ch.period > 0.0) || !(ch.tick_interval > 0.0)) bad("churn durations must be > 0");
  }
}

}  // namespace mixsim::simnet
