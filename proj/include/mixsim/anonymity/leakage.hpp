#pragma once

// Route length vs observed message size, measured on simulated traffic.

#include <cstdint>
#include <utility>
#include <vector>

#include "mixsim/anonymity/information.hpp"
#include "mixsim/simnet/simulation.hpp"

namespace mixsim::anonymity {

struct LengthLeakage {
  double mi_naive = 0.0;
  double mi_padded = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> naive_samples;   // (outbound hops, first-link size)
  std::vector<std::pair<std::size_t, std::size_t>> padded_samples;
};

/// (outbound hop count, payload size of the sender's first onion transmission)
/// for every request the sender injected.
inline std::vector<std::pair<std::size_t, std::size_t>> first_link_observations(const simnet::Simulation& sim,
                                                                                NodeAddress sender) {
  std::map<std::uint32_t, std::size_t> hops;
  for (const auto& t : sim.tunnels()) hops[t.id] = t.hops.size();
  std::map<std::uint64_t, std::size_t> first;
  for (const auto& tx : sim.transmissions()) {
    if (tx.src != sender || tx.kind != simnet::MessageKind::Onion || first.contains(tx.request_id)) continue;
    first[tx.request_id] = tx.wire.size();
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [id, req] : sim.requests()) {
    if (req.sender != sender || !first.contains(id)) continue;
    out.emplace_back(hops.at(req.outbound_tunnel), first.at(id));
  }
  return out;
}

/// One simulation per onion mode. The sender owns one outbound tunnel per
/// entry of `lengths` and sends `requests_per_length` equal-size requests
/// through each.
inline std::vector<std::pair<std::size_t, std::size_t>> length_leakage_samples(
    crypto::OnionMode mode, const std::vector<std::size_t>& lengths, std::size_t requests_per_length,
    std::uint64_t seed) {
  simnet::SimConfig cfg;
  cfg.onion_mode = mode;
  cfg.seed = seed;
  cfg.udp_probability = 0.5;
  for (auto l : lengths) cfg.outbound_tunnel_length = std::max(cfg.outbound_tunnel_length, l);
  simnet::Simulation sim(cfg);
  const NodeAddress sender = sim.address(0);
  const NodeAddress recipient = sim.address(1);
  sim.build_tunnel(recipient, simnet::TunnelDirection::Outbound);
  sim.build_tunnel(recipient, simnet::TunnelDirection::Inbound);
  std::vector<std::uint32_t> tunnels;
  for (auto l : lengths) tunnels.push_back(sim.build_tunnel(sender, simnet::TunnelDirection::Outbound, l).id);
  const Bytes payload = to_bytes("GET /index.html HTTP/1.1\r\nHost: A\r\n\r\n");
  for (std::size_t i = 0; i < requests_per_length; ++i) {
    for (auto tid : tunnels) sim.send_request_via(sender, tid, sim.pseudonym_of(recipient), payload, 2);
  }
  sim.run(1.0);
  return first_link_observations(sim, sender);
}

inline LengthLeakage length_leakage_demo(const std::vector<std::size_t>& lengths = {1, 2, 3},
                                         std::size_t requests_per_length = 100, std::uint64_t seed = 1) {
  LengthLeakage out;
  out.naive_samples = length_leakage_samples(crypto::OnionMode::Naive, lengths, requests_per_length, seed);
  out.padded_samples = length_leakage_samples(crypto::OnionMode::Padded, lengths, requests_per_length, seed);
  out.mi_naive = plugin_mi(estimate_joint_from_samples(out.naive_samples));
  out.mi_padded = plugin_mi(estimate_joint_from_samples(out.padded_samples));
  return out;
}

}  // namespace mixsim::anonymity
