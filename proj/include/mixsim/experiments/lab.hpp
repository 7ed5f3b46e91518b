#pragma once

// The lab setup shared by the experiments: one sender issuing HTTP-like
// requests to one or two hidden services while background traffic runs, and
// a passive observer at the services' inbound gateways.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"
#include "mixsim/simnet/simulation.hpp"
#include "mixsim/trace/curate.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::experiments {

struct TargetSpec {
  std::size_t node_index = 1;
  int class_tag = 2;
  std::size_t requests = 200;
  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

struct LabScenario {
  simnet::SimConfig sim;
  std::size_t sender_index = 0;
  std::vector<TargetSpec> targets{TargetSpec{}};
  std::size_t sender_outbound_tunnels = 2;
  double warmup = 5.0;         // background only before the first request
  double request_rate = 0.5;   // per target, Poisson
  double tail = 5.0;           // background only after the last request
  std::size_t min_request_size = 120;
  std::size_t max_request_size = 900;
  std::uint64_t script_seed = 11;
  std::vector<std::size_t> vantages;  // node indices; empty = the targets' inbound gateways
  friend bool operator==(const LabScenario&, const LabScenario&) = default;
};

struct LabRun {
  trace::Trace raw;
  trace::Trace curated;
  std::vector<NodeAddress> vantages;
  std::vector<NodeAddress> targets;
  NodeAddress sender;
  double duration = 0.0;
  std::size_t requests_sent = 0;
  std::size_t deliveries = 0;
};

inline Bytes http_request(Rng& rng, std::size_t min_size, std::size_t max_size, const std::string& host) {
  std::string text = "GET /index.html HTTP/1.1\r\nHost: " + host + "\r\nUser-Agent: mixsim\r\nCookie: ";
  const auto size = static_cast<std::size_t>(rng.uniform_int(min_size, max_size));
  while (text.size() + 4 < size) text.push_back(static_cast<char>('a' + rng.index(26)));
  text += "\r\n\r\n";
  return to_bytes(text);
}

/// Builds the network, tunnels and request script, runs it, and captures at
/// the configured vantages (by default the inbound gateways of all targets).
inline LabRun run_lab(const LabScenario& sc) {
  if (sc.targets.empty()) fail(Errc::InvalidConfig, "lab scenario needs at least one target");
  simnet::Simulation sim(sc.sim);
  LabRun out;
  out.sender = sim.address(sc.sender_index);
  std::set<std::size_t> used{sc.sender_index};
  for (const auto& t : sc.targets) {
    if (t.node_index >= sc.sim.node_count || !used.insert(t.node_index).second) {
      fail(Errc::InvalidConfig, "target node index " + std::to_string(t.node_index) + " is invalid or repeated");
    }
  }
  for (std::size_t i = 0; i < sc.sender_outbound_tunnels; ++i) {
    sim.build_tunnel(out.sender, simnet::TunnelDirection::Outbound);
  }
  sim.build_tunnel(out.sender, simnet::TunnelDirection::Outbound, {}, true);
  std::set<NodeAddress> vantages;
  for (const auto& t : sc.targets) {
    const NodeAddress addr = sim.address(t.node_index);
    out.targets.push_back(addr);
    sim.build_tunnel(addr, simnet::TunnelDirection::Outbound);
    sim.build_tunnel(addr, simnet::TunnelDirection::Inbound);
    if (sc.vantages.empty()) vantages.insert(*sim.gateway_of(sim.pseudonym_of(addr)));
  }
  for (auto v : sc.vantages) {
    if (v >= sc.sim.node_count) fail(Errc::InvalidConfig, "vantage index " + std::to_string(v) + " out of range");
    vantages.insert(sim.address(v));
  }
  out.vantages.assign(vantages.begin(), vantages.end());

  Rng script(sc.script_seed);
  double last = sc.warmup;
  for (std::size_t ti = 0; ti < sc.targets.size(); ++ti) {
    const auto& t = sc.targets[ti];
    Rng r = script.fork(ti + 1);
    double at = sc.warmup;
    const std::string pseudonym = sim.pseudonym_of(out.targets[ti]);
    for (std::size_t i = 0; i < t.requests; ++i) {
      at += r.exponential(sc.request_rate);
      sim.schedule_request(at, out.sender, pseudonym,
                           http_request(r, sc.min_request_size, sc.max_request_size, pseudonym + ".b32"), t.class_tag);
      ++out.requests_sent;
    }
    last = std::max(last, at);
  }
  out.duration = last + sc.tail;
  sim.run(out.duration);
  out.deliveries = sim.deliveries().size();
  out.raw = sim.capture(vantages);
  out.curated = trace::curate(out.raw);
  return out;
}

/// The default lab: 16 nodes, about 200 requests to one target, direct
/// background chatter, a run shorter than the tunnel lifetime.
inline LabScenario default_lab(std::uint64_t seed = 1) {
  LabScenario sc;
  sc.sim.node_count = 16;
  sc.sim.seed = seed;
  sc.sim.background_flows = 60;
  sc.sim.background_rate = 0.8;
  sc.script_seed = seed * 7919 + 11;
  sc.targets = {TargetSpec{1, 2, 200}};
  return sc;
}

/// Two targets (classes 2 and 3); observed at both gateways.
inline LabScenario default_multiclass_lab(std::uint64_t seed = 1) {
  LabScenario sc = default_lab(seed);
  sc.targets = {TargetSpec{1, 2, 150}, TargetSpec{2, 3, 150}};
  sc.request_rate = 0.4;
  return sc;
}

/// The "public network" stand-in: same shape, shifted latency, background
/// intensity, size jitter, port draws and request timing.
inline LabScenario shifted_lab(std::uint64_t seed = 2) {
  LabScenario sc = default_lab(seed);
  sc.sim.link_latency = {40.0, 15.0};
  sc.sim.background_flows = 80;
  sc.sim.background_rate = 0.8;
  sc.sim.background_tunnel_flows = 8;
  sc.sim.link_padding_max = 96;
  sc.sim.udp_probability = 0.3;
  sc.sim.first_address = "10.9.0.2";
  sc.warmup = 60.0;
  sc.request_rate = 0.3;
  sc.min_request_size = 300;
  sc.max_request_size = 2400;
  return sc;
}

}  // namespace mixsim::experiments
