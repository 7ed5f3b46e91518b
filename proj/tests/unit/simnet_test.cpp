#include <gtest/gtest.h>

#include <numeric>

#include "mixsim/simnet/churn.hpp"
#include "mixsim/simnet/fragment.hpp"
#include "mixsim/simnet/simulation.hpp"
#include "mixsim/trace/jsonl.hpp"

namespace mixsim::simnet {
namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::NotFound;
}

// Sender is node 0, recipient node 1; both sides get their tunnels.
struct Pair {
  Simulation sim;
  NodeAddress sender;
  NodeAddress recipient;
  TunnelSpec inbound;

  explicit Pair(SimConfig cfg)
      : sim(std::move(cfg)), sender(sim.address(0)), recipient(sim.address(1)) {
    sim.build_tunnel(recipient, TunnelDirection::Outbound);
    inbound = sim.build_tunnel(recipient, TunnelDirection::Inbound);
    sim.build_tunnel(sender, TunnelDirection::Outbound);
  }
  const std::string& pseudonym() const { return sim.pseudonym_of(recipient); }
};

TEST(Fragment, SplitsIntoCeilCells) {
  const Bytes payload(3000, 0xAB);
  const auto cells = fragment(payload, 1000);
  ASSERT_EQ(cells.size(), 3u);
  for (const auto& c : cells) EXPECT_EQ(c.size(), kCellHeaderSize + 1000);
  EXPECT_EQ(reassemble(cells), payload);
}

TEST(Fragment, EmptyPayloadIsOneKeepAliveCell) {
  const auto cells = fragment({}, 1000);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(get_u16(cells[0], 0), 0);
  EXPECT_TRUE(reassemble(cells).empty());
}

TEST(Fragment, LastCellCarriesTrueLength) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Bytes p(rng.index(5000));
    for (auto& b : p) b = static_cast<std::uint8_t>(rng.next_u64());
    const std::size_t cap = 1 + rng.index(1200);
    const auto cells = fragment(p, cap);
    EXPECT_EQ(cells.size(), std::max<std::size_t>(1, (p.size() + cap - 1) / cap));
    EXPECT_EQ(reassemble(cells), p);
  }
}

TEST(Fragment, ZeroCapacityRejected) {
  EXPECT_EQ(code_of([] { fragment(as_bytes("x"), 0); }), Errc::InvalidConfig);
}

TEST(Churn, MeanOnlineCountMatchesBase) {
  ChurnSpec spec;
  spec.base_online_fraction = 0.8;
  std::vector<NodeAddress> nodes;
  for (std::uint32_t i = 0; i < 100; ++i) nodes.emplace_back(i + 1);
  Rng rng(1);
  double total = 0.0;
  for (int t = 0; t < 1000; ++t) total += static_cast<double>(churn_tick(spec, t * 60.0, nodes, rng).size());
  EXPECT_NEAR(total / 1000.0, 80.0, 5.0);
}

TEST(Churn, StableCoreAlwaysOnline) {
  ChurnSpec spec;
  spec.base_online_fraction = 0.3;
  std::vector<NodeAddress> nodes;
  for (std::uint32_t i = 0; i < 20; ++i) nodes.emplace_back(i + 1);
  spec.stable_core = {nodes[0], nodes[5], nodes[9], nodes[13]};
  Rng rng(2);
  for (int t = 0; t < 500; ++t) {
    const auto online = churn_tick(spec, t * 60.0, nodes, rng);
    for (auto c : spec.stable_core) ASSERT_TRUE(online.contains(c));
  }
}

TEST(Churn, DiurnalPeriodShowsInAutocorrelation) {
  ChurnSpec spec;
  spec.base_online_fraction = 0.5;
  spec.diurnal_amplitude = 0.8;
  spec.period = 24.0;
  std::vector<NodeAddress> nodes;
  for (std::uint32_t i = 0; i < 200; ++i) nodes.emplace_back(i + 1);
  Rng rng(3);
  std::vector<double> series;
  for (int t = 0; t < 24 * 20; ++t) series.push_back(static_cast<double>(churn_tick(spec, t, nodes, rng).size()));
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
  const auto acf = [&](std::size_t lag) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      den += (series[i] - mean) * (series[i] - mean);
      if (i + lag < series.size()) num += (series[i] - mean) * (series[i + lag] - mean);
    }
    return num / den;
  };
  std::size_t best = 0;
  for (std::size_t lag = 12; lag <= 36; ++lag) {
    if (best == 0 || acf(lag) > acf(best)) best = lag;
  }
  EXPECT_EQ(best, 24u);
  EXPECT_LT(acf(12), 0.0);
}

TEST(Simulation, BuildNetworkRegistersNodes) {
  SimConfig cfg;
  Simulation sim(cfg);
  EXPECT_EQ(sim.netdb().node_count(), 16u);
  EXPECT_EQ(sim.netdb().lease_count(), 0u);
}

TEST(Simulation, TooFewNodesForTunnelLength) {
  SimConfig cfg;
  cfg.node_count = 4;
  EXPECT_EQ(code_of([&] { Simulation s(cfg); }), Errc::InvalidConfig);
  cfg.node_count = 5;
  EXPECT_NO_THROW(Simulation s(cfg));
}

TEST(Simulation, ConfigValidation) {
  const auto bad = [](auto mutate) {
    SimConfig cfg;
    mutate(cfg);
    return code_of([&] { validate(cfg); });
  };
  EXPECT_EQ(bad([](SimConfig& c) { c.udp_probability = 1.5; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](SimConfig& c) { c.tunnel_lifetime = 0.0; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](SimConfig& c) { c.link_latency.mean_ms = -1.0; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](SimConfig& c) {
              c.churn = ChurnSpec{};
              c.churn->base_online_fraction = 0.8;
              c.churn->diurnal_amplitude = 0.5;
            }),
            Errc::InvalidConfig);
  EXPECT_EQ(bad([](SimConfig& c) { c.first_address = "10.8.0"; }), Errc::InvalidAddress);
}

TEST(Simulation, SameSeedSameNetDb) {
  SimConfig cfg;
  cfg.seed = 5;
  Simulation a(cfg);
  Simulation b(cfg);
  EXPECT_EQ(netdb::to_json(a.netdb()).dump(), netdb::to_json(b.netdb()).dump());
  cfg.seed = 6;
  Simulation c(cfg);
  EXPECT_NE(netdb::to_json(a.netdb()).dump(), netdb::to_json(c.netdb()).dump());
}

TEST(Simulation, InboundLeaseGatewayIsFirstHop) {
  Pair p{SimConfig{}};
  const auto lease = p.sim.netdb().lookup_lease(p.pseudonym(), 0.0);
  ASSERT_TRUE(lease.has_value());
  EXPECT_EQ(lease->inbound_gateway_address, p.inbound.hops.front());
  EXPECT_EQ(p.inbound.hops.size(), 3u);
  for (auto h : p.inbound.hops) EXPECT_NE(h, p.recipient);
  EXPECT_TRUE(netdb::audit_unlinkability(p.sim.netdb()).empty());
}

TEST(Simulation, InboundNeedsOutboundFirst) {
  Simulation sim{SimConfig{}};
  EXPECT_EQ(code_of([&] { sim.build_tunnel(sim.address(1), TunnelDirection::Inbound); }), Errc::NoOutboundTunnel);
}

TEST(Simulation, TenOutboundTunnels) {
  Simulation sim{SimConfig{}};
  const NodeAddress sender = sim.address(0);
  for (int i = 0; i < 10; ++i) sim.build_tunnel(sender, TunnelDirection::Outbound);
  const auto tunnels = sim.tunnels_of(sender, TunnelDirection::Outbound);
  ASSERT_EQ(tunnels.size(), 10u);
  for (const auto& t : tunnels) {
    EXPECT_EQ(t.hops.size(), 3u);
    EXPECT_EQ(std::set<NodeAddress>(t.hops.begin(), t.hops.end()).size(), 3u);
    EXPECT_FALSE(std::count(t.hops.begin(), t.hops.end(), sender));
    EXPECT_EQ(t.status, TunnelStatus::Established);
  }
}

TEST(Simulation, RequestDeliversExactBytes) {
  Pair p{SimConfig{}};
  const Bytes req = to_bytes("GET /index.html");
  const auto id = p.sim.send_request(p.sender, p.pseudonym(), req, 2);
  p.sim.run(10.0);
  ASSERT_EQ(p.sim.deliveries().size(), 1u);
  const auto& d = p.sim.deliveries().front();
  EXPECT_EQ(d.request_id, id);
  EXPECT_EQ(d.recipient, p.recipient);
  EXPECT_EQ(d.payload, req);
  // Four onion links plus three inbound links at about 5 ms each.
  EXPECT_GE(d.time, 0.020);
}

TEST(Simulation, LargeRequestSurvivesFragmentation) {
  Pair p{SimConfig{}};
  Bytes req(5000);
  Rng rng(1);
  for (auto& b : req) b = static_cast<std::uint8_t>(rng.next_u64());
  p.sim.send_request(p.sender, p.pseudonym(), req, 2);
  p.sim.run(10.0);
  ASSERT_EQ(p.sim.deliveries().size(), 1u);
  EXPECT_EQ(p.sim.deliveries().front().payload, req);
  EXPECT_GT(p.sim.requests().begin()->second.cells, 1u);
}

TEST(Simulation, NaiveModeDeliversToo) {
  SimConfig cfg;
  cfg.onion_mode = crypto::OnionMode::Naive;
  Pair p{cfg};
  p.sim.send_request(p.sender, p.pseudonym(), as_bytes("GET /index.html"), 2);
  p.sim.run(10.0);
  ASSERT_EQ(p.sim.deliveries().size(), 1u);
  EXPECT_EQ(p.sim.deliveries().front().payload, to_bytes("GET /index.html"));
}

TEST(Simulation, ExpiredLeaseIsUnknownPseudonym) {
  SimConfig cfg;
  cfg.lease_lifetime = 1.0;
  cfg.tunnel_lifetime = 100.0;
  Pair p{cfg};
  p.sim.run(2.0);
  EXPECT_EQ(code_of([&] { p.sim.send_request(p.sender, p.pseudonym(), as_bytes("x"), 2); }), Errc::UnknownPseudonym);
}

TEST(Simulation, SenderWithoutTunnelFails) {
  Simulation sim{SimConfig{}};
  const auto r = sim.address(1);
  sim.build_tunnel(r, TunnelDirection::Outbound);
  sim.build_tunnel(r, TunnelDirection::Inbound);
  EXPECT_EQ(code_of([&] { sim.send_request(sim.address(0), sim.pseudonym_of(r), as_bytes("x"), 2); }),
            Errc::NoTunnel);
}

TEST(Simulation, EmptyRunAdvancesTime) {
  Simulation sim{SimConfig{}};
  sim.run(12.5);
  EXPECT_EQ(sim.now(), 12.5);
  EXPECT_TRUE(sim.transmissions().empty());
}

TEST(Simulation, TwoHundredRequestsAtGateway) {
  SimConfig cfg;
  cfg.background_flows = 10;
  Pair p{cfg};
  const NodeAddress gateway = p.inbound.hops.front();
  for (int i = 0; i < 200; ++i) {
    p.sim.schedule_request(0.1 + i * 0.05, p.sender, p.pseudonym(), to_bytes("GET /" + std::to_string(i)), 2);
  }
  p.sim.run(30.0);
  EXPECT_EQ(p.sim.deliveries().size(), 200u);
  const auto t = p.sim.capture(gateway);
  std::size_t class2 = 0;
  bool tcp = false;
  bool udp = false;
  for (const auto& r : t.records) {
    class2 += r.ground_truth_class == 2;
    tcp |= r.protocol == trace::Protocol::TCP;
    udp |= r.protocol == trace::Protocol::UDP;
  }
  EXPECT_GE(class2, 200u);
  EXPECT_TRUE(tcp);
  EXPECT_TRUE(udp);
}

TEST(Simulation, WireSizesStayUnderCeiling) {
  SimConfig cfg;
  cfg.background_flows = 20;
  cfg.link_padding_max = 64;
  Pair p{cfg};
  for (int i = 0; i < 50; ++i) {
    p.sim.schedule_request(0.1 + i * 0.1, p.sender, p.pseudonym(), Bytes(static_cast<std::size_t>(100 * i), 0x61), 2);
  }
  p.sim.run(20.0);
  ASSERT_FALSE(p.sim.transmissions().empty());
  for (const auto& t : p.sim.transmissions()) ASSERT_LE(t.ip_len(), kMaxWireSize);
}

TEST(Simulation, UninvolvedVantageSeesOnlyBackground) {
  SimConfig cfg;
  cfg.background_flows = 30;
  Pair p{cfg};
  std::set<NodeAddress> involved{p.sender, p.recipient};
  for (const auto& t : p.sim.tunnels()) involved.insert(t.hops.begin(), t.hops.end());
  std::optional<NodeAddress> bystander;
  for (auto a : p.sim.addresses()) {
    if (!involved.contains(a)) bystander = a;
  }
  ASSERT_TRUE(bystander.has_value());
  for (int i = 0; i < 20; ++i) p.sim.schedule_request(0.1 * i, p.sender, p.pseudonym(), to_bytes("GET /"), 2);
  p.sim.run(20.0);
  const auto t = p.sim.capture(*bystander);
  EXPECT_FALSE(t.records.empty());
  for (const auto& r : t.records) EXPECT_EQ(r.ground_truth_class, 1);
}

TEST(Simulation, UnknownVantage) {
  Simulation sim{SimConfig{}};
  EXPECT_EQ(code_of([&] { sim.capture(NodeAddress::parse("192.168.0.1")); }), Errc::UnknownNode);
}

TEST(Simulation, NoIntermediateSeesBothEnds) {
  SimConfig cfg;
  cfg.seed = 9;
  Pair p{cfg};
  for (int i = 0; i < 30; ++i) p.sim.schedule_request(0.1 * i, p.sender, p.pseudonym(), to_bytes("GET /"), 2);
  p.sim.run(20.0);
  ASSERT_EQ(p.sim.deliveries().size(), 30u);
  std::map<std::pair<std::uint64_t, NodeAddress>, std::set<NodeAddress>> seen;
  for (const auto& h : p.sim.hop_logs()) {
    auto& s = seen[{h.request_id, h.node}];
    s.insert(h.prev);
    if (h.next) s.insert(*h.next);
  }
  ASSERT_FALSE(seen.empty());
  for (const auto& [key, neighbours] : seen) {
    EXPECT_FALSE(neighbours.contains(p.sender) && neighbours.contains(p.recipient)) << key.second.to_string();
  }
}

TEST(Simulation, TrafficFollowsTunnelDirection) {
  Pair p{SimConfig{}};
  for (int i = 0; i < 10; ++i) p.sim.schedule_request(0.1 * i, p.sender, p.pseudonym(), to_bytes("GET /"), 2);
  p.sim.run(10.0);
  std::map<std::uint32_t, TunnelSpec> by_id;
  for (const auto& t : p.sim.tunnels()) by_id[t.id] = t;
  std::size_t checked = 0;
  for (const auto& h : p.sim.hop_logs()) {
    const auto& req = p.sim.requests().at(h.request_id);
    const auto& out = by_id.at(req.outbound_tunnel).hops;
    const auto& in = by_id.at(req.inbound_tunnel);
    if (h.leg == TunnelDirection::Outbound) {
      ASSERT_EQ(h.tunnel_id, 0u);
      if (h.node == req.gateway && !h.next) continue;  // onion exit at the inbound gateway
      const auto pos = static_cast<std::size_t>(std::find(out.begin(), out.end(), h.node) - out.begin());
      ASSERT_LT(pos, out.size());
      EXPECT_EQ(h.prev, pos == 0 ? req.sender : out[pos - 1]);
      EXPECT_EQ(h.next, pos + 1 < out.size() ? out[pos + 1] : req.gateway);
    } else {
      ASSERT_EQ(h.tunnel_id, in.id);
      if (h.node == in.owner) {
        EXPECT_EQ(h.prev, in.hops.back());
        EXPECT_FALSE(h.next.has_value());
      } else {
        const auto pos = static_cast<std::size_t>(std::find(in.hops.begin(), in.hops.end(), h.node) - in.hops.begin());
        ASSERT_LT(pos, in.hops.size());
        EXPECT_EQ(h.prev, pos == 0 ? out.back() : in.hops[pos - 1]);
        EXPECT_EQ(h.next, pos + 1 < in.hops.size() ? in.hops[pos + 1] : in.owner);
      }
    }
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Simulation, CellsAreConserved) {
  SimConfig cfg;
  cfg.background_flows = 5;
  Pair p{cfg};
  for (int i = 0; i < 40; ++i) p.sim.schedule_request(0.05 * i, p.sender, p.pseudonym(), Bytes(1500, 1), 2);
  p.sim.run(20.0);
  const auto& s = p.sim.stats();
  EXPECT_EQ(s.dropped_cells, 0u);
  EXPECT_EQ(s.misrouted_cells, 0u);
  EXPECT_EQ(s.injected_cells, s.delivered_cells);
  EXPECT_EQ(p.sim.deliveries().size(), 40u);
}

TEST(Simulation, ChurnedNodesDropTraffic) {
  SimConfig cfg;
  cfg.node_count = 30;
  cfg.churn = ChurnSpec{};
  cfg.churn->base_online_fraction = 0.5;
  cfg.churn->tick_interval = 0.5;
  Simulation sim(cfg);
  const auto s = sim.address(0);
  const auto r = sim.address(1);
  sim.build_tunnel(r, TunnelDirection::Outbound);
  sim.build_tunnel(r, TunnelDirection::Inbound);
  sim.build_tunnel(s, TunnelDirection::Outbound);
  for (int i = 0; i < 100; ++i) sim.schedule_request(0.1 * i, s, sim.pseudonym_of(r), to_bytes("GET /"), 2);
  sim.run(15.0);
  const auto& st = sim.stats();
  EXPECT_FALSE(sim.online_history().empty());
  EXPECT_GT(st.dropped_cells + st.failed_scheduled_requests, 0u);
  EXPECT_EQ(st.misrouted_cells, 0u);
  EXPECT_EQ(st.delivered_cells + st.dropped_cells, st.injected_cells);
}

TEST(Simulation, SameSeedSameCapture) {
  const auto once = [] {
    SimConfig cfg;
    cfg.background_flows = 15;
    cfg.seed = 3;
    Pair p{cfg};
    for (int i = 0; i < 20; ++i) p.sim.schedule_request(0.2 * i, p.sender, p.pseudonym(), to_bytes("GET /a"), 2);
    p.sim.run(10.0);
    return trace::to_jsonl(p.sim.capture(p.inbound.hops.front()));
  };
  EXPECT_EQ(once(), once());
}

}  // namespace
}  // namespace mixsim::simnet
