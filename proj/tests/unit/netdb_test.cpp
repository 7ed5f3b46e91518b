#include <gtest/gtest.h>

#include "mixsim/netdb/netdb.hpp"

namespace mixsim::netdb {
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

LeaseRecord lease_for(const crypto::KeyPair& e2e, const std::string& gateway, double expiry) {
  return {derive_pseudonym(e2e.public_key), e2e.public_key, NodeAddress::parse(gateway), 7, expiry};
}

NetDb sixteen_nodes(Rng& rng) {
  NetDb db;
  for (std::uint32_t i = 0; i < 16; ++i) {
    db.register_node(NodeAddress(0x0A080002 + i), crypto::generate_keypair(crypto::KeyPurpose::Routing, rng).public_key);
  }
  return db;
}

TEST(NetDb, RegisterThenLookup) {
  Rng rng(1);
  NetDb db;
  const auto kp = crypto::generate_keypair(crypto::KeyPurpose::Routing, rng);
  db.register_node(NodeAddress::parse("10.8.0.11"), kp.public_key);
  const auto* rec = db.lookup_node(NodeAddress::parse("10.8.0.11"));
  ASSERT_NE(rec, nullptr);
  EXPECT_EQ(rec->routing_public_key, kp.public_key);
  EXPECT_EQ(db.lookup_node(NodeAddress::parse("10.8.0.12")), nullptr);
}

TEST(NetDb, DuplicateAddress) {
  Rng rng(2);
  NetDb db;
  const auto addr = NodeAddress::parse("10.8.0.11");
  db.register_node(addr, crypto::generate_keypair(crypto::KeyPurpose::Routing, rng).public_key);
  EXPECT_EQ(code_of([&] {
              db.register_node(addr, crypto::generate_keypair(crypto::KeyPurpose::Routing, rng).public_key);
            }),
            Errc::DuplicateAddress);
}

TEST(NetDb, SixteenNodes) {
  Rng rng(3);
  EXPECT_EQ(sixteen_nodes(rng).node_count(), 16u);
}

TEST(NetDb, NodeRecordsHoldRoutingKeysOnly) {
  Rng rng(4);
  NetDb db;
  EXPECT_EQ(code_of([&] {
              db.register_node(NodeAddress(1), crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng).public_key);
            }),
            Errc::KeyPurposeMismatch);
}

TEST(NetDb, LeaseViaOutboundTunnelResolves) {
  Rng rng(5);
  NetDb db = sixteen_nodes(rng);
  const auto a = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  db.publish_lease(lease_for(a, "10.8.0.5", 600.0), DeliveryChannel::OutboundTunnel, 0.0);
  const auto got = db.lookup_lease(derive_pseudonym(a.public_key), 10.0);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->inbound_gateway_address, NodeAddress::parse("10.8.0.5"));
  EXPECT_EQ(got->end_to_end_public_key, a.public_key);
}

TEST(NetDb, DirectWriteRejectedInStrictMode) {
  Rng rng(6);
  NetDb strict(true);
  NetDb lax(false);
  const auto a = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  EXPECT_EQ(code_of([&] { strict.publish_lease(lease_for(a, "10.8.0.5", 600.0), DeliveryChannel::Direct, 0.0); }),
            Errc::DirectWriteRejected);
  EXPECT_NO_THROW(lax.publish_lease(lease_for(a, "10.8.0.5", 600.0), DeliveryChannel::Direct, 0.0));
}

TEST(NetDb, ExpiredLeases) {
  Rng rng(7);
  NetDb db;
  const auto a = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  EXPECT_EQ(code_of([&] { db.publish_lease(lease_for(a, "10.8.0.5", 5.0), DeliveryChannel::OutboundTunnel, 5.0); }),
            Errc::ExpiredLease);
  db.publish_lease(lease_for(a, "10.8.0.5", 600.0), DeliveryChannel::OutboundTunnel, 0.0);
  EXPECT_TRUE(db.lookup_lease(derive_pseudonym(a.public_key), 599.0).has_value());
  EXPECT_FALSE(db.lookup_lease(derive_pseudonym(a.public_key), 600.0).has_value());
}

TEST(NetDb, LeasesHoldEndToEndKeysOnly) {
  Rng rng(8);
  NetDb db;
  const auto r = crypto::generate_keypair(crypto::KeyPurpose::Routing, rng);
  LeaseRecord lease{derive_pseudonym(r.public_key), r.public_key, NodeAddress(1), 0, 10.0};
  EXPECT_EQ(code_of([&] { db.publish_lease(lease, DeliveryChannel::OutboundTunnel, 0.0); }), Errc::KeyPurposeMismatch);
}

TEST(NetDb, PseudonymIsKeyDerivative) {
  Rng rng(9);
  const auto a = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  const auto b = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  EXPECT_EQ(derive_pseudonym(a.public_key).size(), kPseudonymHexChars);
  EXPECT_EQ(derive_pseudonym(a.public_key), derive_pseudonym(a.public_key));
  EXPECT_NE(derive_pseudonym(a.public_key), derive_pseudonym(b.public_key));
}

TEST(NetDb, SampleRouteExcludesSelf) {
  Rng rng(10);
  const NetDb db = sixteen_nodes(rng);
  const NodeAddress self(0x0A080002);
  for (int trial = 0; trial < 100; ++trial) {
    const auto route = db.sample_route(3, {self}, rng);
    ASSERT_EQ(route.size(), 3u);
    std::set<NodeAddress> distinct;
    for (const auto& h : route) {
      EXPECT_NE(h.address, self);
      distinct.insert(h.address);
      EXPECT_EQ(db.lookup_node(h.address)->routing_public_key, h.routing_key);
    }
    EXPECT_EQ(distinct.size(), 3u);
  }
}

TEST(NetDb, SampleRoutePigeonhole) {
  Rng rng(11);
  const NetDb db = sixteen_nodes(rng);
  EXPECT_EQ(code_of([&] { db.sample_route(16, {NodeAddress(0x0A080002)}, rng); }), Errc::InsufficientNodes);
  EXPECT_NO_THROW(db.sample_route(15, {NodeAddress(0x0A080002)}, rng));
}

TEST(NetDb, SampleRouteIsDeterministic) {
  Rng keys(12);
  const NetDb db = sixteen_nodes(keys);
  Rng a(99);
  Rng b(99);
  const auto ra = db.sample_route(3, {}, a);
  const auto rb = db.sample_route(3, {}, b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ra[i].address, rb[i].address);
}

TEST(NetDb, SampleRouteIsUniform) {
  Rng keys(13);
  const NetDb db = sixteen_nodes(keys);
  Rng rng(5);
  std::map<NodeAddress, int> first;
  const int trials = 15000;
  for (int i = 0; i < trials; ++i) ++first[db.sample_route(1, {}, rng).front().address];
  ASSERT_EQ(first.size(), 16u);
  // Expected 937.5 per node, binomial sd about 30.
  for (const auto& [addr, n] : first) EXPECT_NEAR(n, trials / 16.0, 150.0) << addr.to_string();
}

TEST(NetDb, AuditFindsNoLinkInHonestDatabase) {
  Rng rng(14);
  NetDb db = sixteen_nodes(rng);
  for (int i = 0; i < 5; ++i) {
    const auto e2e = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
    db.publish_lease(lease_for(e2e, "10.8.0." + std::to_string(3 + i), 600.0), DeliveryChannel::OutboundTunnel, 0.0);
  }
  EXPECT_TRUE(audit_unlinkability(db).empty());
}

TEST(NetDb, AuditFlagsEmbeddedRoutingKey) {
  Rng rng(15);
  NetDb db(false);
  const auto routing = crypto::generate_keypair(crypto::KeyPurpose::Routing, rng);
  db.register_node(NodeAddress::parse("10.8.0.11"), routing.public_key);
  crypto::PublicKey leaky{crypto::KeyPurpose::EndToEnd, routing.public_key.bytes};
  leaky.bytes.push_back(0);
  db.publish_lease({derive_pseudonym(leaky), leaky, NodeAddress::parse("10.8.0.5"), 0, 10.0},
                   DeliveryChannel::OutboundTunnel, 0.0);
  EXPECT_FALSE(audit_unlinkability(db).empty());
}

TEST(NetDb, JsonSnapshotHasTwoArrays) {
  Rng rng(16);
  NetDb db = sixteen_nodes(rng);
  const auto e2e = crypto::generate_keypair(crypto::KeyPurpose::EndToEnd, rng);
  db.publish_lease(lease_for(e2e, "10.8.0.5", 600.0), DeliveryChannel::OutboundTunnel, 0.0);
  const auto j = to_json(db);
  EXPECT_EQ(j.at("nodes").size(), 16u);
  EXPECT_EQ(j.at("leases").size(), 1u);
  EXPECT_FALSE(j.at("leases")[0].contains("owner"));
}

}  // namespace
}  // namespace mixsim::netdb
