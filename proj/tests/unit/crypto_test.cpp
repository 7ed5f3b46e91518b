#include <gtest/gtest.h>

#include "mixsim/crypto/cipher.hpp"
#include "mixsim/crypto/onion.hpp"

namespace mixsim::crypto {
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

struct Hop {
  KeyPair keys;
  NodeAddress address;
};

std::vector<Hop> make_hops(const std::vector<std::string>& addrs, Rng& rng) {
  std::vector<Hop> out;
  for (const auto& a : addrs) out.push_back({generate_keypair(KeyPurpose::Routing, rng), NodeAddress::parse(a)});
  return out;
}

std::vector<RouteHop> route_of(const std::vector<Hop>& hops) {
  std::vector<RouteHop> r;
  for (const auto& h : hops) r.push_back({h.keys.public_key, h.address});
  return r;
}

TEST(Seal, RoundTrip) {
  Rng rng(1);
  const auto kp = generate_keypair(KeyPurpose::EndToEnd, rng);
  const auto ct = seal(kp.public_key, KeyPurpose::EndToEnd, as_bytes("Hello Recipient"), 9);
  EXPECT_EQ(open(kp.private_key, KeyPurpose::EndToEnd, ct), to_bytes("Hello Recipient"));
}

TEST(Seal, EveryFlippedByteIsDetected) {
  Rng rng(2);
  const auto kp = generate_keypair(KeyPurpose::Routing, rng);
  const auto ct = seal(kp.public_key, KeyPurpose::Routing, as_bytes("Hello Recipient"), 3);
  for (std::size_t i = 0; i < ct.size(); ++i) {
    Bytes bad = ct;
    bad[i] ^= 0x01;
    EXPECT_EQ(code_of([&] { open(kp.private_key, KeyPurpose::Routing, bad); }), Errc::AuthenticationFailure) << i;
  }
}

TEST(Seal, LengthIsPredictable) {
  Rng rng(3);
  const auto kp = generate_keypair(KeyPurpose::Routing, rng);
  const Bytes m100(100, 0x41);
  const auto a = seal(kp.public_key, KeyPurpose::Routing, m100, 1);
  const auto b = seal(kp.public_key, KeyPurpose::Routing, {}, 1);
  EXPECT_EQ(a.size() - b.size(), 100u);
  EXPECT_EQ(b.size(), kSealOverhead);
}

TEST(Seal, KeyPurposeIsChecked) {
  Rng rng(4);
  const auto routing = generate_keypair(KeyPurpose::Routing, rng);
  const auto e2e = generate_keypair(KeyPurpose::EndToEnd, rng);
  EXPECT_EQ(code_of([&] { seal(routing.public_key, KeyPurpose::EndToEnd, as_bytes("x"), 1); }),
            Errc::KeyPurposeMismatch);
  const auto ct = seal(e2e.public_key, KeyPurpose::EndToEnd, as_bytes("x"), 1);
  EXPECT_EQ(code_of([&] { open(e2e.private_key, KeyPurpose::Routing, ct); }), Errc::KeyPurposeMismatch);
}

TEST(Seal, WrongKeyFails) {
  Rng rng(5);
  const auto a = generate_keypair(KeyPurpose::Routing, rng);
  const auto b = generate_keypair(KeyPurpose::Routing, rng);
  const auto ct = seal(a.public_key, KeyPurpose::Routing, as_bytes("secret"), 1);
  EXPECT_EQ(code_of([&] { open(b.private_key, KeyPurpose::Routing, ct); }), Errc::AuthenticationFailure);
}

TEST(Onion, ThreeHopsDeliverCore) {
  Rng rng(6);
  const auto hops = make_hops({"10.8.0.3", "10.8.0.4", "10.8.0.5"}, rng);
  for (auto mode : {OnionMode::Naive, OnionMode::Padded}) {
    OnionMessage msg = wrap(route_of(hops), as_bytes("Hello Recipient"), mode, 77);
    for (std::size_t i = 0; i < hops.size(); ++i) {
      const auto ins = peel(hops[i].keys.private_key, msg);
      if (i + 1 < hops.size()) {
        ASSERT_FALSE(ins.is_deliver());
        EXPECT_EQ(*ins.next_hop, hops[i + 1].address);
        msg.blob = ins.inner;
      } else {
        ASSERT_TRUE(ins.is_deliver());
        EXPECT_EQ(ins.inner, to_bytes("Hello Recipient"));
      }
    }
  }
}

TEST(Onion, SingleHopDeliversImmediately) {
  Rng rng(7);
  const auto hops = make_hops({"10.8.0.9"}, rng);
  const auto msg = wrap(route_of(hops), as_bytes("core"), OnionMode::Naive, 1);
  const auto ins = peel(hops[0].keys.private_key, msg);
  EXPECT_TRUE(ins.is_deliver());
  EXPECT_EQ(ins.inner, to_bytes("core"));
}

TEST(Onion, NaiveLengthGrowsWithHops) {
  Rng rng(8);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3"}, rng);
  const Bytes core(50, 0x11);
  std::vector<std::size_t> lengths;
  for (std::size_t n = 1; n <= 3; ++n) {
    const std::vector<Hop> prefix(hops.begin(), hops.begin() + static_cast<std::ptrdiff_t>(n));
    lengths.push_back(wrap(route_of(prefix), core, OnionMode::Naive, 1).blob.size());
  }
  // Oracle: every layer adds one seal and one routing instruction.
  for (std::size_t n = 1; n <= 3; ++n) {
    EXPECT_EQ(lengths[n - 1], core.size() + n * (kSealOverhead + kInstructionSize));
  }
  EXPECT_LT(lengths[0], lengths[1]);
  EXPECT_LT(lengths[1], lengths[2]);
}

TEST(Onion, NaiveLengthShrinksByConstantPerPeel) {
  Rng rng(9);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"}, rng);
  OnionMessage msg = wrap(route_of(hops), Bytes(10, 1), OnionMode::Naive, 5);
  for (std::size_t i = 0; i + 1 < hops.size(); ++i) {
    const std::size_t before = msg.blob.size();
    msg.blob = peel(hops[i].keys.private_key, msg).inner;
    EXPECT_EQ(before - msg.blob.size(), kNaiveLayerOverhead);
  }
}

TEST(Onion, WrongKeyIsRejected) {
  Rng rng(10);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3"}, rng);
  for (auto mode : {OnionMode::Naive, OnionMode::Padded}) {
    const auto msg = wrap(route_of(hops), as_bytes("core"), mode, 1);
    EXPECT_EQ(code_of([&] { peel(hops[1].keys.private_key, msg); }), Errc::AuthenticationFailure);
  }
}

TEST(Onion, PaddedLengthIsConstant) {
  Rng rng(11);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4", "10.0.0.5"}, rng);
  OnionMessage msg = wrap(route_of(hops), Bytes(200, 7), OnionMode::Padded, 5);
  EXPECT_EQ(msg.blob.size(), kDefaultCellSize + kPaddedLayerOverhead);
  for (std::size_t i = 0; i + 1 < hops.size(); ++i) {
    const std::size_t before = msg.blob.size();
    msg.blob = peel(hops[i].keys.private_key, msg).inner;
    EXPECT_EQ(msg.blob.size(), before);
  }
  EXPECT_EQ(peel(hops.back().keys.private_key, msg).inner, Bytes(200, 7));
}

TEST(Onion, PaddedLengthDoesNotDependOnHops) {
  Rng rng(12);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3"}, rng);
  std::set<std::size_t> sizes;
  for (std::size_t n = 1; n <= 3; ++n) {
    const std::vector<Hop> prefix(hops.begin(), hops.begin() + static_cast<std::ptrdiff_t>(n));
    sizes.insert(wrap(route_of(prefix), Bytes(40, 0), OnionMode::Padded, 1).blob.size());
  }
  EXPECT_EQ(sizes.size(), 1u);
}

TEST(Onion, PaddedCapacityIsEnforced) {
  Rng rng(13);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2", "10.0.0.3"}, rng);
  const std::size_t cap = padded_core_capacity(3, kDefaultCellSize);
  EXPECT_NO_THROW(wrap(route_of(hops), Bytes(cap, 0), OnionMode::Padded, 1));
  EXPECT_EQ(code_of([&] { wrap(route_of(hops), Bytes(cap + 1, 0), OnionMode::Padded, 1); }), Errc::CoreTooLarge);
}

TEST(Onion, RouteBounds) {
  Rng rng(14);
  EXPECT_EQ(code_of([&] { wrap({}, as_bytes("x"), OnionMode::Naive, 1); }), Errc::EmptyRoute);
  std::vector<std::string> nine;
  for (int i = 1; i <= 9; ++i) nine.push_back("10.0.0." + std::to_string(i));
  const auto hops = make_hops(nine, rng);
  EXPECT_EQ(code_of([&] { wrap(route_of(hops), as_bytes("x"), OnionMode::Naive, 1); }), Errc::RouteTooLong);
}

TEST(Onion, FigureOneRoute) {
  Rng rng(15);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.4", "10.0.0.2", "10.0.0.3"}, rng);
  OnionMessage msg = wrap(route_of(hops), as_bytes("Hello Recipient"), OnionMode::Naive, 3);
  std::vector<std::string> seen;
  for (const auto& h : hops) {
    const auto ins = peel(h.keys.private_key, msg);
    seen.push_back(ins.is_deliver() ? "DELIVER" : ins.next_hop->to_string());
    msg.blob = ins.inner;
  }
  EXPECT_EQ(seen, (std::vector<std::string>{"10.0.0.4", "10.0.0.2", "10.0.0.3", "DELIVER"}));
}

TEST(Onion, WrapIsDeterministicInSeed) {
  Rng rng(16);
  const auto hops = make_hops({"10.0.0.1", "10.0.0.2"}, rng);
  const auto a = wrap(route_of(hops), as_bytes("x"), OnionMode::Padded, 42);
  const auto b = wrap(route_of(hops), as_bytes("x"), OnionMode::Padded, 42);
  const auto c = wrap(route_of(hops), as_bytes("x"), OnionMode::Padded, 43);
  EXPECT_EQ(a.blob, b.blob);
  EXPECT_NE(a.blob, c.blob);
}

TEST(Onion, RandomRoutesRoundTrip) {
  Rng rng(17);
  std::vector<Hop> pool;
  for (std::uint32_t i = 0; i < 12; ++i) {
    pool.push_back({generate_keypair(KeyPurpose::Routing, rng), NodeAddress(0x0A080002 + i)});
  }
  for (int trial = 0; trial < 200; ++trial) {
    auto shuffled = pool;
    rng.shuffle(shuffled);
    const std::size_t n = 1 + rng.index(kMaxRouteLength);
    shuffled.resize(n);
    const auto mode = rng.bernoulli(0.5) ? OnionMode::Padded : OnionMode::Naive;
    const std::size_t max_core = mode == OnionMode::Padded ? std::min<std::size_t>(900, padded_core_capacity(n, kDefaultCellSize)) : 900;
    Bytes core(rng.index(max_core + 1));
    for (auto& b : core) b = static_cast<std::uint8_t>(rng.next_u64());
    OnionMessage msg = wrap(route_of(shuffled), core, mode, rng.next_u64());
    for (std::size_t i = 0; i < n; ++i) {
      const auto ins = peel(shuffled[i].keys.private_key, msg);
      if (i + 1 < n) {
        ASSERT_EQ(ins.next_hop, shuffled[i + 1].address);
        msg.blob = ins.inner;
      } else {
        ASSERT_TRUE(ins.is_deliver());
        ASSERT_EQ(ins.inner, core);
      }
    }
  }
}

}  // namespace
}  // namespace mixsim::crypto
