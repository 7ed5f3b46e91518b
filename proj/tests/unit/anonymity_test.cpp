#include <gtest/gtest.h>

#include <cmath>

#include "mixsim/anonymity/information.hpp"
#include "mixsim/anonymity/leakage.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::anonymity {
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

// Straight double loop, kept apart from the library code on purpose.
double brute_mi(const std::vector<std::vector<double>>& m) {
  std::vector<double> px(m.size(), 0.0);
  std::vector<double> py(m[0].size(), 0.0);
  for (std::size_t x = 0; x < m.size(); ++x) {
    for (std::size_t y = 0; y < m[x].size(); ++y) {
      px[x] += m[x][y];
      py[y] += m[x][y];
    }
  }
  double mi = 0.0;
  for (std::size_t x = 0; x < m.size(); ++x) {
    for (std::size_t y = 0; y < m[x].size(); ++y) {
      if (m[x][y] > 0) mi += m[x][y] * std::log2(m[x][y] / (px[x] * py[y]));
    }
  }
  return mi;
}

TEST(BinaryEntropy, Examples) {
  EXPECT_DOUBLE_EQ(binary_entropy(0.5), 1.0);
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.11), 0.49995, 1e-4);
  EXPECT_EQ(code_of([] { binary_entropy(1.5); }), Errc::OutOfRange);
  EXPECT_EQ(code_of([] { binary_entropy(-0.1); }), Errc::OutOfRange);
}

TEST(BinaryEntropy, Symmetric) {
  for (double p = 0.01; p < 1.0; p += 0.01) EXPECT_NEAR(binary_entropy(p), binary_entropy(1.0 - p), 1e-12);
}

TEST(Fano, UniformThousandNodes) {
  const auto r = fano_lower_bound(10.0, 0.0, 1023);
  EXPECT_NEAR(r.lower_bound_pe, 9.0 / std::log2(1023.0), 1e-12);
  EXPECT_NEAR(r.lower_bound_pe, 0.90013, 1e-4);
  EXPECT_FALSE(r.clamped);
}

TEST(Fano, FullLeakageClamps) {
  const auto r = fano_lower_bound(10.0, 10.0, 1023);
  EXPECT_EQ(r.lower_bound_pe, 0.0);
  EXPECT_TRUE(r.clamped);
}

TEST(Fano, Errors) {
  EXPECT_EQ(code_of([] { fano_lower_bound(10.0, 0.0, 1); }), Errc::DegenerateSet);
  EXPECT_EQ(code_of([] { fano_lower_bound(-1.0, 0.0, 4); }), Errc::NegativeEntropy);
  EXPECT_EQ(code_of([] { fano_lower_bound(2.0, 3.0, 4); }), Errc::OutOfRange);
}

TEST(Fano, MonotoneInLeakageAndSetSize) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const double h = rng.uniform(0.0, 20.0);
    const double i1 = rng.uniform(0.0, h);
    const double i2 = rng.uniform(i1, h);
    const auto n1 = static_cast<std::size_t>(rng.uniform_int(2, 5000));
    const auto n2 = static_cast<std::size_t>(rng.uniform_int(n1, 10000));
    const double base = fano_lower_bound(h, i1, n1).lower_bound_pe;
    EXPECT_LE(fano_lower_bound(h, i2, n1).lower_bound_pe, base + 1e-12);
    EXPECT_LE(fano_lower_bound(h, i1, n2).lower_bound_pe, base + 1e-12);
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
  }
}

TEST(MutualInformation, WorkedTable) {
  const std::vector<std::vector<double>> m{{0.25, 0.25}, {0.0, 0.5}};
  EXPECT_NEAR(plugin_mi(make_joint(m)), 0.31128, 1e-5);
  EXPECT_NEAR(plugin_mi(make_joint(m)), brute_mi(m), 1e-12);
}

TEST(MutualInformation, Deterministic) {
  std::vector<std::vector<double>> m(4, std::vector<double>(4, 0.0));
  for (int i = 0; i < 4; ++i) m[i][i] = 0.25;
  EXPECT_NEAR(plugin_mi(make_joint(m)), 2.0, 1e-12);
  EXPECT_NEAR(plugin_entropy({{"a", "b", "c", "d"}, {0.25, 0.25, 0.25, 0.25}}), 2.0, 1e-12);
}

TEST(MutualInformation, IndependenceIsZero) {
  const std::vector<double> px{0.1, 0.2, 0.7};
  const std::vector<double> py{0.3, 0.3, 0.15, 0.25};
  std::vector<std::vector<double>> m(3, std::vector<double>(4));
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t y = 0; y < 4; ++y) m[x][y] = px[x] * py[y];
  }
  EXPECT_LE(std::abs(plugin_mi(make_joint(m))), 1e-12);
  const auto j = make_joint({{0.25, 0.25}, {0.0, 0.5}});
  EXPECT_LE(std::abs(plugin_mi(product_of_marginals(j))), 1e-12);
}

TEST(MutualInformation, InvalidDistribution) {
  EXPECT_EQ(code_of([] { plugin_mi(make_joint({{0.5, 0.6}})); }), Errc::InvalidDistribution);
  EXPECT_EQ(code_of([] { plugin_mi(make_joint({{-0.5, 1.5}})); }), Errc::InvalidDistribution);
  EXPECT_EQ(code_of([] { plugin_entropy({{"a"}, {}}); }), Errc::InvalidDistribution);
}

TEST(MutualInformation, BoundedByMarginalEntropies) {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const auto rows = 1 + rng.index(6);
    const auto cols = 1 + rng.index(6);
    std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
    double total = 0.0;
    for (auto& row : m) {
      for (auto& v : row) {
        v = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
        total += v;
      }
    }
    if (total == 0.0) continue;
    for (auto& row : m) {
      for (auto& v : row) v /= total;
    }
    const auto j = make_joint(m);
    const double mi = plugin_mi(j);
    EXPECT_GE(mi, 0.0);
    EXPECT_LE(mi, std::min(entropy_of(j.marginal_x()), entropy_of(j.marginal_y())) + 1e-9);
    EXPECT_NEAR(mi, brute_mi(m), 1e-9);
  }
}

TEST(Samples, PerfectCorrelation) {
  const std::vector<std::pair<std::string, int>> pairs{{"a", 1}, {"a", 1}, {"b", 2}, {"b", 2}};
  EXPECT_NEAR(plugin_mi(estimate_joint_from_samples(pairs)), 1.0, 1e-12);
}

TEST(Samples, SinglePair) {
  const std::vector<std::pair<int, int>> pairs{{3, 4}};
  EXPECT_EQ(plugin_mi(estimate_joint_from_samples(pairs)), 0.0);
}

TEST(Samples, Empty) {
  EXPECT_EQ(code_of([] { estimate_joint_from_samples(std::vector<std::pair<int, int>>{}); }), Errc::EmptySample);
}

TEST(Samples, IndependentDrawHasSmallBias) {
  Rng rng(10000);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < 10000; ++i) pairs.emplace_back(static_cast<int>(rng.index(4)), static_cast<int>(rng.index(4)));
  const double mi = plugin_mi(estimate_joint_from_samples(pairs));
  EXPECT_GE(mi, 0.0);
  EXPECT_LE(mi, 0.05);
}

TEST(StableCore, FourAlwaysOnline) {
  std::vector<std::set<NodeAddress>> ticks;
  Rng rng(3);
  for (int t = 0; t < 24; ++t) {
    std::set<NodeAddress> online;
    for (std::uint32_t n = 0; n < 4; ++n) online.insert(NodeAddress(n));
    for (std::uint32_t n = 4; n < 10; ++n) {
      // Node n is forced offline at tick n; otherwise it flips a coin.
      if (static_cast<std::uint32_t>(t) != n && rng.bernoulli(0.7)) online.insert(NodeAddress(n));
    }
    ticks.push_back(online);
  }
  const auto core = stable_core_reduction(ticks);
  EXPECT_EQ(core, (std::set<NodeAddress>{NodeAddress(0), NodeAddress(1), NodeAddress(2), NodeAddress(3)}));
}

TEST(StableCore, SingleTickAndEmpty) {
  const std::set<NodeAddress> s{NodeAddress(5), NodeAddress(9)};
  EXPECT_EQ(stable_core_reduction({s}), s);
  EXPECT_EQ(code_of([] { stable_core_reduction(std::vector<std::set<NodeAddress>>{}); }), Errc::EmptyWindow);
}

TEST(StableCore, ReducedSetWeakensBound) {
  const double reduced = fano_lower_bound(2.0, 0.0, 3).lower_bound_pe;
  EXPECT_NEAR(reduced, 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(reduced, 0.631, 1e-3);
  EXPECT_LT(reduced, fano_lower_bound(10.0, 0.0, 1023).lower_bound_pe);
}

TEST(LengthLeakage, NaiveLeaksPaddedDoesNot) {
  const auto r = length_leakage_demo({1, 2, 3}, 100, 1);
  EXPECT_EQ(r.naive_samples.size(), 300u);
  EXPECT_EQ(r.padded_samples.size(), 300u);
  EXPECT_NEAR(r.mi_naive, std::log2(3.0), 0.05);
  EXPECT_LE(r.mi_padded, 0.01);
}

TEST(LengthLeakage, SingleLengthLeaksNothing) {
  const auto r = length_leakage_demo({3}, 50, 2);
  EXPECT_EQ(r.mi_naive, 0.0);
  EXPECT_EQ(r.mi_padded, 0.0);
}

}  // namespace
}  // namespace mixsim::anonymity
