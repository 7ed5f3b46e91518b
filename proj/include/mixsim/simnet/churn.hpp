#pragma once

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "mixsim/bytes.hpp"
#include "mixsim/rng.hpp"
#include "mixsim/simnet/config.hpp"

namespace mixsim::simnet {

inline double online_probability(const ChurnSpec& spec, double t) {
  return spec.base_online_fraction * (1.0 + spec.diurnal_amplitude * std::sin(2.0 * std::numbers::pi * t / spec.period));
}

/// Online set at time `t`: stable-core members always, everyone else by an
/// independent draw per node.
inline std::set<NodeAddress> churn_tick(const ChurnSpec& spec, double t, const std::vector<NodeAddress>& nodes,
                                        Rng& rng) {
  const double p = online_probability(spec, t);
  std::set<NodeAddress> online;
  for (auto addr : nodes) {
    if (spec.stable_core.contains(addr)) {
      online.insert(addr);
    } else if (rng.bernoulli(p)) {
      online.insert(addr);
    }
  }
  return online;
}

}  // namespace mixsim::simnet
