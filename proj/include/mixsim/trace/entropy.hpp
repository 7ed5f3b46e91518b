#pragma once

#include <array>
#include <cmath>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

/// Plug-in Shannon entropy of the byte histogram, in bits per byte.
inline double byte_entropy(ByteView data) {
  if (data.empty()) fail(Errc::EmptyPayload, "entropy of an empty byte string");
  std::array<std::size_t, 256> counts{};
  for (auto b : data) ++counts[b];
  const double n = static_cast<double>(data.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

inline double payload_entropy(const TraceRecord& r) { return byte_entropy(r.payload); }

}  // namespace mixsim::trace
