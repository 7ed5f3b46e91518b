#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "mixsim/trace/entropy.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

inline constexpr std::size_t kTopSizes = 15;

struct SummaryStats {
  std::size_t records = 0;
  std::map<std::pair<Protocol, std::uint16_t>, std::size_t> port_counts;  // by destination port
  std::map<Protocol, std::vector<std::pair<std::uint32_t, std::size_t>>> top_sizes;  // (payload_size, count)
  std::vector<std::pair<std::uint64_t, double>> entropy_series;                       // (frame_num, bits)
  std::optional<double> mean_entropy;
};

/// Port breakdown, the 15 most common payload sizes per protocol (ties broken
/// by smaller size), and per-record payload entropy for non-empty payloads.
inline SummaryStats summarize(const Trace& trace) {
  SummaryStats s;
  s.records = trace.records.size();
  std::map<Protocol, std::map<std::uint32_t, std::size_t>> sizes;
  double total = 0.0;
  for (const auto& r : trace.records) {
    ++s.port_counts[{r.protocol, r.dst_port}];
    ++sizes[r.protocol][r.payload_size];
    if (r.payload_size > 0) {
      const double h = payload_entropy(r);
      s.entropy_series.emplace_back(r.frame_num, h);
      total += h;
    }
  }
  for (auto& [proto, hist] : sizes) {
    std::vector<std::pair<std::uint32_t, std::size_t>> v(hist.begin(), hist.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (v.size() > kTopSizes) v.resize(kTopSizes);
    s.top_sizes[proto] = std::move(v);
  }
  if (!s.entropy_series.empty()) s.mean_entropy = total / static_cast<double>(s.entropy_series.size());
  return s;
}

/// Most frequent payload size for `proto`, if any record has that protocol.
inline std::optional<std::uint32_t> size_mode(const SummaryStats& s, Protocol proto) {
  auto it = s.top_sizes.find(proto);
  if (it == s.top_sizes.end() || it->second.empty()) return std::nullopt;
  return it->second.front().first;
}

}  // namespace mixsim::trace
