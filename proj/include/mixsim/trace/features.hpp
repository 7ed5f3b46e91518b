#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

inline constexpr std::size_t kPayloadFeatureBytes = 256;

inline constexpr std::array<std::string_view, 14> kMetadataFeatures = {
    "tcp_seq", "dst_port",  "payload_size", "ip_len",  "ip_ttl",    "tcp_dataofs", "old_frame_num",
    "frame_num", "timestamp", "tcp_window",   "tcp_ack", "tcp_flags", "src_port",    "ip_id"};

enum class FeatureVariant { AllRaw, WithoutPayload, WithoutPort, PayloadOnly };

constexpr std::string_view to_string(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::AllRaw: return "all-raw";
    case FeatureVariant::WithoutPayload: return "without-payload";
    case FeatureVariant::WithoutPort: return "without-port";
    case FeatureVariant::PayloadOnly: return "payload-only";
  }
  return "?";
}

inline FeatureVariant parse_variant(std::string_view s) {
  for (auto v : {FeatureVariant::AllRaw, FeatureVariant::WithoutPayload, FeatureVariant::WithoutPort,
                 FeatureVariant::PayloadOnly}) {
    if (s == to_string(v)) return v;
  }
  if (s == "all-data" || s == "all") return FeatureVariant::AllRaw;
  fail(Errc::ConfigError, "unknown feature variant '" + std::string(s) + "'");
}

/// A variant plus optional metadata columns removed on top of it.
struct FeatureSpec {
  FeatureVariant variant = FeatureVariant::AllRaw;
  std::set<std::string> dropped;

  std::string label() const {
    std::string out(to_string(variant));
    for (const auto& d : dropped) out += "-no-" + d;
    return out;
  }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

inline bool uses_metadata(FeatureVariant v) { return v != FeatureVariant::PayloadOnly; }
inline bool uses_payload(FeatureVariant v) { return v != FeatureVariant::WithoutPayload; }

/// Metadata columns kept by `spec`, in table order.
inline std::vector<std::size_t> metadata_columns(const FeatureSpec& spec) {
  std::vector<std::size_t> cols;
  if (!uses_metadata(spec.variant)) return cols;
  for (std::size_t i = 0; i < kMetadataFeatures.size(); ++i) {
    const std::string name(kMetadataFeatures[i]);
    if (spec.variant == FeatureVariant::WithoutPort && (name == "src_port" || name == "dst_port")) continue;
    if (spec.dropped.contains(name)) continue;
    cols.push_back(i);
  }
  return cols;
}

inline std::size_t feature_length(const FeatureSpec& spec) {
  return metadata_columns(spec).size() + (uses_payload(spec.variant) ? kPayloadFeatureBytes : 0);
}

inline std::vector<std::string> feature_names(const FeatureSpec& spec) {
  std::vector<std::string> names;
  for (auto c : metadata_columns(spec)) names.emplace_back(kMetadataFeatures[c]);
  if (uses_payload(spec.variant)) {
    for (std::size_t i = 0; i < kPayloadFeatureBytes; ++i) names.push_back("payload_" + std::to_string(i));
  }
  return names;
}

inline double metadata_value(const TraceRecord& r, std::size_t column) {
  switch (column) {
    case 0: return r.tcp_seq;
    case 1: return r.dst_port;
    case 2: return r.payload_size;
    case 3: return r.ip_len;
    case 4: return r.ip_ttl;
    case 5: return r.tcp_dataofs;
    case 6: return static_cast<double>(r.old_frame_num);
    case 7: return static_cast<double>(r.frame_num);
    case 8: return r.timestamp;
    case 9: return r.tcp_window;
    case 10: return r.tcp_ack;
    case 11: return r.tcp_flags;
    case 12: return r.src_port;
    case 13: return r.ip_id;
  }
  fail(Errc::OutOfRange, "metadata column " + std::to_string(column));
}

/// Metadata as raw numbers, then payload bytes scaled to [0,1] and zero-padded
/// to 256.
inline std::vector<double> extract_features(const TraceRecord& r, const FeatureSpec& spec) {
  std::vector<double> out;
  out.reserve(feature_length(spec));
  for (auto c : metadata_columns(spec)) out.push_back(metadata_value(r, c));
  if (uses_payload(spec.variant)) {
    const std::size_t n = std::min(r.payload.size(), kPayloadFeatureBytes);
    for (std::size_t i = 0; i < n; ++i) out.push_back(r.payload[i] / 255.0);
    out.resize(out.size() + kPayloadFeatureBytes - n, 0.0);
  }
  return out;
}

inline std::vector<double> extract_features(const TraceRecord& r, FeatureVariant v) {
  return extract_features(r, FeatureSpec{v, {}});
}

}  // namespace mixsim::trace
