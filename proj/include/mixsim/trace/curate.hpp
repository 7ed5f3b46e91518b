#pragma once

#include "mixsim/error.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

inline bool survives_curation(const TraceRecord& r) {
  constexpr std::uint8_t dropped =
      annotation::kRetransmission | annotation::kFastRetransmission | annotation::kDuplicateAck;
  if (r.annotations & dropped) return false;
  // The zero-length rule applies to TCP only; empty UDP datagrams are kept.
  return !(r.protocol == Protocol::TCP && r.payload_size == 0);
}

/// Drops retransmissions, duplicate ACKs and empty TCP segments, keeps order,
/// and renumbers frame_num from 1. old_frame_num is left untouched.
inline Trace curate(const Trace& in) {
  if (in.curation_applied) fail(Errc::AlreadyCurated, "trace is already curated");
  Trace out;
  out.provenance = in.provenance;
  out.curation_applied = true;
  std::uint64_t frame = 0;
  for (const auto& r : in.records) {
    if (!survives_curation(r)) continue;
    out.records.push_back(r);
    out.records.back().frame_num = ++frame;
  }
  return out;
}

}  // namespace mixsim::trace
