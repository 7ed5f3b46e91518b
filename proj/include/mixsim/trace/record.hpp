#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixsim/bytes.hpp"

namespace mixsim::trace {

enum class Protocol : std::uint8_t { TCP = 6, UDP = 17 };

constexpr std::string_view to_string(Protocol p) { return p == Protocol::TCP ? "TCP" : "UDP"; }

namespace annotation {
inline constexpr std::uint8_t kRetransmission = 1u << 0;
inline constexpr std::uint8_t kFastRetransmission = 1u << 1;
inline constexpr std::uint8_t kDuplicateAck = 1u << 2;
}  // namespace annotation

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcp_flag

/// One captured IPv4 TCP or UDP packet.
struct TraceRecord {
  double timestamp = 0.0;
  std::uint64_t frame_num = 0;
  std::uint64_t old_frame_num = 0;
  std::string src_ip;
  std::string dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::TCP;
  std::uint16_t ip_len = 0;
  std::uint8_t ip_ttl = 0;
  std::uint16_t ip_id = 0;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  std::uint8_t tcp_flags = 0;
  std::uint16_t tcp_window = 0;
  std::uint8_t tcp_dataofs = 0;
  std::uint32_t payload_size = 0;
  Bytes payload;
  std::uint8_t annotations = 0;
  std::optional<int> ground_truth_class;

  bool has(std::uint8_t flag) const { return (annotations & flag) != 0; }

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class Provenance { Simulated, PcapImport };

constexpr std::string_view to_string(Provenance p) { return p == Provenance::Simulated ? "Simulated" : "PcapImport"; }

struct Trace {
  std::vector<TraceRecord> records;
  Provenance provenance = Provenance::Simulated;
  bool curation_applied = false;

  friend bool operator==(const Trace&, const Trace&) = default;
};

}  // namespace mixsim::trace
