#pragma once

// Classic libpcap reader and writer. IPv4 TCP/UDP only; everything else is
// counted and skipped.

#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

inline constexpr std::uint32_t kPcapMagicMicro = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicNano = 0xa1b23c4d;
inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::uint32_t kLinkRawIpv4 = 101;
inline constexpr std::size_t kPcapGlobalHeaderSize = 24;
inline constexpr std::size_t kPcapRecordHeaderSize = 16;

struct PcapImport {
  Trace trace;
  std::size_t skipped_count = 0;
};

namespace detail {

inline std::uint32_t read_u32(ByteView in, std::size_t at, bool swap) {
  const std::uint32_t le = static_cast<std::uint32_t>(in[at]) | static_cast<std::uint32_t>(in[at + 1]) << 8 |
                           static_cast<std::uint32_t>(in[at + 2]) << 16 | static_cast<std::uint32_t>(in[at + 3]) << 24;
  return swap ? __builtin_bswap32(le) : le;
}

inline void write_u32le(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void write_u16le(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline std::string ipv4_string(ByteView in, std::size_t at) {
  return NodeAddress(get_u32(in, at)).to_string();
}

// Parses one IPv4 packet. Returns false for anything that is not a complete
// IPv4 TCP/UDP header.
inline bool parse_ipv4(ByteView pkt, TraceRecord& r) {
  if (pkt.size() < 20 || (pkt[0] >> 4) != 4) return false;
  const std::size_t ihl = static_cast<std::size_t>(pkt[0] & 0x0F) * 4;
  if (ihl < 20 || pkt.size() < ihl) return false;
  const std::uint8_t proto = pkt[9];
  if (proto != 6 && proto != 17) return false;
  r.ip_len = get_u16(pkt, 2);
  r.ip_id = get_u16(pkt, 4);
  r.ip_ttl = pkt[8];
  r.src_ip = ipv4_string(pkt, 12);
  r.dst_ip = ipv4_string(pkt, 16);
  const std::size_t ip_end = std::min<std::size_t>(pkt.size(), std::max<std::size_t>(r.ip_len, ihl));
  const ByteView l4 = pkt.subspan(ihl, ip_end - ihl);
  std::size_t header = 0;
  if (proto == 6) {
    if (l4.size() < 20) return false;
    r.protocol = Protocol::TCP;
    r.src_port = get_u16(l4, 0);
    r.dst_port = get_u16(l4, 2);
    r.tcp_seq = get_u32(l4, 4);
    r.tcp_ack = get_u32(l4, 8);
    r.tcp_dataofs = static_cast<std::uint8_t>(l4[12] >> 4);
    r.tcp_flags = l4[13];
    r.tcp_window = get_u16(l4, 14);
    header = static_cast<std::size_t>(r.tcp_dataofs) * 4;
    if (header < 20 || header > l4.size()) return false;
  } else {
    if (l4.size() < 8) return false;
    r.protocol = Protocol::UDP;
    r.src_port = get_u16(l4, 0);
    r.dst_port = get_u16(l4, 2);
    header = 8;
  }
  r.payload.assign(l4.begin() + static_cast<std::ptrdiff_t>(header), l4.end());
  r.payload_size = static_cast<std::uint32_t>(r.payload.size());
  return true;
}

}  // namespace detail

/// Flags retransmissions and duplicate ACKs on TCP records, in capture order.
///
/// retransmission: (src, dst, ports, seq) seen before on a payload-bearing
/// segment. duplicate ack: (src, dst, ports, ack) seen before on a pure ACK.
/// A retransmission whose seq was dup-acked at least twice by the peer is
/// flagged fast_retransmission instead.
inline void annotate_tcp(Trace& trace) {
  using Flow = std::tuple<std::string, std::string, std::uint16_t, std::uint16_t, std::uint32_t>;
  std::map<Flow, int> data_seen;
  std::map<Flow, int> ack_seen;
  for (auto& r : trace.records) {
    if (r.protocol != Protocol::TCP) continue;
    if (r.payload_size > 0) {
      Flow key{r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.tcp_seq};
      if (data_seen[key]++ > 0) {
        const Flow reverse{r.dst_ip, r.src_ip, r.dst_port, r.src_port, r.tcp_seq};
        auto it = ack_seen.find(reverse);
        r.annotations |= (it != ack_seen.end() && it->second >= 3) ? annotation::kFastRetransmission
                                                                     : annotation::kRetransmission;
      }
    } else if (r.tcp_flags & tcp_flag::kAck) {
      Flow key{r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.tcp_ack};
      if (ack_seen[key]++ > 0) r.annotations |= annotation::kDuplicateAck;
    }
  }
}

inline PcapImport import_pcap(ByteView file) {
  if (file.size() < 4) fail(Errc::BadMagic, "file shorter than the pcap magic", 0);
  const std::uint32_t magic_le = detail::read_u32(file, 0, false);
  bool swap = false;
  bool nano = false;
  if (magic_le == kPcapMagicMicro || magic_le == kPcapMagicNano) {
    nano = magic_le == kPcapMagicNano;
  } else if (__builtin_bswap32(magic_le) == kPcapMagicMicro || __builtin_bswap32(magic_le) == kPcapMagicNano) {
    swap = true;
    nano = __builtin_bswap32(magic_le) == kPcapMagicNano;
  } else {
    fail(Errc::BadMagic, "unrecognised pcap magic " + to_hex(file.first(4)), 0);
  }
  if (file.size() < kPcapGlobalHeaderSize) fail(Errc::TruncatedRecord, "truncated pcap global header", 0);
  const std::uint32_t link = detail::read_u32(file, 20, swap);
  if (link != kLinkEthernet && link != kLinkRawIpv4) {
    fail(Errc::UnsupportedLinkType, "link type " + std::to_string(link));
  }

  PcapImport out;
  out.trace.provenance = Provenance::PcapImport;
  std::size_t pos = kPcapGlobalHeaderSize;
  std::uint64_t index = 0;
  while (pos < file.size()) {
    if (file.size() - pos < kPcapRecordHeaderSize) {
      fail(Errc::TruncatedRecord, "truncated record header", pos);
    }
    const std::uint32_t ts_sec = detail::read_u32(file, pos, swap);
    const std::uint32_t ts_frac = detail::read_u32(file, pos + 4, swap);
    const std::uint32_t incl_len = detail::read_u32(file, pos + 8, swap);
    if (incl_len > file.size() - pos - kPcapRecordHeaderSize) {
      fail(Errc::TruncatedRecord, "record claims " + std::to_string(incl_len) + " bytes", pos);
    }
    ByteView pkt = file.subspan(pos + kPcapRecordHeaderSize, incl_len);
    pos += kPcapRecordHeaderSize + incl_len;
    ++index;

    bool ok = true;
    if (link == kLinkEthernet) {
      ok = pkt.size() >= 14 && get_u16(pkt, 12) == 0x0800;
      if (ok) pkt = pkt.subspan(14);
    }
    TraceRecord r;
    if (!ok || !detail::parse_ipv4(pkt, r)) {
      ++out.skipped_count;
      continue;
    }
    r.timestamp = static_cast<double>(ts_sec) + static_cast<double>(ts_frac) / (nano ? 1e9 : 1e6);
    r.old_frame_num = index;
    r.frame_num = index;
    out.trace.records.push_back(std::move(r));
  }
  annotate_tcp(out.trace);
  return out;
}

enum class PcapLink : std::uint32_t { Ethernet = kLinkEthernet, RawIpv4 = kLinkRawIpv4 };

/// Little-endian microsecond pcap. Headers are rebuilt from record fields;
/// ip_len is written as the real packet length.
inline Bytes write_pcap(const Trace& trace, PcapLink link = PcapLink::Ethernet) {
  Bytes out;
  detail::write_u32le(out, kPcapMagicMicro);
  detail::write_u16le(out, 2);
  detail::write_u16le(out, 4);
  detail::write_u32le(out, 0);
  detail::write_u32le(out, 0);
  detail::write_u32le(out, 65535);
  detail::write_u32le(out, static_cast<std::uint32_t>(link));

  for (const auto& r : trace.records) {
    Bytes pkt;
    if (link == PcapLink::Ethernet) {
      const std::uint8_t macs[12] = {0x02, 0, 0, 0, 0, 2, 0x02, 0, 0, 0, 0, 1};
      pkt.insert(pkt.end(), macs, macs + 12);
      put_u16(pkt, 0x0800);
    }
    const bool tcp = r.protocol == Protocol::TCP;
    const std::size_t l4 = tcp ? 20 : 8;
    const std::size_t ip_start = pkt.size();
    pkt.push_back(0x45);
    pkt.push_back(0);
    put_u16(pkt, static_cast<std::uint16_t>(20 + l4 + r.payload.size()));
    put_u16(pkt, r.ip_id);
    put_u16(pkt, 0x4000);
    pkt.push_back(r.ip_ttl);
    pkt.push_back(static_cast<std::uint8_t>(r.protocol));
    put_u16(pkt, 0);
    put_u32(pkt, NodeAddress::parse(r.src_ip).value());
    put_u32(pkt, NodeAddress::parse(r.dst_ip).value());
    std::uint32_t sum = 0;
    for (std::size_t i = ip_start; i < ip_start + 20; i += 2) sum += get_u16(pkt, i);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    pkt[ip_start + 10] = static_cast<std::uint8_t>(~sum >> 8);
    pkt[ip_start + 11] = static_cast<std::uint8_t>(~sum);

    put_u16(pkt, r.src_port);
    put_u16(pkt, r.dst_port);
    if (tcp) {
      put_u32(pkt, r.tcp_seq);
      put_u32(pkt, r.tcp_ack);
      pkt.push_back(static_cast<std::uint8_t>(5 << 4));
      pkt.push_back(r.tcp_flags);
      put_u16(pkt, r.tcp_window);
      put_u16(pkt, 0);
      put_u16(pkt, 0);
    } else {
      put_u16(pkt, static_cast<std::uint16_t>(8 + r.payload.size()));
      put_u16(pkt, 0);
    }
    append(pkt, r.payload);

    const double whole = std::floor(r.timestamp);
    auto usec = static_cast<std::uint32_t>(std::llround((r.timestamp - whole) * 1e6));
    auto sec = static_cast<std::uint32_t>(whole);
    if (usec >= 1000000) {
      usec -= 1000000;
      ++sec;
    }
    detail::write_u32le(out, sec);
    detail::write_u32le(out, usec);
    detail::write_u32le(out, static_cast<std::uint32_t>(pkt.size()));
    detail::write_u32le(out, static_cast<std::uint32_t>(pkt.size()));
    append(out, pkt);
  }
  return out;
}

}  // namespace mixsim::trace
