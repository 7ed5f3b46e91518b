#pragma once

// JSON Lines persistence. The first line is a header object carrying trace
// provenance; every following line is one record with the payload in base64.

#include <cstdio>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <string>

#include "mixsim/bytes.hpp"
#include "mixsim/error.hpp"
#include "mixsim/trace/features.hpp"
#include "mixsim/trace/record.hpp"

namespace mixsim::trace {

inline constexpr std::string_view kTraceFormat = "mixsim-trace";
inline constexpr int kTraceFormatVersion = 1;

inline nlohmann::ordered_json record_to_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["timestamp"] = r.timestamp;
  j["frame_num"] = r.frame_num;
  j["old_frame_num"] = r.old_frame_num;
  j["src_ip"] = r.src_ip;
  j["dst_ip"] = r.dst_ip;
  j["src_port"] = r.src_port;
  j["dst_port"] = r.dst_port;
  j["protocol"] = std::string(to_string(r.protocol));
  j["ip_len"] = r.ip_len;
  j["ip_ttl"] = r.ip_ttl;
  j["ip_id"] = r.ip_id;
  j["tcp_seq"] = r.tcp_seq;
  j["tcp_ack"] = r.tcp_ack;
  j["tcp_flags"] = r.tcp_flags;
  j["tcp_window"] = r.tcp_window;
  j["tcp_dataofs"] = r.tcp_dataofs;
  j["payload_size"] = r.payload_size;
  j["payload"] = base64_encode(r.payload);
  nlohmann::ordered_json ann = nlohmann::ordered_json::array();
  if (r.has(annotation::kRetransmission)) ann.push_back("retransmission");
  if (r.has(annotation::kFastRetransmission)) ann.push_back("fast_retransmission");
  if (r.has(annotation::kDuplicateAck)) ann.push_back("duplicate_ack");
  j["annotations"] = std::move(ann);
  j["ground_truth_class"] = r.ground_truth_class ? nlohmann::ordered_json(*r.ground_truth_class) : nlohmann::ordered_json(nullptr);
  return j;
}

inline TraceRecord record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.timestamp = j.at("timestamp").get<double>();
  r.frame_num = j.at("frame_num").get<std::uint64_t>();
  r.old_frame_num = j.at("old_frame_num").get<std::uint64_t>();
  r.src_ip = j.at("src_ip").get<std::string>();
  r.dst_ip = j.at("dst_ip").get<std::string>();
  r.src_port = j.at("src_port").get<std::uint16_t>();
  r.dst_port = j.at("dst_port").get<std::uint16_t>();
  const auto proto = j.at("protocol").get<std::string>();
  if (proto != "TCP" && proto != "UDP") fail(Errc::MalformedTrace, "unknown protocol " + proto);
  r.protocol = proto == "TCP" ? Protocol::TCP : Protocol::UDP;
  r.ip_len = j.at("ip_len").get<std::uint16_t>();
  r.ip_ttl = j.at("ip_ttl").get<std::uint8_t>();
  r.ip_id = j.at("ip_id").get<std::uint16_t>();
  r.tcp_seq = j.at("tcp_seq").get<std::uint32_t>();
  r.tcp_ack = j.at("tcp_ack").get<std::uint32_t>();
  r.tcp_flags = j.at("tcp_flags").get<std::uint8_t>();
  r.tcp_window = j.at("tcp_window").get<std::uint16_t>();
  r.tcp_dataofs = j.at("tcp_dataofs").get<std::uint8_t>();
  r.payload = base64_decode(j.at("payload").get<std::string>());
  r.payload_size = j.at("payload_size").get<std::uint32_t>();
  if (r.payload_size != r.payload.size()) fail(Errc::MalformedTrace, "payload_size does not match payload");
  for (const auto& a : j.at("annotations")) {
    const auto name = a.get<std::string>();
    if (name == "retransmission") {
      r.annotations |= annotation::kRetransmission;
    } else if (name == "fast_retransmission") {
      r.annotations |= annotation::kFastRetransmission;
    } else if (name == "duplicate_ack") {
      r.annotations |= annotation::kDuplicateAck;
    } else {
      fail(Errc::MalformedTrace, "unknown annotation " + name);
    }
  }
  if (const auto& gt = j.at("ground_truth_class"); !gt.is_null()) r.ground_truth_class = gt.get<int>();
  return r;
}

inline void write_jsonl(const Trace& trace, std::ostream& out) {
  nlohmann::ordered_json header;
  header["format"] = kTraceFormat;
  header["version"] = kTraceFormatVersion;
  header["provenance"] = std::string(to_string(trace.provenance));
  header["curation_applied"] = trace.curation_applied;
  out << header.dump() << '\n';
  for (const auto& r : trace.records) out << record_to_json(r).dump() << '\n';
}

inline std::string to_jsonl(const Trace& trace) {
  std::ostringstream os;
  write_jsonl(trace, os);
  return os.str();
}

/// Reads a trace. A missing header line means a simulated, uncurated trace.
inline Trace read_jsonl(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (j.contains("format")) {
        if (j.at("format") != kTraceFormat || j.at("version") != kTraceFormatVersion) {
          fail(Errc::MalformedTrace, "unsupported trace header", line_no);
        }
        trace.provenance = j.at("provenance") == "PcapImport" ? Provenance::PcapImport : Provenance::Simulated;
        trace.curation_applied = j.at("curation_applied").get<bool>();
        continue;
      }
      trace.records.push_back(record_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::MalformedTrace, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const Error& e) {
      if (e.code() != Errc::MalformedTrace) throw;
      fail(Errc::MalformedTrace, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return trace;
}

inline Trace from_jsonl(const std::string& text) {
  std::istringstream is(text);
  return read_jsonl(is);
}

/// Metadata columns in table order plus protocol, addresses and class. No
/// payload.
inline void write_csv(const Trace& trace, std::ostream& out) {
  out << "src_ip,dst_ip,protocol";
  for (auto name : kMetadataFeatures) out << ',' << name;
  out << ",ground_truth_class\n";
  for (const auto& r : trace.records) {
    out << r.src_ip << ',' << r.dst_ip << ',' << to_string(r.protocol);
    for (std::size_t c = 0; c < kMetadataFeatures.size(); ++c) {
      if (c == 8) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", r.timestamp);
        out << ',' << buf;
      } else {
        out << ',' << static_cast<std::uint64_t>(metadata_value(r, c));
      }
    }
    out << ',';
    if (r.ground_truth_class) out << *r.ground_truth_class;
    out << '\n';
  }
}

}  // namespace mixsim::trace
